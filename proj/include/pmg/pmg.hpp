#pragma once

#include "pmg/best_response.hpp"
#include "pmg/certificate.hpp"
#include "pmg/counterexamples.hpp"
#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/io/generator.hpp"
#include "pmg/io/json_io.hpp"
#include "pmg/io/rational.hpp"
#include "pmg/io/report.hpp"
#include "pmg/joint_action.hpp"
#include "pmg/policy.hpp"
#include "pmg/solver.hpp"
#include "pmg/stage_solver.hpp"
#include "pmg/valuation.hpp"
