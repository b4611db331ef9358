// pmg: command-line front end for the polymatrix Markov game library.
//
// Every subcommand prints a JSON report on stdout. Exit status: 0 on PASS,
// 1 when the report's verdict is FAIL, 2 on usage or input errors.

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "CLI11.hpp"
#include "pmg/pmg.hpp"

namespace {

using pmg::io::json;
using pmg::io::report_number;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  double eps = 1e-2;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  std::size_t iters = std::size_t{1} << 20;
  std::string learner = "omwu";
  std::size_t jobs = 1;
  std::string csv;
  bool no_timing = false;

  pmg::Learner learner_kind() const {
    return learner == "mwu" ? pmg::Learner::kMultiplicative : pmg::Learner::kOptimistic;
  }
};

json values_at_initial(const pmg::MarkovGame& game, const pmg::ValueTable& v) {
  json out = json::array();
  for (double x : pmg::evaluate_at_initial(v, game.initial_distribution())) out.push_back(report_number(x));
  return out;
}

pmg::ProductPolicy require_product(const pmg::io::AnyPolicy& p, const std::string& path) {
  if (!std::holds_alternative<pmg::ProductPolicy>(p)) throw pmg::ParseError(path, "expected a product policy");
  return std::get<pmg::ProductPolicy>(p);
}

pmg::CorrelatedPolicy as_correlated(const pmg::io::AnyPolicy& p) {
  if (std::holds_alternative<pmg::CorrelatedPolicy>(p)) return std::get<pmg::CorrelatedPolicy>(p);
  return pmg::lift(std::get<pmg::ProductPolicy>(p));
}

template <class Fn>
decltype(auto) visit_policy(const pmg::io::AnyPolicy& p, Fn&& fn) {
  return std::visit(std::forward<Fn>(fn), p);
}

int emit(pmg::io::Report& report, const Common& common, std::chrono::steady_clock::time_point start) {
  report.runtime_ms =
      common.no_timing ? 0.0 : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::cout << report.to_json().dump(2) << "\n";
  if (!common.csv.empty()) report.write_csv(common.csv);
  return report.verdict == "PASS" ? kExitPass : kExitFail;
}

pmg::io::Report cmd_validate(const std::string& game_path) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  pmg::io::Report r;
  r.command = "validate";
  r.inputs["game"] = game_path;
  json violations = json::array();
  for (const auto& v : pmg::validate(game)) {
    violations.push_back({{"kind", pmg::to_string(v.kind)}, {"message", v.message}});
  }
  json switching = json::array();
  for (const auto& v : pmg::switching_control_violations(game)) switching.push_back(v.message);
  r.values["players"] = game.num_players();
  r.values["states"] = game.num_states();
  r.values["switching_control"] = switching.empty();
  r.values["switching_control_violations"] = switching;
  r.gaps = json::object();
  r.values["violations"] = violations;
  r.add_row(-1, "violations", static_cast<double>(violations.size()));
  r.verdict = violations.empty() ? "PASS" : "FAIL";
  return r;
}

pmg::io::Report cmd_solve(const std::string& game_path, const Common& c) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  pmg::SolveOptions opts;
  opts.eps = c.eps;
  opts.seed = c.seed;
  opts.max_stage_iters = c.iters;
  opts.learner = c.learner_kind();
  opts.jobs = c.jobs;
  opts.best_response_tol = c.tol;
  const auto s = pmg::solve(game, opts);
  pmg::io::Report r;
  r.command = "solve";
  r.inputs = {{"game", game_path}, {"eps", report_number(c.eps)}, {"seed", c.seed},
              {"iters", c.iters},   {"learner", c.learner},         {"tol", report_number(c.tol)}};
  r.values = pmg::io::to_json(s);
  r.values["initial"] = values_at_initial(game, s.values);
  r.gaps = pmg::io::to_json(s.certified);
  r.gaps["certified_gap"] = report_number(s.certified_gap);
  pmg::io::add_rows(r, s.certified, "");
  r.add_row(-1, "total_iterations", static_cast<double>(s.total_iterations));
  r.verdict = s.certified_gap <= c.eps ? "PASS" : "FAIL";
  return r;
}

pmg::io::Report cmd_gap(const std::string& game_path, const std::string& policy_path, const Common& c) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  const auto policy = pmg::io::policy_from_json(pmg::io::read_json_file(policy_path));
  const auto g = visit_policy(policy, [&](const auto& p) { return pmg::gap_report(game, p, c.tol); });
  pmg::io::Report r;
  r.command = "gap";
  r.inputs = {{"game", game_path}, {"policy", policy_path}, {"tol", report_number(c.tol)}};
  r.values["initial"] = visit_policy(policy, [&](const auto& p) { return values_at_initial(game, pmg::evaluate(game, p)); });
  r.values["kind"] = std::holds_alternative<pmg::ProductPolicy>(policy) ? "product" : "correlated";
  r.gaps = pmg::io::to_json(g);
  pmg::io::add_rows(r, g, "");
  r.verdict = g.max_gap <= c.eps ? "PASS" : "FAIL";
  return r;
}

pmg::io::Report cmd_best_response(const std::string& game_path, const std::string& policy_path,
                                  pmg::PlayerId player, const Common& c) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  const auto policy = pmg::io::policy_from_json(pmg::io::read_json_file(policy_path));
  if (player >= game.num_players()) throw pmg::DomainError("player out of range");
  const auto br = visit_policy(policy, [&](const auto& p) { return pmg::best_response(game, p, player, c.tol); });
  const auto current =
      visit_policy(policy, [&](const auto& p) { return pmg::evaluate_at_initial(pmg::evaluate(game, p), game.initial_distribution()); });
  pmg::io::Report r;
  r.command = "best-response";
  r.inputs = {{"game", game_path}, {"policy", policy_path}, {"player", player}, {"tol", report_number(c.tol)}};
  json layers = json::array();
  for (std::size_t h = 0; h < br.policy.num_layers(); ++h) {
    json states = json::array();
    for (pmg::StateId s = 0; s < br.policy.num_states(); ++s) {
      json d = json::array();
      for (double x : br.policy.at(h, s)) d.push_back(report_number(x));
      states.push_back(std::move(d));
    }
    layers.push_back(std::move(states));
  }
  r.values["policy"] = std::move(layers);
  r.values["best_response_value"] = report_number(br.value_at_initial);
  r.values["current_value"] = report_number(current[player]);
  const double gap = std::max(0.0, br.value_at_initial - current[player]);
  r.gaps["gap"] = report_number(gap);
  r.add_row(static_cast<long>(player), "best_response_value", br.value_at_initial);
  r.add_row(static_cast<long>(player), "gap", gap);
  return r;
}

pmg::io::Report cmd_marginalize(const std::string& policy_path) {
  const auto policy = pmg::io::policy_from_json(pmg::io::read_json_file(policy_path));
  const auto pi = pmg::marginalize(as_correlated(policy));
  pmg::io::Report r;
  r.command = "marginalize";
  r.inputs["policy"] = policy_path;
  r.values["policy"] = pmg::io::policy_to_json(pi);
  return r;
}

pmg::io::Report cmd_collapse(const std::string& game_path, const std::string& policy_path, const Common& c) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  const auto sigma = as_correlated(pmg::io::policy_from_json(pmg::io::read_json_file(policy_path)));
  const double tol = 1e-6;
  const bool two_player = game.num_players() == 2;
  const auto col = two_player ? pmg::collapse_two_player(game, sigma, tol, c.tol) : pmg::collapse_cce(game, sigma, tol, c.tol);
  pmg::io::Report r;
  r.command = "collapse";
  r.inputs = {{"game", game_path}, {"policy", policy_path}, {"tol", report_number(c.tol)}};
  r.values["marginal"] = pmg::io::policy_to_json(col.marginal);
  r.values["bound_kind"] = two_player ? "two_player" : "n_player";
  r.gaps["cce"] = pmg::io::to_json(col.cce);
  r.gaps["ne"] = pmg::io::to_json(col.ne);
  r.gaps["factor"] = report_number(col.factor);
  r.gaps["bound"] = report_number(col.bound);
  r.gaps["bound_asserted"] = col.bound_asserted;
  r.gaps["bound_holds"] = col.bound_holds;
  pmg::io::add_rows(r, col.cce, "cce_");
  pmg::io::add_rows(r, col.ne, "ne_");
  r.add_row(-1, "bound", col.bound);
  r.verdict = !col.bound_asserted || col.bound_holds ? "PASS" : "FAIL";
  return r;
}

pmg::io::Report cmd_certify(const std::string& game_path, const std::string& policy_path,
                            const std::optional<std::string>& values_path, std::optional<double> threshold,
                            const Common& c) {
  const auto game = pmg::io::game_from_json(pmg::io::read_json_file(game_path));
  const auto pi = require_product(pmg::io::policy_from_json(pmg::io::read_json_file(policy_path)), "$");
  pmg::ValueTable w;
  if (values_path) {
    const auto j = pmg::io::read_json_file(*values_path);
    const auto& players = j.is_object() ? j.at("w") : j;
    w = pmg::ValueTable(game.num_players(), pi.num_layers(), game.num_states());
    for (pmg::PlayerId k = 0; k < game.num_players(); ++k) {
      for (std::size_t h = 0; h < pi.num_layers(); ++h) {
        for (pmg::StateId s = 0; s < game.num_states(); ++s) {
          const auto path = "$[" + std::to_string(k) + "][" + std::to_string(h) + "][" + std::to_string(s) + "]";
          if (!players.is_array() || k >= players.size() || !players[k].is_array() || h >= players[k].size() ||
              !players[k][h].is_array() || s >= players[k][h].size()) {
            throw pmg::ParseError(path, "missing value");
          }
          w.at(k, h, s) = pmg::io::number_from_json(players[k][h][s], path);
        }
      }
    }
  } else {
    w = pmg::best_response_values(game, pi, c.tol);
  }
  const double limit = threshold.value_or(static_cast<double>(game.num_players()) * c.eps);
  const auto cert = pmg::pne_check(game, pi, w, limit);
  pmg::io::Report r;
  r.command = "certify";
  r.inputs = {{"game", game_path}, {"policy", policy_path}, {"threshold", report_number(limit)}};
  if (values_path) r.inputs["values"] = *values_path;
  r.values["certificate"] = pmg::io::to_json(cert);
  r.values["w"] = pmg::io::to_json(w);
  if (cert.feasible) {
    const auto ne = pmg::optimum_implies_ne(cert, game, pi, w);
    r.gaps = pmg::io::to_json(ne.gaps);
    r.gaps["bound"] = report_number(ne.bound);
    r.gaps["bound_holds"] = ne.holds;
    pmg::io::add_rows(r, ne.gaps, "");
  }
  r.add_row(-1, "objective", cert.objective);
  r.add_row(-1, "max_violation", cert.max_violation);
  r.verdict = cert.pass ? "PASS" : "FAIL";
  return r;
}

pmg::io::Report cmd_counterexample(const std::string& which, bool verify) {
  namespace cx = pmg::counterexamples;
  const auto ex = which == "finite" ? cx::build_finite_example() : cx::build_infinite_example();
  pmg::io::Report r;
  r.command = "counterexample";
  r.inputs = {{"example", which}, {"verify", verify}};
  r.values["game"] = pmg::io::game_to_json(ex.game);
  r.values["sigma"] = pmg::io::policy_to_json(ex.sigma);
  if (!verify) return r;
  const auto v = cx::verify_no_collapse(ex);
  auto numbers = [](const std::vector<double>& xs) {
    json out = json::array();
    for (double x : xs) out.push_back(report_number(x));
    return out;
  };
  r.values["sigma_values"] = numbers(v.sigma_values);
  r.values["deviation_values"] = numbers(v.deviation_values);
  r.values["marginal_values"] = numbers(v.marginal_values);
  r.values["marginal_all_a2_value"] = report_number(v.marginal_best_deviation);
  r.values["enumerated_best_deviation"] = report_number(v.enumerated_best);
  r.gaps["cce"] = pmg::io::to_json(v.cce);
  r.gaps["ne"] = pmg::io::to_json(v.ne);
  r.gaps["exhibited_gain"] = report_number(v.exhibited_gain);
  r.gaps["expected_lower_bound"] = report_number(v.expected_gap);
  if (!v.pass) r.gaps["failure"] = v.failure;
  pmg::io::add_rows(r, v.cce, "cce_");
  pmg::io::add_rows(r, v.ne, "ne_");
  r.add_row(0, "exhibited_gain", v.exhibited_gain);
  r.verdict = v.pass ? "PASS" : "FAIL";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash equilibria of zero-sum polymatrix Markov games"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--eps", common.eps, "target equilibrium gap")->check(CLI::PositiveNumber);
    sub->add_option("--tol", common.tol, "best-response tolerance (discounted games)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--iters", common.iters, "iteration budget per stage game")->check(CLI::PositiveNumber);
    sub->add_option("--learner", common.learner, "no-regret learner")->check(CLI::IsMember({"omwu", "mwu"}));
    sub->add_option("--jobs", common.jobs, "worker threads for per-state solves")->check(CLI::PositiveNumber);
    sub->add_option("--csv", common.csv, "also write a player,quantity,value CSV table");
    sub->add_flag("--no-timing", common.no_timing, "report runtime_ms as 0 for byte-identical output");
  };

  std::string game_path, policy_path, which;
  std::optional<std::string> values_path;
  std::optional<double> threshold;
  pmg::PlayerId player = 0;
  bool verify = false;

  auto* validate = app.add_subcommand("validate", "check a game file");
  validate->add_option("game", game_path)->required();
  add_common(validate);

  auto* solve = app.add_subcommand("solve", "compute an approximate Nash equilibrium");
  solve->add_option("game", game_path)->required();
  add_common(solve);

  auto* gap = app.add_subcommand("gap", "exploitability of a product or correlated policy");
  gap->add_option("game", game_path)->required();
  gap->add_option("policy", policy_path)->required();
  add_common(gap);

  auto* best = app.add_subcommand("best-response", "best response of one player");
  best->add_option("game", game_path)->required();
  best->add_option("policy", policy_path)->required();
  best->add_option("--player", player, "deviating player")->required();
  add_common(best);

  auto* marginal = app.add_subcommand("marginalize", "marginals of a correlated policy");
  marginal->add_option("policy", policy_path)->required();
  add_common(marginal);

  auto* collapse = app.add_subcommand("collapse", "marginalise a correlated policy and certify both");
  collapse->add_option("game", game_path)->required();
  collapse->add_option("policy", policy_path)->required();
  add_common(collapse);

  auto* certify = app.add_subcommand("certify", "evaluate the Nash program at (policy, w)");
  certify->add_option("game", game_path)->required();
  certify->add_option("policy", policy_path)->required();
  certify->add_option("--values", values_path, "w table [player][layer][state]; default: best-response values");
  certify->add_option("--threshold", threshold, "objective threshold; default n * eps");
  add_common(certify);

  auto* counter = app.add_subcommand("counterexample", "the no-collapse examples");
  counter->add_option("which", which)->required()->check(CLI::IsMember({"finite", "infinite"}));
  counter->add_flag("--verify", verify, "certify the reference values");
  add_common(counter);

  pmg::io::GeneratorConfig gen;
  std::optional<std::size_t> horizon;
  std::optional<double> gamma;
  std::string out_path;
  auto* generate = app.add_subcommand("generate", "random compliant game");
  generate->add_option("--players", gen.players)->check(CLI::Range(2, 64));
  generate->add_option("--states", gen.states)->check(CLI::PositiveNumber);
  generate->add_option("--horizon", horizon, "finite horizon (default 3)")->check(CLI::PositiveNumber);
  generate->add_option("--gamma", gamma, "discount factor; makes the game discounted");
  generate->add_option("--actions", gen.actions, "per-player action counts");
  generate->add_option("--min-actions", gen.min_actions)->check(CLI::PositiveNumber);
  generate->add_option("--max-actions", gen.max_actions)->check(CLI::PositiveNumber);
  generate->add_option("--density", gen.density)->check(CLI::Range(0.0, 1.0));
  generate->add_option("--controllers", gen.controllers_per_state, "controllers per state (1 or 2)")
      ->check(CLI::Range(1, 2));
  generate->add_option("--seed", gen.seed);
  generate->add_option("--out", out_path, "write the game here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (*generate) {
      if (horizon && gamma) throw CLI::ValidationError("--horizon and --gamma are mutually exclusive");
      if (gamma) {
        gen.horizon.reset();
        gen.gamma = *gamma;
      } else if (horizon) {
        gen.horizon = *horizon;
      }
      const auto j = pmg::io::game_to_json(pmg::io::generate(gen));
      if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        pmg::io::write_json_file(out_path, j);
      }
      return kExitPass;
    }
    pmg::io::Report report;
    if (*validate) report = cmd_validate(game_path);
    if (*solve) report = cmd_solve(game_path, common);
    if (*gap) report = cmd_gap(game_path, policy_path, common);
    if (*best) report = cmd_best_response(game_path, policy_path, player, common);
    if (*marginal) report = cmd_marginalize(policy_path);
    if (*collapse) report = cmd_collapse(game_path, policy_path, common);
    if (*certify) report = cmd_certify(game_path, policy_path, values_path, threshold, common);
    if (*counter) report = cmd_counterexample(which, verify);
    return emit(report, common, start);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pmg::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
