#pragma once

#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "pmg/best_response.hpp"
#include "pmg/certificate.hpp"
#include "pmg/errors.hpp"
#include "pmg/io/json_io.hpp"
#include "pmg/solver.hpp"
#include "pmg/valuation.hpp"

namespace pmg::io {

// Command report: {"command", "inputs", "values", "gaps", "verdict", "runtime_ms"}.
struct Report {
  std::string command;
  json inputs = json::object();
  json values = json::object();
  json gaps = json::object();
  std::string verdict = "PASS";
  double runtime_ms = 0.0;
  // (player, quantity, value) rows for --csv; player -1 means "all".
  std::vector<std::tuple<long, std::string, double>> rows;

  json to_json() const {
    return {{"command", command}, {"inputs", inputs},   {"values", values},
            {"gaps", gaps},       {"verdict", verdict}, {"runtime_ms", runtime_ms}};
  }

  void add_row(long player, const std::string& quantity, double value) { rows.emplace_back(player, quantity, value); }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot write file");
    out.precision(17);
    out << "player,quantity,value\n";
    for (const auto& [player, quantity, value] : rows) {
      if (player < 0) {
        out << "all";
      } else {
        out << player;
      }
      out << "," << quantity << "," << value << "\n";
    }
  }
};

inline json to_json(const GapReport& g) {
  json players = json::array();
  for (const auto& p : g.players) {
    players.push_back({{"best_response_value", report_number(p.best_response_value)},
                       {"current_value", report_number(p.current_value)},
                       {"deviation", report_number(p.deviation)},
                       {"gap", report_number(p.gap)}});
  }
  return {{"players", std::move(players)}, {"max_gap", report_number(g.max_gap)},
          {"sum_gap", report_number(g.sum_gap)}};
}

inline void add_rows(Report& r, const GapReport& g, const std::string& prefix) {
  for (std::size_t k = 0; k < g.players.size(); ++k) {
    const auto p = static_cast<long>(k);
    r.add_row(p, prefix + "best_response_value", g.players[k].best_response_value);
    r.add_row(p, prefix + "current_value", g.players[k].current_value);
    r.add_row(p, prefix + "gap", g.players[k].gap);
  }
  r.add_row(-1, prefix + "max_gap", g.max_gap);
}

inline json to_json(const ValueTable& w) {
  json players = json::array();
  for (PlayerId k = 0; k < w.num_players(); ++k) {
    json layers = json::array();
    for (std::size_t h = 0; h < w.num_layers(); ++h) {
      json states = json::array();
      for (StateId s = 0; s < w.num_states(); ++s) states.push_back(report_number(w.at(k, h, s)));
      layers.push_back(std::move(states));
    }
    players.push_back(std::move(layers));
  }
  return players;
}

inline json to_json(const CertificateReport& c) {
  json residuals = json::array();
  for (double x : c.residuals) residuals.push_back(report_number(x));
  return {{"objective", report_number(c.objective)}, {"max_violation", report_number(c.max_violation)},
          {"residuals", std::move(residuals)},        {"constraints", c.constraints},
          {"threshold", report_number(c.threshold)}, {"feasible", c.feasible},
          {"pass", c.pass}};
}

inline json to_json(const SolveReport& s) {
  json stage_gaps = json::array();
  for (double g : s.stage_gaps) stage_gaps.push_back(report_number(g));
  return {{"policy", policy_to_json(s.policy)},
          {"stage_values", to_json(s.stage_values)},
          {"values", to_json(s.values)},
          {"stage_gaps", std::move(stage_gaps)},
          {"stage_tolerance", report_number(s.stage_tolerance)},
          {"horizon", s.horizon},
          {"certified_gap", report_number(s.certified_gap)},
          {"total_iterations", s.total_iterations}};
}

}  // namespace pmg::io
