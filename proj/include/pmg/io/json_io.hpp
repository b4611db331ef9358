#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pmg/errors.hpp"
#include "pmg/game.hpp"
#include "pmg/io/rational.hpp"
#include "pmg/policy.hpp"

namespace pmg::io {

using nlohmann::json;

namespace detail {

inline std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const json& field(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(at(path, key), "missing field");
  return *it;
}

inline const json& array(const json& j, const std::string& path, std::size_t expected = SIZE_MAX) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  if (expected != SIZE_MAX && j.size() != expected) {
    throw ParseError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  return j;
}

inline std::size_t index(const json& j, const std::string& path, std::size_t bound) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(path, "expected a non-negative integer");
  const auto v = j.get<std::size_t>();
  if (v >= bound) throw ParseError(path, "index " + std::to_string(v) + " out of range");
  return v;
}

inline std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() <= 0) throw ParseError(path, "expected a positive integer");
  return j.get<std::size_t>();
}

inline Eigen::MatrixXd matrix(const json& j, const std::string& path, std::size_t rows, std::size_t cols) {
  array(j, path, rows);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto rp = at(path, r);
    array(j[r], rp, cols);
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number_from_json(j[r][c], at(rp, c));
    }
  }
  return m;
}

inline std::vector<double> vector(const json& j, const std::string& path, std::size_t size) {
  array(j, path, size);
  std::vector<double> v(size);
  for (std::size_t i = 0; i < size; ++i) v[i] = number_from_json(j[i], at(path, i));
  return v;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_to_json(x));
  return out;
}

}  // namespace detail

inline json game_to_json(const MarkovGame& game) {
  json j;
  j["players"] = game.num_players();
  j["actions"] = game.action_counts();
  j["states"] = game.num_states();
  if (game.horizon().is_finite()) {
    j["horizon"] = {{"finite", game.horizon().steps()}};
  } else {
    j["horizon"] = {{"discounted", number_to_json(game.horizon().gamma())}};
  }
  j["rho"] = detail::vector_to_json(game.initial_distribution());
  json layers = json::array();
  for (const auto& layer : game.layers()) {
    json states = json::array();
    for (const auto& st : layer) {
      json node;
      if (st.controllers.size() == 1) {
        node["controller"] = st.controllers.front();
      } else {
        node["controller"] = {{"two_controller", st.controllers}};
      }
      json edges = json::array();
      for (const auto& e : st.edges) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"payoff", detail::matrix_to_json(e.payoff)}});
      }
      node["edges"] = std::move(edges);
      node["transition"] = detail::matrix_to_json(st.transition);
      states.push_back(std::move(node));
    }
    layers.push_back(std::move(states));
  }
  j["layers"] = std::move(layers);
  return j;
}

// Parses a game document. Transition rows and the initial distribution must be
// probability vectors; the zero-sum property is left to validate().
inline MarkovGame game_from_json(const json& j) {
  const std::string root = "$";
  const std::size_t n = detail::count(detail::field(j, root, "players"), root + ".players");
  const auto& actions_j = detail::array(detail::field(j, root, "actions"), root + ".actions", n);
  std::vector<std::size_t> actions;
  for (std::size_t k = 0; k < n; ++k) actions.push_back(detail::count(actions_j[k], detail::at(root + ".actions", k)));
  const std::size_t S = detail::count(detail::field(j, root, "states"), root + ".states");

  const auto& hz = detail::field(j, root, "horizon");
  const std::string hp = root + ".horizon";
  HorizonSpec horizon = HorizonSpec::finite(1);
  if (hz.is_object() && hz.contains("finite")) {
    horizon = HorizonSpec::finite(detail::count(hz["finite"], hp + ".finite"));
  } else if (hz.is_object() && hz.contains("discounted")) {
    const double gamma = number_from_json(hz["discounted"], hp + ".discounted");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParseError(hp + ".discounted", "discount factor must lie in (0,1)");
    horizon = HorizonSpec::discounted(gamma);
  } else {
    throw ParseError(hp, "expected {\"finite\": H} or {\"discounted\": gamma}");
  }

  auto rho = detail::vector(detail::field(j, root, "rho"), root + ".rho", S);
  if (!is_distribution(rho)) throw ParseError(root + ".rho", "initial distribution is not a probability vector");

  const std::size_t L = horizon.is_finite() ? horizon.steps() : 1;
  const auto& layers_j = detail::array(detail::field(j, root, "layers"), root + ".layers", L);
  std::vector<std::vector<StateInteraction>> layers;
  for (std::size_t h = 0; h < L; ++h) {
    const auto lp = detail::at(root + ".layers", h);
    const auto& states_j = detail::array(layers_j[h], lp, S);
    std::vector<StateInteraction> layer;
    for (std::size_t s = 0; s < S; ++s) {
      const auto sp = detail::at(lp, s);
      const auto& node = states_j[s];
      StateInteraction st;
      const auto& ctrl = detail::field(node, sp, "controller");
      if (ctrl.is_object()) {
        const auto cp = sp + ".controller.two_controller";
        const auto& pair = detail::array(detail::field(ctrl, sp + ".controller", "two_controller"), cp, 2);
        st.controllers = {detail::index(pair[0], cp + "[0]", n), detail::index(pair[1], cp + "[1]", n)};
        if (st.controllers[0] == st.controllers[1]) throw ParseError(cp, "controllers must differ");
      } else {
        st.controllers = {detail::index(ctrl, sp + ".controller", n)};
      }
      const auto& edges_j = detail::array(detail::field(node, sp, "edges"), sp + ".edges");
      for (std::size_t i = 0; i < edges_j.size(); ++i) {
        const auto ep = detail::at(sp + ".edges", i);
        EdgeGame e;
        e.from = detail::index(detail::field(edges_j[i], ep, "from"), ep + ".from", n);
        e.to = detail::index(detail::field(edges_j[i], ep, "to"), ep + ".to", n);
        if (e.from == e.to) throw ParseError(ep, "edge endpoints must differ");
        e.payoff = detail::matrix(detail::field(edges_j[i], ep, "payoff"), ep + ".payoff", actions[e.from],
                                  actions[e.to]);
        st.edges.push_back(std::move(e));
      }
      std::size_t rows = 1;
      for (auto c : st.controllers) rows *= actions[c];
      const auto tp = sp + ".transition";
      st.transition = detail::matrix(detail::field(node, sp, "transition"), tp, rows, S);
      for (std::size_t r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd row = st.transition.row(static_cast<Eigen::Index>(r));
        if ((row.array() < 0.0).any() || std::abs(row.sum() - 1.0) > kStochasticTol) {
          throw ParseError(detail::at(tp, r), "transition row sums to " + std::to_string(row.sum()) +
                                                   " (must be a probability vector)");
        }
      }
      layer.push_back(std::move(st));
    }
    layers.push_back(std::move(layer));
  }
  return MarkovGame(std::move(actions), S, horizon, std::move(layers), std::move(rho));
}

inline json policy_to_json(const ProductPolicy& pi) {
  json players = json::array();
  for (const auto& f : pi.factors()) {
    json layers = json::array();
    for (std::size_t h = 0; h < f.num_layers(); ++h) {
      json states = json::array();
      for (StateId s = 0; s < f.num_states(); ++s) states.push_back(detail::vector_to_json(f.at(h, s)));
      layers.push_back(std::move(states));
    }
    players.push_back(std::move(layers));
  }
  return {{"kind", "product"}, {"actions", pi.action_counts()}, {"layers", pi.num_layers()},
          {"states", pi.num_states()}, {"players", std::move(players)}};
}

inline json policy_to_json(const CorrelatedPolicy& sigma) {
  json layers = json::array();
  for (std::size_t h = 0; h < sigma.num_layers(); ++h) {
    json states = json::array();
    for (StateId s = 0; s < sigma.num_states(); ++s) states.push_back(detail::vector_to_json(sigma.at(h, s)));
    layers.push_back(std::move(states));
  }
  return {{"kind", "correlated"}, {"actions", sigma.action_counts()}, {"layers", sigma.num_layers()},
          {"states", sigma.num_states()}, {"joint", std::move(layers)}};
}

using AnyPolicy = std::variant<ProductPolicy, CorrelatedPolicy>;

inline AnyPolicy policy_from_json(const json& j) {
  const std::string root = "$";
  const auto& kind = detail::field(j, root, "kind");
  const auto& actions_j = detail::array(detail::field(j, root, "actions"), root + ".actions");
  std::vector<std::size_t> actions;
  for (std::size_t k = 0; k < actions_j.size(); ++k) {
    actions.push_back(detail::count(actions_j[k], detail::at(root + ".actions", k)));
  }
  const std::size_t L = detail::count(detail::field(j, root, "layers"), root + ".layers");
  const std::size_t S = detail::count(detail::field(j, root, "states"), root + ".states");
  auto read = [&](const json& d, const std::string& path, std::size_t size) {
    auto v = detail::vector(d, path, size);
    if (!is_distribution(v)) throw ParseError(path, "not a probability vector");
    return v;
  };
  if (kind == "product") {
    const auto& players = detail::array(detail::field(j, root, "players"), root + ".players", actions.size());
    std::vector<PolicyFactor> factors;
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const auto kp = detail::at(root + ".players", k);
      detail::array(players[k], kp, L);
      PolicyFactor f(actions[k], L, S);
      for (std::size_t h = 0; h < L; ++h) {
        const auto hp = detail::at(kp, h);
        detail::array(players[k][h], hp, S);
        for (StateId s = 0; s < S; ++s) f.at(h, s) = read(players[k][h][s], detail::at(hp, s), actions[k]);
      }
      factors.push_back(std::move(f));
    }
    return ProductPolicy(std::move(factors));
  }
  if (kind == "correlated") {
    CorrelatedPolicy sigma(actions, L, S);
    const auto& joint = detail::array(detail::field(j, root, "joint"), root + ".joint", L);
    for (std::size_t h = 0; h < L; ++h) {
      const auto hp = detail::at(root + ".joint", h);
      detail::array(joint[h], hp, S);
      for (StateId s = 0; s < S; ++s) sigma.at(h, s) = read(joint[h][s], detail::at(hp, s), sigma.space().size());
    }
    return sigma;
  }
  throw ParseError(root + ".kind", "expected \"product\" or \"correlated\"");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError(path, "cannot write file");
  out << j.dump(2) << "\n";
}

}  // namespace pmg::io
