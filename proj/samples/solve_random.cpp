// Generates a random switching-control game, solves it and prints the
// certified exploitability of every player.
//
//   solve_random [players] [states] [horizon] [seed]

#include <cstdlib>
#include <iostream>

#include "pmg/pmg.hpp"

int main(int argc, char** argv) {
  pmg::io::GeneratorConfig cfg;
  if (argc > 1) cfg.players = std::strtoul(argv[1], nullptr, 10);
  if (argc > 2) cfg.states = std::strtoul(argv[2], nullptr, 10);
  if (argc > 3) cfg.horizon = std::strtoul(argv[3], nullptr, 10);
  if (argc > 4) cfg.seed = std::strtoull(argv[4], nullptr, 10);

  try {
    const auto game = pmg::io::generate(cfg);
    pmg::SolveOptions opts;
    opts.eps = 1e-2;
    const auto report = pmg::solve(game, opts);
    const auto values = pmg::evaluate_at_initial(report.values, game.initial_distribution());
    std::cout << "players " << game.num_players() << ", states " << game.num_states() << ", horizon "
              << report.horizon << ", stage iterations " << report.total_iterations << "\n";
    for (pmg::PlayerId k = 0; k < game.num_players(); ++k) {
      std::cout << "  player " << k << ": value " << values[k] << ", gap " << report.certified.players[k].gap << "\n";
    }
    std::cout << "certified gap " << report.certified_gap << " (target " << opts.eps << ")\n";
    return report.certified_gap <= opts.eps ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
