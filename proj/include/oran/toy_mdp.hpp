#pragma once

// Five-state deterministic chain used to validate the Q-learning update
// against value iteration before a bundle is exported.

#include <array>
#include <cstdint>
#include <vector>

#include "oran/drl_agent.hpp"

namespace oran {

struct ToyMdp {
  static constexpr std::size_t kStates = 5;
  static constexpr int kActions = 2;  // 0 = left, 1 = right

  /// Left from state 0 pays 0.7 and stays; right from state 4 pays 1.0 and
  /// stays; every other move pays nothing.
  static std::size_t next(std::size_t s, int a);
  static double reward(std::size_t s, int a);
};

/// Greedy policy from value iteration to convergence.
std::vector<int> toy_value_iteration_policy(double gamma);

/// Q-learning on uniformly sampled (s, a) pairs.
QTable toy_q_learning(const QHyper& hyper, std::size_t updates, std::uint64_t seed);

/// True when Q-learning's greedy policy matches value iteration exactly.
bool toy_mdp_check(const QHyper& hyper, std::size_t updates = 100000, std::uint64_t seed = 7);

}  // namespace oran
