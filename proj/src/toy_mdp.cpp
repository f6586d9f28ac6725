#include "oran/toy_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oran {

std::size_t ToyMdp::next(std::size_t s, int a) {
  if (a == 0) return s == 0 ? 0 : s - 1;
  return std::min(s + 1, kStates - 1);
}

double ToyMdp::reward(std::size_t s, int a) {
  if (a == 0 && s == 0) return 0.7;
  if (a == 1 && s == kStates - 1) return 1.0;
  return 0.0;
}

std::vector<int> toy_value_iteration_policy(double gamma) {
  std::array<double, ToyMdp::kStates> v{};
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double change = 0.0;
    for (std::size_t s = 0; s < ToyMdp::kStates; ++s) {
      double best = -1e300;
      for (int a = 0; a < ToyMdp::kActions; ++a) {
        best = std::max(best, ToyMdp::reward(s, a) + gamma * v[ToyMdp::next(s, a)]);
      }
      change = std::max(change, std::abs(best - v[s]));
      v[s] = best;
    }
    if (change < 1e-12) break;
  }
  std::vector<int> policy(ToyMdp::kStates);
  for (std::size_t s = 0; s < ToyMdp::kStates; ++s) {
    double best = -1e300;
    for (int a = 0; a < ToyMdp::kActions; ++a) {
      const double q = ToyMdp::reward(s, a) + gamma * v[ToyMdp::next(s, a)];
      if (q > best) {
        best = q;
        policy[s] = a;
      }
    }
  }
  return policy;
}

QTable toy_q_learning(const QHyper& hyper, std::size_t updates, std::uint64_t seed) {
  QTable q(ToyMdp::kStates, ToyMdp::kActions, hyper);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_s(0, ToyMdp::kStates - 1);
  std::uniform_int_distribution<int> pick_a(0, ToyMdp::kActions - 1);
  for (std::size_t i = 0; i < updates; ++i) {
    const auto s = pick_s(rng);
    const int a = pick_a(rng);
    q_update(q, s, a, ToyMdp::reward(s, a), ToyMdp::next(s, a));
  }
  return q;
}

bool toy_mdp_check(const QHyper& hyper, std::size_t updates, std::uint64_t seed) {
  const auto oracle = toy_value_iteration_policy(hyper.discount);
  const auto q = toy_q_learning(hyper, updates, seed);
  for (std::size_t s = 0; s < ToyMdp::kStates; ++s) {
    if (q.argmax(s) != oracle[s]) return false;
  }
  return true;
}

}  // namespace oran
