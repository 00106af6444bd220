#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "echolm/common.hpp"

namespace echolm {

// Pairwise comparison on a seven-point scale. Quality differences map
// linearly onto [-3, 3] in half-point steps; scores inside the tie band
// count as comparable quality.
struct SyntheticJudge {
  double tie_band = 0.3;
  double noise_sigma = 0.0;
};

inline double round_to_half(double x) { return std::round(2.0 * x) / 2.0; }

inline double judge_score(double q_a, double q_b, const SyntheticJudge& spec, Rng* rng = nullptr) {
  if (q_a < 0.0 || q_a > 1.0 || q_b < 0.0 || q_b > 1.0)
    throw std::invalid_argument("judge_score: qualities must be in [0, 1]");
  double s = round_to_half(6.0 * (q_a - q_b));
  if (spec.noise_sigma > 0.0 && rng != nullptr) s += rng->next_gaussian() * spec.noise_sigma;
  return std::clamp(s, -3.0, 3.0);
}

enum class Verdict { Win, Tie, Loss };

inline Verdict verdict(double score, double tie_band = 0.3) {
  if (std::abs(score) <= tie_band) return Verdict::Tie;
  return score > 0.0 ? Verdict::Win : Verdict::Loss;
}

// (#wins + 0.5 * #ties) / #total.
inline double win_rate(const std::vector<double>& scores, double tie_band = 0.3) {
  if (scores.empty()) throw std::invalid_argument("win_rate of an empty score list");
  double wins = 0.0, ties = 0.0;
  for (const double s : scores) {
    switch (verdict(s, tie_band)) {
      case Verdict::Win: wins += 1.0; break;
      case Verdict::Tie: ties += 1.0; break;
      case Verdict::Loss: break;
    }
  }
  return (wins + 0.5 * ties) / static_cast<double>(scores.size());
}

}  // namespace echolm
