#pragma once
// Lightweight helpfulness proxy: a logistic scorer over hand-built features
// of a (request, example) pair. Predicts end-to-end usefulness of including
// the example, not mere embedding relevance; trained offline from response
// quality feedback.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"

namespace echolm {

struct FeedbackRecord {
  std::string request_text;
  ExampleId example_id = 0;
  double label = 0.0;  // helpfulness in [0, 1], from response-quality feedback
};

inline constexpr std::size_t kHelpFeatureCount = 5;
using HelpFeatures = std::array<double, kHelpFeatureCount>;

// Feature layout: [cosine, example quality, response length, request length,
// cosine x quality]. Lengths are token counts squashed to [0, 1].
inline HelpFeatures help_features(std::span<const float> request_emb,
                                  std::size_t request_tokens, const Example& e,
                                  double len_norm_tokens) {
  const double c = dot(request_emb, e.embedding);
  const double q = e.quality;
  const double resp_len =
      std::min(1.0, static_cast<double>(token_count(e.response_text)) / len_norm_tokens);
  const double req_len = std::min(1.0, static_cast<double>(request_tokens) / len_norm_tokens);
  return {c, q, resp_len, req_len, c * q};
}

struct HelpfulnessModel {
  std::array<double, kHelpFeatureCount> w{};
  double b = 0.0;
  bool trained = false;

  double linear(const HelpFeatures& f) const {
    double z = b;
    for (std::size_t i = 0; i < kHelpFeatureCount; ++i) z += w[i] * f[i];
    return z;
  }

  // Monotone in the linear score; untrained weights give 0.5 everywhere.
  double score(const HelpFeatures& f) const { return logistic(linear(f)); }
};

struct HelpTrainingRow {
  HelpFeatures features{};
  double label = 0.0;
};

struct HelpTrainResult {
  HelpfulnessModel model;
  std::vector<double> epoch_loss;  // loss at the start of each epoch
};

// Full-batch gradient descent on cross-entropy with L2 on the weights.
// Deterministic and order-invariant; the learning rate sits well under the
// curvature bound for these bounded features, so epoch loss never increases.
inline HelpTrainResult train_helpfulness(const std::vector<HelpTrainingRow>& rows,
                                         const RetrieverConfig& cfg = {}) {
  if (rows.size() < 100)
    throw std::invalid_argument("helpfulness training needs at least 100 records");
  const double n = static_cast<double>(rows.size());
  HelpTrainResult out;
  auto& m = out.model;
  out.epoch_loss.reserve(cfg.train_epochs);

  for (std::size_t epoch = 0; epoch < cfg.train_epochs; ++epoch) {
    std::array<double, kHelpFeatureCount> grad{};
    double grad_b = 0.0;
    double loss = 0.0;
    for (const auto& r : rows) {
      const double p = m.score(r.features);
      const double err = p - r.label;
      for (std::size_t i = 0; i < kHelpFeatureCount; ++i) grad[i] += err * r.features[i];
      grad_b += err;
      constexpr double kEps = 1e-12;  // clamps log() away from -inf
      loss -= r.label * std::log(std::max(p, kEps)) +
              (1.0 - r.label) * std::log(std::max(1.0 - p, kEps));
    }
    double w2 = 0.0;
    for (std::size_t i = 0; i < kHelpFeatureCount; ++i) w2 += m.w[i] * m.w[i];
    out.epoch_loss.push_back(loss / n + 0.5 * cfg.train_l2 * w2);

    for (std::size_t i = 0; i < kHelpFeatureCount; ++i)
      m.w[i] -= cfg.train_lr * (grad[i] / n + cfg.train_l2 * m.w[i]);
    m.b -= cfg.train_lr * grad_b / n;
  }
  m.trained = true;
  return out;
}

}  // namespace echolm
