#pragma once
// Epsilon-greedy contextual bandit that routes each (request, examples) pair
// to the small or large backend. Linear value head per action over a fixed
// feature layout; replay-buffer mini-batch updates online, least-squares
// bootstrap offline. An explicit load bias lifts the small model under
// pressure so the load response is monotone regardless of what the heads
// learned.

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/retriever.hpp"

namespace echolm {

enum class Action { Small, Large };

inline const char* to_string(Action a) { return a == Action::Small ? "Small" : "Large"; }

struct RoutingContext {
  std::vector<float> request_emb;
  std::vector<float> example_summary;  // mean of example embeddings, zero when none
  double max_helpfulness = 0.0;
  double mean_helpfulness = 0.0;
  std::size_t n_examples = 0;
  double load = 0.0;
  double request_len = 0.0;  // token count squashed to [0, 1]
};

inline RoutingContext build_context(std::span<const float> request_emb,
                                    const std::vector<RetrievedExample>& examples, double load,
                                    std::size_t request_tokens, const RouterConfig& cfg) {
  RoutingContext ctx;
  ctx.request_emb.assign(request_emb.begin(), request_emb.end());
  ctx.example_summary.assign(request_emb.size(), 0.0f);
  ctx.n_examples = examples.size();
  ctx.load = clamp01(load);
  ctx.request_len = std::min(1.0, static_cast<double>(request_tokens) / cfg.len_norm_tokens);
  if (!examples.empty()) {
    double max_h = 0.0, sum_h = 0.0;
    for (const auto& r : examples) {
      for (std::size_t i = 0; i < ctx.example_summary.size(); ++i)
        ctx.example_summary[i] += r.example.embedding[i];
      max_h = std::max(max_h, r.helpfulness);
      sum_h += r.helpfulness;
    }
    const float inv = 1.0f / static_cast<float>(examples.size());
    for (auto& x : ctx.example_summary) x *= inv;
    ctx.max_helpfulness = max_h;
    ctx.mean_helpfulness = sum_h / static_cast<double>(examples.size());
  }
  return ctx;
}

struct Reward {
  double value = 0.0;
  double cost_saving = 0.0;
  double quality_diff = 0.0;
  double penalty = 0.0;  // magnitude already weighted; value subtracts it
};

// Qualities arrive on the re-centered seven-point scale [-3, 3];
// quality_diff is chosen minus alternative. Cost saving is normalized by the
// large model's cost, and responses far worse than the alternative draw a
// quadratic hinge penalty.
inline Reward compute_reward(Action chosen, double small_quality, double large_quality,
                             double small_cost, double large_cost, const RouterConfig& cfg) {
  if (small_cost <= 0.0 || large_cost <= 0.0)
    throw std::invalid_argument("backend costs must be positive");
  Reward r;
  const double chosen_q = chosen == Action::Small ? small_quality : large_quality;
  const double alt_q = chosen == Action::Small ? large_quality : small_quality;
  const double chosen_c = chosen == Action::Small ? small_cost : large_cost;
  const double alt_c = chosen == Action::Small ? large_cost : small_cost;
  r.quality_diff = chosen_q - alt_q;
  r.cost_saving = (alt_c - chosen_c) / large_cost;
  const double excess = std::max(0.0, -r.quality_diff - cfg.tau);
  r.penalty = cfg.w_p * excess * excess;
  r.value = cfg.w_q * r.quality_diff + cfg.w_c * r.cost_saving - r.penalty;
  return r;
}

struct RouterFeedback {
  std::vector<double> features;
  Action action = Action::Small;
  double reward = 0.0;
};

struct BootstrapRow {
  std::vector<double> features;
  double reward_small = 0.0;
  double reward_large = 0.0;
};

class LinearBandit {
 public:
  LinearBandit(RouterConfig cfg, std::size_t emb_dim, std::uint64_t seed)
      : cfg_(cfg),
        emb_dim_(emb_dim),
        dim_(2 * emb_dim + 6),
        w_small_(dim_, 0.0),
        w_large_(dim_, 0.0),
        rng_(derive_seed(seed, "router")) {
    cfg_.validate();
  }

  std::size_t feature_dim() const { return dim_; }
  // Layout: [request_emb | example_summary | max_h | mean_h | n | load | len | 1].
  std::size_t load_feature_index() const { return 2 * emb_dim_ + 3; }

  std::vector<double> features(const RoutingContext& ctx) const {
    if (ctx.request_emb.size() != emb_dim_)
      throw std::invalid_argument("context embedding dimension mismatch");
    std::vector<double> f;
    f.reserve(dim_);
    for (float x : ctx.request_emb) f.push_back(x);
    for (float x : ctx.example_summary) f.push_back(x);
    f.push_back(ctx.max_helpfulness);
    f.push_back(ctx.mean_helpfulness);
    f.push_back(std::min(1.0, static_cast<double>(ctx.n_examples) / cfg_.n_examples_norm));
    f.push_back(ctx.load);
    f.push_back(ctx.request_len);
    f.push_back(1.0);
    return f;
  }

  double value(Action a, const std::vector<double>& f) const {
    const auto& w = a == Action::Small ? w_small_ : w_large_;
    double v = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) v += w[i] * f[i];
    return v;
  }

  // Additive lift for the small model once load crosses the threshold.
  double load_bias(double load) const {
    return cfg_.beta * std::max(0.0, load - cfg_.load_threshold);
  }

  // Greedy decision: ties fall to Large, the quality-safe default.
  Action greedy(const std::vector<double>& f, double load) const {
    const double vs = value(Action::Small, f) + load_bias(load);
    const double vl = value(Action::Large, f);
    return vs > vl ? Action::Small : Action::Large;
  }

  Action route(const RoutingContext& ctx) {
    if (rng_.next_double() < cfg_.epsilon)
      return rng_.next_index(2) == 0 ? Action::Small : Action::Large;
    return greedy(features(ctx), ctx.load);
  }

  // Supervised pre-training on rows with both actions' rewards known.
  // Full-batch least squares per head; deterministic and order-invariant.
  void bootstrap(const std::vector<BootstrapRow>& rows) {
    if (rows.size() < 500)
      throw std::invalid_argument("bootstrap needs at least 500 rows");
    const double n = static_cast<double>(rows.size());
    for (std::size_t epoch = 0; epoch < cfg_.bootstrap_epochs; ++epoch) {
      std::vector<double> gs(dim_, 0.0), gl(dim_, 0.0);
      for (const auto& row : rows) {
        const double es = value(Action::Small, row.features) - row.reward_small;
        const double el = value(Action::Large, row.features) - row.reward_large;
        for (std::size_t i = 0; i < dim_; ++i) {
          gs[i] += es * row.features[i];
          gl[i] += el * row.features[i];
        }
      }
      for (std::size_t i = 0; i < dim_; ++i) {
        w_small_[i] -= cfg_.bootstrap_lr * (gs[i] / n + cfg_.l2 * w_small_[i]);
        w_large_[i] -= cfg_.bootstrap_lr * (gl[i] / n + cfg_.l2 * w_large_[i]);
      }
      project_load_coefficients();
    }
  }

  // Appends to the replay buffer; every cfg.batch feedbacks, one mini-batch
  // gradient step on a uniform sample from the buffer.
  void online_update(RouterFeedback fb) {
    buffer_.push_back(std::move(fb));
    while (buffer_.size() > cfg_.buffer_capacity) buffer_.pop_front();
    if (++pending_ < cfg_.batch) return;
    pending_ = 0;

    std::vector<double> gs(dim_, 0.0), gl(dim_, 0.0);
    std::size_t ns = 0, nl = 0;
    for (std::size_t b = 0; b < cfg_.batch; ++b) {
      const auto& s = buffer_[rng_.next_index(buffer_.size())];
      const double err = value(s.action, s.features) - s.reward;
      auto& g = s.action == Action::Small ? gs : gl;
      auto& cnt = s.action == Action::Small ? ns : nl;
      for (std::size_t i = 0; i < dim_; ++i) g[i] += err * s.features[i];
      ++cnt;
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      if (ns > 0)
        w_small_[i] -=
            cfg_.online_lr * (gs[i] / static_cast<double>(ns) + cfg_.l2 * w_small_[i]);
      if (nl > 0)
        w_large_[i] -=
            cfg_.online_lr * (gl[i] / static_cast<double>(nl) + cfg_.l2 * w_large_[i]);
    }
    project_load_coefficients();
    ++update_count_;
  }

  std::size_t buffer_size() const { return buffer_.size(); }
  std::size_t update_count() const { return update_count_; }
  const std::vector<double>& weights(Action a) const {
    return a == Action::Small ? w_small_ : w_large_;
  }
  void set_weights(Action a, std::vector<double> w) {
    if (w.size() != dim_) throw std::invalid_argument("weight dimension mismatch");
    (a == Action::Small ? w_small_ : w_large_) = std::move(w);
  }
  // Constant offset on the small head, used by offload-rate calibration.
  void shift_small_bias(double delta) { w_small_[dim_ - 1] += delta; }
  const RouterConfig& config() const { return cfg_; }

 private:
  // The learned load response stays one-signed so rising load can only favor
  // the small model; the explicit bias provides the push past the threshold.
  void project_load_coefficients() {
    const std::size_t li = load_feature_index();
    w_small_[li] = std::max(0.0, w_small_[li]);
    w_large_[li] = std::min(0.0, w_large_[li]);
  }

  RouterConfig cfg_;
  std::size_t emb_dim_;
  std::size_t dim_;
  std::vector<double> w_small_, w_large_;
  std::deque<RouterFeedback> buffer_;
  std::size_t pending_ = 0;
  std::size_t update_count_ = 0;
  Rng rng_;
};

}  // namespace echolm
