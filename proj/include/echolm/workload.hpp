#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"

namespace echolm {

struct WorkloadRequest {
  std::string id;
  std::string text;
  std::vector<float> embedding;
  double arrival_s = 0.0;
  std::size_t topic = 0;
  // 0 for requests from hard topics: prepended examples carry no utility.
  double utility_scale = 1.0;
};

struct TopicModel {
  std::vector<std::vector<float>> centers;  // unit vectors
  std::vector<bool> hard;
};

struct Workload {
  TopicModel topics;
  std::vector<WorkloadRequest> requests;  // arrival-ordered
};

// Homogeneous Poisson process: exponential inter-arrival gaps.
inline std::vector<double> poisson_arrivals(Rng& rng, double rate_per_s, double duration_s) {
  if (rate_per_s <= 0.0) throw std::invalid_argument("arrival rate must be > 0");
  std::vector<double> times;
  double t = rng.next_exponential(rate_per_s);
  while (t < duration_s) {
    times.push_back(t);
    t += rng.next_exponential(rate_per_s);
  }
  return times;
}

// Periodic two-level rate profile sampled by thinning: the first
// peak_fraction of every period runs at base_rate * multiplier.
inline std::vector<double> bursty_arrivals(Rng& rng, double base_rate, double multiplier,
                                           double period_s, double peak_fraction,
                                           double duration_s) {
  if (base_rate <= 0.0) throw std::invalid_argument("arrival rate must be > 0");
  if (multiplier < 1.0) throw std::invalid_argument("peak multiplier must be >= 1");
  if (period_s <= 0.0 || peak_fraction <= 0.0 || peak_fraction >= 1.0)
    throw std::invalid_argument("bad bursty profile");
  const double peak_rate = base_rate * multiplier;
  std::vector<double> times;
  double t = 0.0;
  while (true) {
    t += rng.next_exponential(peak_rate);
    if (t >= duration_s) break;
    const double phase = std::fmod(t, period_s);
    const double rate_now = phase < peak_fraction * period_s ? peak_rate : base_rate;
    if (rng.next_double() < rate_now / peak_rate) times.push_back(t);
  }
  return times;
}

namespace detail {

// Discrete Zipf over ranks 1..n with exponent s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) {
    if (n == 0) throw std::invalid_argument("zipf over zero items");
    cum_.reserve(n);
    double total = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i), s);
      cum_.push_back(total);
    }
    for (auto& c : cum_) c /= total;
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.next_double();
    const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
    return it == cum_.end() ? cum_.size() - 1
                            : static_cast<std::size_t>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
};

// Unit vector at an exact cosine to a unit center.
inline std::vector<float> unit_at_cosine(Rng& rng, const std::vector<float>& center,
                                         double target_cos) {
  if (target_cos >= 1.0 - 1e-12) return center;
  const std::size_t dim = center.size();
  std::vector<double> w(dim);
  while (true) {
    for (auto& x : w) x = rng.next_gaussian();
    double proj = 0.0;
    for (std::size_t i = 0; i < dim; ++i) proj += w[i] * center[i];
    double nrm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      w[i] -= proj * center[i];
      nrm2 += w[i] * w[i];
    }
    if (nrm2 > 1e-12) {
      const double inv = 1.0 / std::sqrt(nrm2);
      for (auto& x : w) x *= inv;
      break;
    }
  }
  const double s = std::sqrt(std::max(0.0, 1.0 - target_cos * target_cos));
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < dim; ++i)
    v[i] = static_cast<float>(target_cos * center[i] + s * w[i]);
  normalize(v);
  return v;
}

inline std::string hex_tag(Rng& rng) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%012llx",
                static_cast<unsigned long long>(rng.next_u64() & 0xffffffffffffull));
  return buf;
}

}  // namespace detail

// Deterministic topic-clustered request stream with Zipf topic popularity,
// paraphrase embeddings inside the configured cosine band, verbatim repeats,
// and Poisson or bursty arrival times. Everything derives from sim.seed.
class WorkloadGenerator {
 public:
  WorkloadGenerator(SimConfig cfg, std::size_t embedding_dim)
      : cfg_(cfg), dim_(embedding_dim), zipf_(cfg.n_topics, cfg.topic_zipf_s) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.seed, "topics"));
    topics_.centers.reserve(cfg_.n_topics);
    topics_.hard.reserve(cfg_.n_topics);
    const auto n_hard = static_cast<std::size_t>(
        std::llround(cfg_.hard_topic_fraction * static_cast<double>(cfg_.n_topics)));
    for (std::size_t t = 0; t < cfg_.n_topics; ++t) {
      std::vector<float> c(dim_);
      for (auto& x : c) x = static_cast<float>(rng.next_gaussian());
      normalize(c);
      topics_.centers.push_back(std::move(c));
      // Spread hard topics across the popularity ranks deterministically.
      topics_.hard.push_back(n_hard > 0 &&
                             fnv1a64(std::to_string(t)) % cfg_.n_topics < n_hard);
    }
  }

  const TopicModel& topics() const { return topics_; }

  Workload generate() const {
    Workload w;
    w.topics = topics_;
    Rng arr_rng(derive_seed(cfg_.seed, "arrivals"));
    const auto times =
        cfg_.arrival == ArrivalKind::Poisson
            ? poisson_arrivals(arr_rng, cfg_.rate_per_s, cfg_.duration_s)
            : bursty_arrivals(arr_rng, cfg_.rate_per_s, cfg_.peak_multiplier, cfg_.period_s,
                              cfg_.peak_fraction, cfg_.duration_s);
    Rng rng(derive_seed(cfg_.seed, "requests"));
    w.requests.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      WorkloadRequest r;
      if (!w.requests.empty() && rng.next_double() < cfg_.repeat_fraction) {
        const auto& src = w.requests[rng.next_index(w.requests.size())];
        r = src;
      } else {
        r.topic = zipf_.sample(rng);
        r.utility_scale = topics_.hard[r.topic] ? 0.0 : 1.0;
        const double target = rng.uniform(cfg_.band_low, cfg_.band_high);
        r.embedding = detail::unit_at_cosine(rng, topics_.centers[r.topic], target);
        r.text = make_text(rng, r.topic, target >= 1.0 - 1e-12);
      }
      r.id = "r" + std::to_string(i);
      r.arrival_s = times[i];
      w.requests.push_back(std::move(r));
    }
    return w;
  }

  // Pre-run cache contents drawn from the same topic structure. Quality is a
  // large-model draw; gain starts at cost * (1 - quality) with cost 1.
  std::vector<Example> preload(std::size_t n) const {
    Rng rng(derive_seed(cfg_.seed, "preload"));
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Example e;
      const std::size_t topic = zipf_.sample(rng);
      const double target = rng.uniform(cfg_.band_low, cfg_.band_high);
      e.embedding = detail::unit_at_cosine(rng, topics_.centers[topic], target);
      e.request_text = make_text(rng, topic, target >= 1.0 - 1e-12);
      e.response_text = make_response(rng);
      e.quality = clamp01(0.75 + 0.08 * rng.next_gaussian());
      e.freq = rng.uniform(0.0, 3.0);
      e.gain = 1.0 - e.quality;
      e.cacheable = true;
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  std::string make_text(Rng& rng, std::size_t topic, bool verbatim) const {
    std::string text = "topic" + std::to_string(topic) + " question";
    if (verbatim) return text;
    const std::size_t len =
        cfg_.min_request_tokens +
        rng.next_index(cfg_.max_request_tokens - cfg_.min_request_tokens + 1);
    static constexpr const char* kFill[12] = {"about", "using", "when",  "should", "convert",
                                              "batch", "error", "setup", "filter", "update",
                                              "cached", "remote"};
    while (token_count(text) + 1 < len) text += std::string(" ") + kFill[rng.next_index(12)];
    text += " v" + detail::hex_tag(rng);
    return text;
  }

  std::string make_response(Rng& rng) const {
    static constexpr const char* kWords[8] = {"use",    "the",   "given", "steps",
                                              "result", "shown", "below", "carefully"};
    const std::size_t len = 8 + rng.next_index(25);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) text.push_back(' ');
      text += kWords[rng.next_index(8)];
    }
    return text;
  }

  SimConfig cfg_;
  std::size_t dim_;
  detail::ZipfSampler zipf_;
  TopicModel topics_;
};

}  // namespace echolm
