#pragma once
// Synthetic data builders shared by the unit and acceptance suites.

#include <cstdint>
#include <string>
#include <vector>

#include "echolm/common.hpp"

namespace testutil {

inline std::vector<float> random_unit(echolm::Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.next_gaussian());
  echolm::normalize(v);
  return v;
}

// Unit vector at exactly the requested cosine to `center`, pointing in a
// random orthogonal direction otherwise.
inline std::vector<float> at_cosine(echolm::Rng& rng, const std::vector<float>& center,
                                    double cos_target) {
  const std::size_t dim = center.size();
  std::vector<float> u;
  // Rejection keeps the orthogonal component well-conditioned.
  for (;;) {
    u = random_unit(rng, dim);
    const double proj = echolm::dot(u, center);
    double nrm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      u[i] = static_cast<float>(u[i] - proj * center[i]);
      nrm2 += static_cast<double>(u[i]) * u[i];
    }
    if (nrm2 > 1e-12) {
      const double inv = 1.0 / std::sqrt(nrm2);
      for (auto& x : u) x = static_cast<float>(x * inv);
      break;
    }
  }
  const double s = std::sqrt(std::max(0.0, 1.0 - cos_target * cos_target));
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < dim; ++i)
    v[i] = static_cast<float>(cos_target * center[i] + s * u[i]);
  echolm::normalize(v);
  return v;
}

struct ClusteredCorpus {
  std::vector<echolm::ExampleId> ids;
  std::vector<float> data;  // row-major, ids.size() x dim
  std::vector<std::size_t> topic_of;
  std::vector<std::vector<float>> centers;
};

// Topic-structured corpus: points sit at cosine in [cos_lo, cos_hi] to their
// topic center, topics assigned round-robin.
inline ClusteredCorpus make_clustered_corpus(std::size_t n, std::size_t dim,
                                             std::size_t n_topics, double cos_lo,
                                             double cos_hi, std::uint64_t seed) {
  echolm::Rng rng(seed);
  ClusteredCorpus c;
  c.centers.reserve(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t) c.centers.push_back(random_unit(rng, dim));
  c.ids.reserve(n);
  c.data.reserve(n * dim);
  c.topic_of.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = i % n_topics;
    const auto v = at_cosine(rng, c.centers[t], rng.uniform(cos_lo, cos_hi));
    c.ids.push_back(static_cast<echolm::ExampleId>(i + 1));
    c.data.insert(c.data.end(), v.begin(), v.end());
    c.topic_of.push_back(t);
  }
  return c;
}

// Synthetic routing environment with a linear threshold oracle: the small
// model is optimal exactly when max_helpfulness exceeds 0.6 (reversed when
// flipped). Reward for Small is linear in that feature; Large earns zero.
struct BanditEnvRow {
  std::vector<float> request_emb;
  std::vector<float> summary;
  double max_h = 0.0;
  double mean_h = 0.0;
  std::size_t n_examples = 0;
  double load = 0.0;
  double request_len = 0.0;
  double reward_small = 0.0;
  double reward_large = 0.0;
  bool small_optimal = false;
};

inline BanditEnvRow sample_bandit_env(echolm::Rng& rng, std::size_t emb_dim, bool flipped) {
  BanditEnvRow r;
  r.request_emb = random_unit(rng, emb_dim);
  r.summary = random_unit(rng, emb_dim);
  r.max_h = rng.next_double();
  r.mean_h = r.max_h * rng.next_double();
  r.n_examples = rng.next_index(9);
  r.load = rng.uniform(0.0, 0.65);  // below the bias threshold
  r.request_len = rng.next_double();
  const double signal = flipped ? (0.6 - r.max_h) : (r.max_h - 0.6);
  r.reward_small = 2.0 * signal;
  r.reward_large = 0.0;
  r.small_optimal = r.reward_small > r.reward_large;
  return r;
}

// Short deterministic filler text with the requested word count.
inline std::string filler_words(std::size_t words, std::uint64_t tag) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s.push_back(' ');
    s += "w" + std::to_string((tag + i) % 97);
  }
  return s;
}

}  // namespace testutil
