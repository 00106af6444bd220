#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"

namespace echolm {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input to one generation call. Token counts are split by KV residency:
// cached example tokens skip prefill entirely.
struct GenerationRequest {
  std::string prompt;
  std::size_t request_tokens = 0;
  std::size_t example_tokens_plain = 0;
  std::size_t example_tokens_cached = 0;
  double example_utility = 0.0;  // summed helpfulness of prepended examples
  std::size_t max_output_tokens = 256;
};

struct GenerationResult {
  std::string text;
  double quality = 0.0;  // noise can stray past [0,1]; clamp before storing
  double ttft_ms = 0.0;
  double total_ms = 0.0;
  std::size_t output_tokens = 0;
};

// Proto-example produced by expansion replay: a paraphrase of an existing
// request plus a fresh response.
struct Variation {
  std::string request_text;
  std::string response_text;
  std::vector<float> embedding;
  double quality = 0.0;
};

class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;

  const BackendSpec& spec() const { return spec_; }
  bool available() const { return available_; }
  void set_available(bool a) { available_ = a; }

  virtual GenerationResult generate(const GenerationRequest& req) = 0;
  virtual Variation variation(const Example& source) {
    (void)source;
    throw BackendError(spec_.name + ": variation unsupported");
  }

 protected:
  BackendSpec spec_;
  bool available_ = true;
};

// Closed-form latency plus a parametric quality draw. TTFT is exactly linear
// in non-cached input tokens; decode time is linear in sampled output length.
class SyntheticBackend : public Backend {
 public:
  SyntheticBackend(BackendSpec spec, std::uint64_t seed)
      : Backend(std::move(spec)), rng_(derive_seed(seed, spec_.name)) {}

  GenerationResult generate(const GenerationRequest& req) override {
    if (!available_) throw BackendError(spec_.name + ": backend unavailable");
    GenerationResult res;
    const auto non_cached =
        static_cast<double>(req.request_tokens + req.example_tokens_plain);
    res.ttft_ms = spec_.prefill_ms_per_token * non_cached;
    res.output_tokens = sample_output_tokens(req.max_output_tokens);
    res.total_ms = res.ttft_ms +
                   spec_.decode_ms_per_token * static_cast<double>(res.output_tokens);
    double q = clamp01(spec_.base_quality_mean +
                       spec_.example_utility_coeff * std::max(0.0, req.example_utility));
    if (spec_.base_quality_sigma > 0.0) q += rng_.next_gaussian() * spec_.base_quality_sigma;
    res.quality = q;
    res.text = synth_text(res.output_tokens);
    return res;
  }

  // Companion with request embedding at a cosine inside (0.8, 0.95) to the
  // source, a fresh response, and a base-model quality draw.
  Variation variation(const Example& source) override {
    if (!available_) throw BackendError(spec_.name + ": backend unavailable");
    if (source.embedding.empty()) throw BackendError("variation source has no embedding");
    Variation var;
    var.embedding = perturbed_embedding(source.embedding, rng_.uniform(0.81, 0.94));
    char tag[24];
    std::snprintf(tag, sizeof tag, "%016llx",
                  static_cast<unsigned long long>(rng_.next_u64()));
    var.request_text = source.request_text + " variant " + tag;
    const std::size_t n = sample_output_tokens(256);
    var.response_text = synth_text(n);
    double q = clamp01(spec_.base_quality_mean);
    if (spec_.base_quality_sigma > 0.0) q += rng_.next_gaussian() * spec_.base_quality_sigma;
    var.quality = clamp01(q);
    return var;
  }

 private:
  std::size_t sample_output_tokens(std::size_t cap) {
    const double raw =
        spec_.mean_output_tokens + rng_.next_gaussian() * spec_.output_tokens_sigma;
    const auto n = static_cast<long long>(std::llround(raw));
    const long long hi = cap == 0 ? 1 : static_cast<long long>(cap);
    return static_cast<std::size_t>(std::clamp(n, 1ll, hi));
  }

  std::string synth_text(std::size_t n_tokens) {
    static constexpr std::array<const char*, 16> kVocab = {
        "the",    "model", "returns", "a",      "result", "with",  "tokens", "drawn",
        "from",   "its",   "output",  "stream", "under",  "fixed", "seeded", "noise"};
    std::string out;
    out.reserve(n_tokens * 7);
    for (std::size_t i = 0; i < n_tokens; ++i) {
      if (i) out.push_back(' ');
      out += kVocab[rng_.next_index(kVocab.size())];
    }
    return out;
  }

  std::vector<float> perturbed_embedding(const std::vector<float>& u, double target_cos) {
    const std::size_t dim = u.size();
    std::vector<double> w(dim);
    while (true) {
      for (auto& x : w) x = rng_.next_gaussian();
      double proj = 0.0;
      for (std::size_t i = 0; i < dim; ++i) proj += w[i] * u[i];
      double nrm2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        w[i] -= proj * u[i];
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
      v[i] = static_cast<float>(target_cos * u[i] + s * w[i]);
    normalize(v);
    return v;
  }

  Rng rng_;
};

}  // namespace echolm
