#pragma once
// Shared primitives: deterministic RNG streams, vector math on unit
// embeddings, tokenization, and percentile helpers used across modules.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace echolm {

using ExampleId = std::uint64_t;

// ---------------------------------------------------------------------------
// Hashing / seeding

// FNV-1a 64-bit. std::hash is not pinned across platforms; this is.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a root seed and a stream label.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t s = root ^ fnv1a64(stream);
  return splitmix64(s);
}

// Deterministic RNG with pinned double/gaussian generation. The raw engine
// sequence is standard-mandated; the distributions here avoid the
// implementation-defined std::*_distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n).
  std::uint64_t next_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_index over empty range");
    // Rejection sampling over the top range keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller on pinned uniforms.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  // +1 or -1 from a single engine bit.
  double next_sign() { return (engine_() & 1u) ? 1.0 : -1.0; }

  // Exponential with the given rate.
  double next_exponential(double rate) {
    double u = next_double();
    while (u <= 0.0) u = next_double();
    return -std::log(u) / rate;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Vector math (embeddings are unit-norm float vectors)

inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

inline double norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

inline void normalize(std::vector<float>& v) {
  const double n = norm(v);
  if (n <= 0.0) throw std::invalid_argument("cannot normalize zero vector");
  const double inv = 1.0 / n;
  for (float& x : v) x = static_cast<float>(x * inv);
}

// Cosine similarity; inputs are expected unit-norm so this is a plain dot.
inline double cosine(std::span<const float> a, std::span<const float> b) {
  return dot(a, b);
}

inline bool is_unit_norm(std::span<const float> v, double tol = 1e-6) {
  return std::abs(norm(v) - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Text helpers

// Trims outer whitespace and collapses internal runs to single spaces.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_run = false;
  for (char c : text) {
    const bool ws = (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v');
    if (ws) {
      in_run = true;
    } else {
      if (in_run && !out.empty()) out.push_back(' ');
      in_run = false;
      out.push_back(c);
    }
  }
  return out;
}

// Lowercased alphanumeric tokens; everything else separates.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Token count used by every latency/budget computation: whitespace-delimited
// words. Kept trivial so closed-form latency checks stay exact.
inline std::size_t token_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool ws = (c == ' ' || c == '\t' || c == '\r' || c == '\n');
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Small numerics

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Nearest-rank percentile (p in [0, 100]) over an unsorted copy.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(values.begin(), values.end());
  if (p <= 0.0) return values.front();
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::min(rank, values.size()) - 1];
}

}  // namespace echolm
