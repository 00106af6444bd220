#pragma once
// Text embedding for the retrieval pipeline. The serving deployment would
// plug an embedding-service client in here; the simulation uses the
// deterministic hashed-token random projection below, or a table lookup when
// the workload generator already fixed each request's vector.

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "echolm/common.hpp"

namespace echolm {

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Deterministic for identical input; result is unit-norm with `dim()` entries.
  virtual std::vector<float> embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

// Bag-of-tokens random projection: each token hashes to a fixed ±1 direction,
// occurrences are summed and the total renormalized. Unrelated texts land
// near-orthogonal (|cos| ~ 1/sqrt(d)); shared tokens pull vectors together.
class HashedProjectionEmbedder : public Embedder {
 public:
  explicit HashedProjectionEmbedder(std::size_t dim, std::uint64_t seed = 0x5eedf00dull)
      : dim_(dim), seed_(seed) {}

  std::vector<float> embed(std::string_view text) const override {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw std::invalid_argument("cannot embed empty text");
    std::vector<float> acc(dim_, 0.0f);
    for (const auto& tok : tokens) {
      Rng rng(derive_seed(seed_, tok));
      for (std::size_t i = 0; i < dim_; ++i)
        acc[i] += static_cast<float>(rng.next_sign());
    }
    normalize(acc);
    return acc;
  }

  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Serves pre-assigned vectors for known texts and falls back to hashing for
// everything else. Lookup is keyed on whitespace-normalized text so verbatim
// repeats resolve to the same vector.
class TableEmbedder : public Embedder {
 public:
  TableEmbedder(std::size_t dim, std::uint64_t seed = 0x5eedf00dull)
      : fallback_(dim, seed) {}

  void assign(std::string_view text, std::vector<float> embedding) {
    if (embedding.size() != fallback_.dim())
      throw std::invalid_argument("embedding dimension mismatch");
    table_[normalize_whitespace(text)] = std::move(embedding);
  }

  std::vector<float> embed(std::string_view text) const override {
    auto it = table_.find(normalize_whitespace(text));
    if (it != table_.end()) return it->second;
    return fallback_.embed(text);
  }

  std::size_t dim() const override { return fallback_.dim(); }

 private:
  HashedProjectionEmbedder fallback_;
  std::unordered_map<std::string, std::vector<float>> table_;
};

}  // namespace echolm
