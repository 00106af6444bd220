#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "echolm/cluster_index.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace echolm;

namespace {

ClusterIndex build_corpus_index(const testutil::ClusteredCorpus& c, std::size_t dim,
                                RetrieverConfig cfg = {}, std::uint64_t seed = 1) {
  return ClusterIndex::build(c.ids, c.data, dim, cfg, seed);
}

}  // namespace

TEST_CASE("cluster count follows round of sqrt n") {
  CHECK(choose_k(0) == 0);
  CHECK(choose_k(1) == 1);
  CHECK(choose_k(2) == 1);
  CHECK(choose_k(10) == 3);
  CHECK(choose_k(100) == 10);
  CHECK(choose_k(10000) == 100);
  CHECK(choose_k(1000000) == 1000);
}

TEST_CASE("single example index has one centroid equal to the embedding") {
  Rng rng(3);
  const auto v = testutil::random_unit(rng, 16);
  auto ix = ClusterIndex::build({7}, v, 16, RetrieverConfig{}, 1);
  CHECK(ix.k() == 1);
  CHECK(ix.size() == 1);
  const auto c = ix.centroid(0);
  for (std::size_t i = 0; i < 16; ++i)
    CHECK_THAT(c[i], Catch::Matchers::WithinAbs(v[i], 1e-6));
  CHECK(ix.assignment(7).value() == 0);
}

TEST_CASE("built index partitions every example into its nearest centroid") {
  const auto corpus = testutil::make_clustered_corpus(100, 16, 10, 0.9, 0.99, 11);
  auto ix = build_corpus_index(corpus, 16);
  CHECK(ix.k() == 10);

  std::size_t members_total = 0;
  for (std::size_t c = 0; c < ix.k(); ++c) members_total += ix.cluster_members(c).size();
  CHECK(members_total == 100);

  // Exhaustive check: the recorded assignment is the argmax-cosine centroid.
  for (std::size_t i = 0; i < corpus.ids.size(); ++i) {
    const std::span<const float> v{corpus.data.data() + i * 16, 16};
    double best = -2.0;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < ix.k(); ++c) {
      const double s = dot(v, ix.centroid(c));
      if (s > best) {
        best = s;
        best_c = c;
      }
    }
    CHECK(ix.assignment(corpus.ids[i]).value() == best_c);
  }
}

TEST_CASE("converged centroids equal the renormalized member means") {
  const auto corpus = testutil::make_clustered_corpus(200, 16, 4, 0.95, 0.995, 5);
  auto ix = build_corpus_index(corpus, 16);
  REQUIRE(ix.stats().converged);
  for (std::size_t c = 0; c < ix.k(); ++c) {
    const auto& members = ix.cluster_members(c);
    REQUIRE_FALSE(members.empty());
    std::vector<double> mean(16, 0.0);
    for (const auto rowi : members) {
      const auto r = ix.row(rowi);
      for (std::size_t j = 0; j < 16; ++j) mean[j] += r[j];
    }
    double nrm = 0.0;
    for (double x : mean) nrm += x * x;
    nrm = std::sqrt(nrm);
    const auto cent = ix.centroid(c);
    for (std::size_t j = 0; j < 16; ++j)
      CHECK_THAT(cent[j], Catch::Matchers::WithinAbs(mean[j] / nrm, 1e-4));
  }
}

TEST_CASE("preselect ranks hand-computed cosines in order") {
  // Query along axis 0; stored points at cosine 0.9, 0.5, 0.1.
  const std::size_t dim = 4;
  std::vector<ExampleId> ids{1, 2, 3};
  std::vector<float> data;
  const double cs[3] = {0.5, 0.9, 0.1};  // deliberately unsorted by id
  for (int i = 0; i < 3; ++i) {
    std::vector<float> v(dim, 0.0f);
    v[0] = static_cast<float>(cs[i]);
    v[1 + i] = static_cast<float>(std::sqrt(1.0 - cs[i] * cs[i]));
    data.insert(data.end(), v.begin(), v.end());
  }
  auto ix = ClusterIndex::build(ids, data, dim, RetrieverConfig{}, 1);
  std::vector<float> q(dim, 0.0f);
  q[0] = 1.0f;
  const auto got = ix.preselect(q, ix.k(), 3);  // probe everything
  REQUIRE(got.size() == 3);
  CHECK(got[0].id == 2);
  CHECK_THAT(got[0].cosine, Catch::Matchers::WithinAbs(0.9, 1e-6));
  CHECK(got[1].id == 1);
  CHECK_THAT(got[1].cosine, Catch::Matchers::WithinAbs(0.5, 1e-6));
  CHECK(got[2].id == 3);
  CHECK_THAT(got[2].cosine, Catch::Matchers::WithinAbs(0.1, 1e-6));
}

TEST_CASE("a stored request embedding preselects itself first at cosine one") {
  const auto corpus = testutil::make_clustered_corpus(50, 16, 5, 0.9, 0.99, 21);
  auto ix = build_corpus_index(corpus, 16);
  const std::span<const float> q{corpus.data.data() + 12 * 16, 16};
  const auto got = ix.preselect(q, 3, 5);
  REQUIRE_FALSE(got.empty());
  CHECK(got[0].id == corpus.ids[12]);
  CHECK_THAT(got[0].cosine, Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("preselect ties break to the smaller id") {
  Rng rng(9);
  const auto v = testutil::random_unit(rng, 8);
  std::vector<float> data;
  data.insert(data.end(), v.begin(), v.end());
  data.insert(data.end(), v.begin(), v.end());
  auto ix = ClusterIndex::build({2, 5}, data, 8, RetrieverConfig{}, 1);
  const auto got = ix.preselect(v, ix.k(), 2);
  REQUIRE(got.size() == 2);
  CHECK(got[0].id == 2);
  CHECK(got[1].id == 5);
}

TEST_CASE("empty index preselects nothing") {
  ClusterIndex ix;
  std::vector<float> q(8, 0.0f);
  q[0] = 1.0f;
  CHECK(ix.preselect(q, 3, 10).empty());
  CHECK(ix.k() == 0);
  CHECK(ix.size() == 0);
}

TEST_CASE("preselect returns at most n_pre and at most the corpus") {
  const auto corpus = testutil::make_clustered_corpus(30, 8, 3, 0.9, 0.99, 2);
  auto ix = build_corpus_index(corpus, 8);
  const std::span<const float> q{corpus.data.data(), 8};
  CHECK(ix.preselect(q, ix.k(), 4).size() == 4);
  CHECK(ix.preselect(q, ix.k(), 100).size() == 30);
}

TEST_CASE("appends between rebuilds join the nearest centroid") {
  const auto corpus = testutil::make_clustered_corpus(60, 16, 6, 0.92, 0.99, 31);
  auto ix = build_corpus_index(corpus, 16);
  const std::size_t before = ix.size();

  // A new point near topic 2's center must land in the same cluster as the
  // bulk of topic 2 and become retrievable.
  Rng rng(77);
  const auto v = testutil::at_cosine(rng, corpus.centers[2], 0.97);
  ix.add(999, v);
  CHECK(ix.size() == before + 1);
  const auto got = ix.preselect(v, 3, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == 999);
  CHECK(ix.assignment(999).has_value());

  std::vector<float> bad(8, 0.0f);
  CHECK_THROWS_AS(ix.add(1000, bad), std::invalid_argument);
}

TEST_CASE("index recall against the exhaustive oracle on clustered data") {
  const std::size_t dim = 32;
  const auto corpus = testutil::make_clustered_corpus(2000, dim, 45, 0.9, 0.995, 101);
  auto ix = build_corpus_index(corpus, dim);
  CHECK(ix.k() == 45);  // round(sqrt(2000)) = 45

  Rng rng(555);
  std::size_t hits = 0;
  const std::size_t n_queries = 200;
  for (std::size_t i = 0; i < n_queries; ++i) {
    const std::size_t t = rng.next_index(45);
    const auto q = testutil::at_cosine(rng, corpus.centers[t], rng.uniform(0.9, 0.995));
    const auto got = ix.preselect(q, 3, 1);
    const auto want = oracle::exhaustive_top(corpus.ids, corpus.data, dim, q, 1);
    REQUIRE(got.size() == 1);
    REQUIRE(want.size() == 1);
    if (got[0].id == want[0]) ++hits;
  }
  CHECK(hits >= n_queries * 90 / 100);
}

TEST_CASE("subsampled training still indexes every row") {
  RetrieverConfig cfg;
  cfg.train_sample_cap = 300;
  const auto corpus = testutil::make_clustered_corpus(1000, 16, 20, 0.9, 0.99, 71);
  auto ix = ClusterIndex::build(corpus.ids, corpus.data, 16, cfg, 3);
  CHECK(ix.k() == 32);  // round(sqrt(1000))
  std::size_t members_total = 0;
  for (std::size_t c = 0; c < ix.k(); ++c) members_total += ix.cluster_members(c).size();
  CHECK(members_total == 1000);
  for (const auto id : corpus.ids) CHECK(ix.assignment(id).has_value());
}

TEST_CASE("same seed rebuilds identically") {
  const auto corpus = testutil::make_clustered_corpus(300, 16, 12, 0.9, 0.99, 13);
  auto a = build_corpus_index(corpus, 16, RetrieverConfig{}, 42);
  auto b = build_corpus_index(corpus, 16, RetrieverConfig{}, 42);
  REQUIRE(a.k() == b.k());
  for (std::size_t c = 0; c < a.k(); ++c) {
    const auto ca = a.centroid(c);
    const auto cb = b.centroid(c);
    for (std::size_t j = 0; j < 16; ++j) CHECK(ca[j] == cb[j]);
  }
  for (const auto id : corpus.ids) CHECK(a.assignment(id) == b.assignment(id));
}

TEST_CASE("build rejects a mismatched matrix shape") {
  std::vector<float> data(15, 0.1f);
  CHECK_THROWS_AS(ClusterIndex::build({1, 2}, data, 8, RetrieverConfig{}, 1),
                  std::invalid_argument);
}
