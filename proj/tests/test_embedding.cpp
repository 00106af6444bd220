#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "echolm/embedding.hpp"

using namespace echolm;

TEST_CASE("hashed embedder is deterministic and unit-norm") {
  HashedProjectionEmbedder emb(64);
  const auto a = emb.embed("what is the weather in paris");
  const auto b = emb.embed("what is the weather in paris");
  REQUIRE(a.size() == 64);
  CHECK(a == b);
  CHECK(is_unit_norm(a));
}

TEST_CASE("hashed embedder ignores punctuation and case") {
  HashedProjectionEmbedder emb(64);
  CHECK(emb.embed("Hello, World!") == emb.embed("hello world"));
}

TEST_CASE("hashed embedder separates unrelated texts") {
  HashedProjectionEmbedder emb(64);
  const auto a = emb.embed("database index tuning strategies");
  const auto b = emb.embed("marinara sauce simmering time");
  // Near-orthogonal for disjoint token sets: |cos| concentrated near 1/sqrt(d).
  CHECK(std::abs(cosine(a, b)) < 0.5);
}

TEST_CASE("hashed embedder pulls overlapping texts together") {
  HashedProjectionEmbedder emb(64);
  const auto a = emb.embed("tune the database index for reads");
  const auto b = emb.embed("tune the database index for writes");
  const auto c = emb.embed("completely unrelated cooking topic");
  CHECK(cosine(a, b) > cosine(a, c));
  CHECK(cosine(a, b) > 0.5);
}

TEST_CASE("hashed embedder rejects empty text") {
  HashedProjectionEmbedder emb(16);
  CHECK_THROWS_AS(emb.embed(""), std::invalid_argument);
  CHECK_THROWS_AS(emb.embed("   "), std::invalid_argument);
}

TEST_CASE("different seeds give different projections") {
  HashedProjectionEmbedder e1(64, 1), e2(64, 2);
  CHECK(e1.embed("same text") != e2.embed("same text"));
}

TEST_CASE("table embedder serves assigned vectors keyed on normalized text") {
  TableEmbedder emb(4);
  std::vector<float> v{1.0f, 0.0f, 0.0f, 0.0f};
  emb.assign("query  one", v);
  CHECK(emb.embed("query one") == v);
  CHECK(emb.embed("  query   one  ") == v);
  // Unknown text falls back to the hashed projection.
  const auto f = emb.embed("unknown text");
  REQUIRE(f.size() == 4);
  CHECK(is_unit_norm(f));
  CHECK_THROWS_AS(emb.assign("bad", std::vector<float>{1.0f}), std::invalid_argument);
}
