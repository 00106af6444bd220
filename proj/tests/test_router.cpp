#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "echolm/router.hpp"
#include "helpers.hpp"

using namespace echolm;

namespace {

RoutingContext env_context(const testutil::BanditEnvRow& r) {
  RoutingContext ctx;
  ctx.request_emb = r.request_emb;
  ctx.example_summary = r.summary;
  ctx.max_helpfulness = r.max_h;
  ctx.mean_helpfulness = r.mean_h;
  ctx.n_examples = r.n_examples;
  ctx.load = r.load;
  ctx.request_len = r.request_len;
  return ctx;
}

std::vector<BootstrapRow> env_rows(LinearBandit& bandit, Rng& rng, std::size_t n,
                                   std::size_t emb_dim, bool flipped) {
  std::vector<BootstrapRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = testutil::sample_bandit_env(rng, emb_dim, flipped);
    rows.push_back({bandit.features(env_context(r)), r.reward_small, r.reward_large});
  }
  return rows;
}

double oracle_agreement(const LinearBandit& bandit, Rng& rng, std::size_t n,
                        std::size_t emb_dim, bool flipped) {
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = testutil::sample_bandit_env(rng, emb_dim, flipped);
    const auto ctx = env_context(r);
    const Action got = bandit.greedy(bandit.features(ctx), ctx.load);
    const Action want = r.small_optimal ? Action::Small : Action::Large;
    if (got == want) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

RetrievedExample retrieved(std::vector<float> emb, double help) {
  RetrievedExample r;
  r.example.embedding = std::move(emb);
  r.helpfulness = help;
  return r;
}

}  // namespace

TEST_CASE("build_context with no examples zeroes the example block") {
  std::vector<float> q{0.6f, 0.8f};
  const auto ctx = build_context(q, {}, 0.4, 100, RouterConfig{});
  CHECK(ctx.example_summary == std::vector<float>{0.0f, 0.0f});
  CHECK(ctx.max_helpfulness == 0.0);
  CHECK(ctx.mean_helpfulness == 0.0);
  CHECK(ctx.n_examples == 0);
  CHECK(ctx.load == 0.4);
  CHECK_THAT(ctx.request_len, Catch::Matchers::WithinAbs(100.0 / 512.0, 1e-12));
}

TEST_CASE("build_context with one example copies its embedding as the summary") {
  std::vector<float> q{1.0f, 0.0f};
  const auto ctx = build_context(q, {retrieved({0.0f, 1.0f}, 0.7)}, 0.0, 10, RouterConfig{});
  CHECK(ctx.example_summary == std::vector<float>{0.0f, 1.0f});
  CHECK(ctx.max_helpfulness == 0.7);
  CHECK(ctx.mean_helpfulness == 0.7);
  CHECK(ctx.n_examples == 1);
}

TEST_CASE("build_context aggregates helpfulness over three examples") {
  std::vector<float> q{1.0f, 0.0f};
  std::vector<RetrievedExample> ex{retrieved({1.0f, 0.0f}, 0.2), retrieved({0.0f, 1.0f}, 0.5),
                                   retrieved({1.0f, 0.0f}, 0.9)};
  const auto ctx = build_context(q, ex, 0.0, 10, RouterConfig{});
  CHECK(ctx.max_helpfulness == 0.9);
  CHECK_THAT(ctx.mean_helpfulness, Catch::Matchers::WithinAbs(1.6 / 3.0, 1e-12));
  CHECK(ctx.n_examples == 3);
  // Mean pooling of the three embeddings.
  CHECK_THAT(ctx.example_summary[0], Catch::Matchers::WithinAbs(2.0f / 3.0f, 1e-6));
  CHECK_THAT(ctx.example_summary[1], Catch::Matchers::WithinAbs(1.0f / 3.0f, 1e-6));
}

TEST_CASE("build_context clamps load into the unit interval") {
  std::vector<float> q{1.0f};
  CHECK(build_context(q, {}, 1.7, 10, RouterConfig{}).load == 1.0);
  CHECK(build_context(q, {}, -0.3, 10, RouterConfig{}).load == 0.0);
}

TEST_CASE("feature vector follows the documented layout") {
  LinearBandit bandit(RouterConfig{}, 4, 1);
  CHECK(bandit.feature_dim() == 2 * 4 + 6);
  CHECK(bandit.load_feature_index() == 2 * 4 + 3);

  RoutingContext ctx;
  ctx.request_emb = {0.5f, 0.5f, 0.5f, 0.5f};
  ctx.example_summary = {0.1f, 0.2f, 0.3f, 0.4f};
  ctx.max_helpfulness = 0.9;
  ctx.mean_helpfulness = 0.6;
  ctx.n_examples = 4;
  ctx.load = 0.35;
  ctx.request_len = 0.25;
  const auto f = bandit.features(ctx);
  REQUIRE(f.size() == 14);
  CHECK(f[0] == 0.5);
  CHECK_THAT(f[5], Catch::Matchers::WithinAbs(0.2, 1e-6));
  CHECK(f[8] == 0.9);
  CHECK(f[9] == 0.6);
  CHECK(f[10] == 0.5);  // 4 examples over the norm of 8
  CHECK(f[11] == 0.35);
  CHECK(f[12] == 0.25);
  CHECK(f[13] == 1.0);

  RoutingContext bad;
  bad.request_emb = {1.0f};
  CHECK_THROWS_AS(bandit.features(bad), std::invalid_argument);
}

TEST_CASE("reward matches the worked small-route example") {
  const auto r = compute_reward(Action::Small, 0.0, 0.0, 1.0, 4.0, RouterConfig{});
  CHECK_THAT(r.cost_saving, Catch::Matchers::WithinAbs(0.75, 1e-12));
  CHECK(r.quality_diff == 0.0);
  CHECK(r.penalty == 0.0);
  CHECK_THAT(r.value, Catch::Matchers::WithinAbs(0.375, 1e-12));
}

TEST_CASE("reward is symmetric for the large route at equal quality") {
  const auto r = compute_reward(Action::Large, 0.0, 0.0, 1.0, 4.0, RouterConfig{});
  CHECK_THAT(r.cost_saving, Catch::Matchers::WithinAbs(-0.75, 1e-12));
  CHECK_THAT(r.value, Catch::Matchers::WithinAbs(-0.375, 1e-12));
}

TEST_CASE("reward applies the quadratic hinge penalty past tau") {
  // Chosen three points worse on the seven-point scale.
  const auto r = compute_reward(Action::Small, -1.5, 1.5, 1.0, 4.0, RouterConfig{});
  CHECK(r.quality_diff == -3.0);
  CHECK_THAT(r.penalty, Catch::Matchers::WithinAbs(2.25, 1e-12));
  CHECK_THAT(r.value, Catch::Matchers::WithinAbs(-3.0 + 0.375 - 2.25, 1e-12));
  // Inside tau there is no penalty.
  const auto mild = compute_reward(Action::Small, 0.0, 1.0, 1.0, 4.0, RouterConfig{});
  CHECK(mild.penalty == 0.0);
}

TEST_CASE("reward rejects non-positive costs") {
  CHECK_THROWS_AS(compute_reward(Action::Small, 0, 0, 0.0, 4.0, RouterConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_reward(Action::Small, 0, 0, 1.0, -1.0, RouterConfig{}),
                  std::invalid_argument);
}

TEST_CASE("greedy picks the higher value and ties go large") {
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  LinearBandit bandit(cfg, 2, 1);
  std::vector<double> ws(bandit.feature_dim(), 0.0), wl(bandit.feature_dim(), 0.0);
  ws.back() = 0.8;  // constant heads via the bias feature
  wl.back() = 0.3;
  bandit.set_weights(Action::Small, ws);
  bandit.set_weights(Action::Large, wl);

  RoutingContext ctx;
  ctx.request_emb = {1.0f, 0.0f};
  ctx.example_summary = {0.0f, 0.0f};
  CHECK(bandit.route(ctx) == Action::Small);

  wl.back() = 0.8;  // exact tie
  bandit.set_weights(Action::Large, wl);
  CHECK(bandit.route(ctx) == Action::Large);
}

TEST_CASE("full exploration splits actions evenly") {
  RouterConfig cfg;
  cfg.epsilon = 1.0;
  LinearBandit bandit(cfg, 2, 99);
  RoutingContext ctx;
  ctx.request_emb = {1.0f, 0.0f};
  ctx.example_summary = {0.0f, 0.0f};
  std::size_t small = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i)
    if (bandit.route(ctx) == Action::Small) ++small;
  CHECK(small >= n * 48 / 100);
  CHECK(small <= n * 52 / 100);
}

TEST_CASE("load bias follows the hinge") {
  LinearBandit bandit(RouterConfig{}, 2, 1);
  CHECK(bandit.load_bias(0.5) == 0.0);
  CHECK(bandit.load_bias(0.7) == 0.0);
  CHECK_THAT(bandit.load_bias(1.0), Catch::Matchers::WithinAbs(0.15, 1e-12));
}

TEST_CASE("greedy decision is invariant under uniform positive weight scaling") {
  Rng rng(77);
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  const std::size_t d = 8;
  LinearBandit a(cfg, d, 1), b(cfg, d, 1);
  std::vector<double> ws(a.feature_dim()), wl(a.feature_dim());
  for (auto& x : ws) x = rng.next_gaussian();
  for (auto& x : wl) x = rng.next_gaussian();
  a.set_weights(Action::Small, ws);
  a.set_weights(Action::Large, wl);
  const double scale = 3.7;
  auto ws2 = ws, wl2 = wl;
  for (auto& x : ws2) x *= scale;
  for (auto& x : wl2) x *= scale;
  b.set_weights(Action::Small, ws2);
  b.set_weights(Action::Large, wl2);

  for (int i = 0; i < 200; ++i) {
    auto r = testutil::sample_bandit_env(rng, d, false);
    r.load = rng.uniform(0.0, 0.7);  // below threshold: no additive bias
    const auto ctx = env_context(r);
    CHECK(a.greedy(a.features(ctx), ctx.load) == b.greedy(b.features(ctx), ctx.load));
  }
}

TEST_CASE("replay buffer never exceeds capacity and evicts oldest first") {
  RouterConfig cfg;
  cfg.buffer_capacity = 5;
  cfg.batch = 1000;  // no updates during this test
  LinearBandit bandit(cfg, 2, 1);
  for (int i = 0; i < 12; ++i) {
    RouterFeedback fb;
    fb.features.assign(bandit.feature_dim(), 0.0);
    fb.features[0] = i;
    bandit.online_update(std::move(fb));
    CHECK(bandit.buffer_size() <= 5);
  }
  CHECK(bandit.buffer_size() == 5);
}

TEST_CASE("bootstrap requires five hundred rows") {
  LinearBandit bandit(RouterConfig{}, 4, 1);
  Rng rng(1);
  auto rows = env_rows(bandit, rng, 499, 4, false);
  CHECK_THROWS_AS(bandit.bootstrap(rows), std::invalid_argument);
}

TEST_CASE("bootstrap on a small-always-wins set routes everything small") {
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  LinearBandit bandit(cfg, 4, 1);
  Rng rng(3);
  std::vector<BootstrapRow> rows;
  for (int i = 0; i < 600; ++i) {
    const auto r = testutil::sample_bandit_env(rng, 4, false);
    rows.push_back({bandit.features(env_context(r)), 1.0, -1.0});
  }
  bandit.bootstrap(rows);
  std::size_t small = 0;
  for (int i = 0; i < 300; ++i) {
    const auto r = testutil::sample_bandit_env(rng, 4, false);
    const auto ctx = env_context(r);
    if (bandit.greedy(bandit.features(ctx), ctx.load) == Action::Small) ++small;
  }
  CHECK(small == 300);
}

TEST_CASE("bootstrap reaches high agreement with the threshold oracle") {
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  LinearBandit bandit(cfg, 8, 1);
  Rng rng(5);
  auto rows = env_rows(bandit, rng, 1000, 8, false);
  bandit.bootstrap(rows);
  Rng held(1234);
  CHECK(oracle_agreement(bandit, held, 300, 8, false) >= 0.9);
}

TEST_CASE("bootstrap on zero rewards leaves weights near zero") {
  LinearBandit bandit(RouterConfig{}, 4, 1);
  Rng rng(9);
  auto rows = env_rows(bandit, rng, 600, 4, false);
  for (auto& r : rows) r.reward_small = r.reward_large = 0.0;
  bandit.bootstrap(rows);
  for (const double w : bandit.weights(Action::Small)) CHECK(std::abs(w) < 1e-6);
  for (const double w : bandit.weights(Action::Large)) CHECK(std::abs(w) < 1e-6);
}

TEST_CASE("online updates run once per batch") {
  RouterConfig cfg;
  cfg.batch = 4;
  LinearBandit bandit(cfg, 2, 1);
  Rng rng(11);
  auto mk = [&]() {
    const auto r = testutil::sample_bandit_env(rng, 2, false);
    RouterFeedback fb;
    fb.features = bandit.features(env_context(r));
    fb.action = Action::Small;
    fb.reward = r.reward_small;
    return fb;
  };
  const auto w_before = bandit.weights(Action::Small);
  bandit.online_update(mk());
  bandit.online_update(mk());
  bandit.online_update(mk());
  CHECK(bandit.update_count() == 0);
  CHECK(bandit.weights(Action::Small) == w_before);
  bandit.online_update(mk());
  CHECK(bandit.update_count() == 1);
  CHECK(bandit.weights(Action::Small) != w_before);
}

TEST_CASE("identical seeds and feedback give identical models") {
  RouterConfig cfg;
  cfg.batch = 8;
  LinearBandit a(cfg, 4, 21), b(cfg, 4, 21);
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto r = testutil::sample_bandit_env(rng, 4, false);
    RouterFeedback fb;
    fb.features = a.features(env_context(r));
    fb.action = (i % 3 == 0) ? Action::Large : Action::Small;
    fb.reward = fb.action == Action::Small ? r.reward_small : r.reward_large;
    auto fb2 = fb;
    a.online_update(std::move(fb));
    b.online_update(std::move(fb2));
  }
  CHECK(a.weights(Action::Small) == b.weights(Action::Small));
  CHECK(a.weights(Action::Large) == b.weights(Action::Large));
  CHECK(a.update_count() == b.update_count());
}

TEST_CASE("routing small never becomes less likely as load rises") {
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  LinearBandit bandit(cfg, 8, 1);
  Rng rng(41);
  auto rows = env_rows(bandit, rng, 1000, 8, false);
  bandit.bootstrap(rows);

  // Contexts near the decision boundary; sweep load upward and require the
  // per-load count of Small routings to be non-decreasing.
  std::vector<RoutingContext> ctxs;
  for (int i = 0; i < 60; ++i) {
    auto r = testutil::sample_bandit_env(rng, 8, false);
    r.max_h = rng.uniform(0.5, 0.7);
    ctxs.push_back(env_context(r));
  }
  std::size_t prev = 0;
  bool first = true;
  for (double load = 0.0; load <= 1.0 + 1e-9; load += 0.05) {
    std::size_t small = 0;
    for (auto ctx : ctxs) {
      ctx.load = load;
      if (bandit.greedy(bandit.features(ctx), ctx.load) == Action::Small) ++small;
    }
    if (!first) CHECK(small >= prev);
    prev = small;
    first = false;
  }
}

TEST_CASE("shifting the small bias moves decisions toward small") {
  RouterConfig cfg;
  cfg.epsilon = 0.0;
  LinearBandit bandit(cfg, 4, 1);
  Rng rng(51);
  auto rows = env_rows(bandit, rng, 800, 4, false);
  bandit.bootstrap(rows);
  Rng held(61);
  std::vector<RoutingContext> ctxs;
  for (int i = 0; i < 200; ++i) ctxs.push_back(env_context(testutil::sample_bandit_env(held, 4, false)));
  auto count_small = [&]() {
    std::size_t n = 0;
    for (const auto& ctx : ctxs)
      if (bandit.greedy(bandit.features(ctx), ctx.load) == Action::Small) ++n;
    return n;
  };
  const auto base = count_small();
  bandit.shift_small_bias(0.5);
  CHECK(count_small() >= base);
  bandit.shift_small_bias(-2.0);
  CHECK(count_small() <= base);
}
