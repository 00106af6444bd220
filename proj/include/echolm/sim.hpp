#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "echolm/backend.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"
#include "echolm/gateway.hpp"
#include "echolm/judge.hpp"
#include "echolm/metrics.hpp"
#include "echolm/workload.hpp"

namespace echolm {

struct RunResult {
  MetricsReport report;
  std::vector<RequestRecord> records;
};

// Drives the gateway over a timed request stream in virtual time. Load comes
// from still-inflight completion times, a sampled fraction of responses is
// judged against an independent large-model baseline, and the manager's
// replay plan runs on its configured cadence. Every random stream derives
// from the single root seed.
class Simulation {
 public:
  Simulation(Config cfg, std::string scenario, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        scenario_(std::move(scenario)),
        seed_(seed),
        mode_(GatewayMode::for_scenario(scenario_)) {
    cfg_.validate();
    cfg_.sim.seed = seed;  // workload and components share one root
  }

  RunResult run() {
    WorkloadGenerator gen(cfg_.sim, cfg_.store.embedding_dim);
    return run(gen.generate());
  }

  RunResult run(const Workload& workload) {
    build_components();
    seed_store();
    if (mode_.policy == GatewayMode::Policy::Learned && cfg_.sim.bootstrap_rows > 0)
      bootstrap_router(workload.topics);
    return drive(workload);
  }

  // Post-run component access for tests and tooling.
  const ExampleStore& store() const { return *store_; }
  LinearBandit& router() { return *router_; }
  Gateway& gateway() { return *gateway_; }
  ExampleManager& manager() { return *manager_; }
  Retriever& retriever() { return *retriever_; }
  const GatewayMode& mode() const { return mode_; }

 private:
  void build_components() {
    const std::size_t dim = cfg_.store.embedding_dim;
    store_ = std::make_shared<ExampleStore>(cfg_.store);
    embedder_ = std::make_shared<TableEmbedder>(dim, derive_seed(seed_, "embedder"));
    retriever_ =
        std::make_shared<Retriever>(cfg_.retriever, store_, embedder_, derive_seed(seed_, "retriever"));
    router_ = std::make_shared<LinearBandit>(cfg_.router, dim, derive_seed(seed_, "router"));
    manager_ = std::make_shared<ExampleManager>(cfg_.manager, cfg_.store, store_);
    small_ = std::make_shared<SyntheticBackend>(cfg_.gateway.small, derive_seed(seed_, "small-backend"));
    large_ = std::make_shared<SyntheticBackend>(cfg_.gateway.large, derive_seed(seed_, "large-backend"));
    gateway_ = std::make_unique<Gateway>(cfg_, mode_, store_, retriever_, router_, manager_, small_,
                                         large_, seed_);
    gateway_->set_online_updates(cfg_.sim.online_updates);
    judge_backend_ =
        std::make_unique<SyntheticBackend>(cfg_.gateway.large, derive_seed(seed_, "judge-baseline"));
    proxy_records_.clear();
    proxy_trained_on_ = 0;
  }

  void seed_store() {
    if (!cfg_.store_load_path.empty()) {
      auto loaded = load_store(cfg_.store_load_path, cfg_.store);
      for (auto& e : loaded.store.snapshot()) {
        embedder_->assign(e.request_text, e.embedding);
        store_->insert(std::move(e));
      }
    }
    const bool uses_cache = mode_.examples || mode_.exact_match;
    if (uses_cache && cfg_.sim.preload_examples > 0) {
      WorkloadGenerator gen(cfg_.sim, cfg_.store.embedding_dim);
      auto pre = gen.preload(cfg_.sim.preload_examples);
      std::vector<ExampleId> ids;
      std::vector<std::string> texts;
      ids.reserve(pre.size());
      texts.reserve(pre.size());
      for (auto& e : pre) {
        embedder_->assign(e.request_text, e.embedding);
        texts.push_back(e.request_text);
        if (const auto id = store_->insert(std::move(e))) ids.push_back(*id);
      }
      if (mode_.examples) bootstrap_proxy(ids, texts);
    }
    if (mode_.examples && store_->size() > 0) retriever_->rebuild(0.0);
  }

  // Warm-start the helpfulness proxy: an example answers its own request
  // (positive) while a random other example probably does not (negative).
  // The rows stay in the pool so later retrains keep their negatives.
  void bootstrap_proxy(const std::vector<ExampleId>& ids, const std::vector<std::string>& texts) {
    if (ids.size() < 8) return;
    Rng rng(derive_seed(seed_, "proxy-bootstrap"));
    const std::size_t n = std::min<std::size_t>(ids.size(), 500);
    for (std::size_t i = 0; i < n; ++i) {
      proxy_records_.push_back(FeedbackRecord{texts[i], ids[i], 0.85});
      const std::size_t j = rng.next_index(ids.size());
      if (j != i) proxy_records_.push_back(FeedbackRecord{texts[i], ids[j], 0.15});
    }
    retriever_->train_proxy(proxy_records_);
    proxy_trained_on_ = proxy_records_.size();
  }

  // Pre-run reward rows from the gateway's own cost model: easy topics answer
  // well on the small model when examples attach, hard topics never do.
  void bootstrap_router(const TopicModel& topics) {
    Rng rng(derive_seed(seed_, "router-bootstrap"));
    const auto& gw = cfg_.gateway;
    std::vector<BootstrapRow> rows;
    rows.reserve(cfg_.sim.bootstrap_rows);
    for (std::size_t i = 0; i < cfg_.sim.bootstrap_rows; ++i) {
      const std::size_t t = rng.next_index(topics.centers.size());
      const auto emb = detail::unit_at_cosine(rng, topics.centers[t],
                                              rng.uniform(cfg_.sim.band_low, cfg_.sim.band_high));
      std::vector<RetrievedExample> ex;
      if (mode_.examples) {
        ex.resize(1 + rng.next_index(5));
        for (auto& r : ex) {
          r.example.embedding = detail::unit_at_cosine(
              rng, topics.centers[t], rng.uniform(cfg_.sim.band_low, cfg_.sim.band_high));
          r.helpfulness = rng.uniform(0.35, 0.8);
        }
      }
      double utility = 0.0;
      for (const auto& r : ex) utility += r.helpfulness;
      if (topics.hard[t]) utility = 0.0;
      const std::size_t req_tokens =
          cfg_.sim.min_request_tokens +
          rng.next_index(cfg_.sim.max_request_tokens - cfg_.sim.min_request_tokens + 1);
      const auto ctx = build_context(emb, ex, rng.next_double(), req_tokens, cfg_.router);

      const double q_small =
          clamp01(gw.small.base_quality_mean + gw.small.example_utility_coeff * utility +
                  gw.small.base_quality_sigma * rng.next_gaussian());
      const double q_large =
          clamp01(gw.large.base_quality_mean + gw.large.base_quality_sigma * rng.next_gaussian());
      const double qs = 6.0 * q_small - 3.0;
      const double ql = 6.0 * q_large - 3.0;
      BootstrapRow row;
      row.features = router_->features(ctx);
      row.reward_small = compute_reward(Action::Small, qs, ql, gw.small.cost_per_token,
                                        gw.large.cost_per_token, cfg_.router)
                             .value;
      row.reward_large = compute_reward(Action::Large, qs, ql, gw.small.cost_per_token,
                                        gw.large.cost_per_token, cfg_.router)
                             .value;
      rows.push_back(std::move(row));
    }
    router_->bootstrap(rows);
  }

  RunResult drive(const Workload& w) {
    RunResult out;
    out.records.reserve(w.requests.size());
    Rng judge_pick(derive_seed(seed_, "judge-pick"));
    Rng judge_noise(derive_seed(seed_, "judge-noise"));
    SyntheticJudge judge;
    judge.tie_band = cfg_.sim.judge_tie_band;
    judge.noise_sigma = cfg_.sim.judge_noise_sigma;

    std::priority_queue<double, std::vector<double>, std::greater<>> completions;
    double last_replan = 0.0;
    std::size_t window_n = 0, window_off = 0;
    const bool calibrate =
        cfg_.sim.offload_target >= 0.0 && mode_.policy == GatewayMode::Policy::Learned;

    for (const auto& wr : w.requests) {
      const double now = wr.arrival_s;
      while (!completions.empty() && completions.top() <= now) completions.pop();
      gateway_->set_external_load(std::min(
          1.0, static_cast<double>(completions.size()) / static_cast<double>(cfg_.gateway.capacity)));

      embedder_->assign(wr.text, wr.embedding);
      ServeRequest req;
      req.id = wr.id;
      req.text = wr.text;
      req.arrival_s = now;
      req.utility_scale = wr.utility_scale;
      const auto resp = gateway_->serve(req);
      completions.push(now + resp.total_ms / 1000.0);

      RequestRecord rec;
      rec.id = resp.request_id;
      rec.arrival_s = now;
      rec.model_used = resp.model_used;
      rec.n_examples = resp.n_examples_used;
      rec.ttft_ms = resp.ttft_ms;
      rec.total_ms = resp.total_ms;
      if (resp.quality && judge_pick.next_double() < cfg_.sim.judge_fraction) {
        GenerationRequest jr;
        jr.prompt = assemble_prompt(wr.text, {});
        jr.request_tokens = token_count(wr.text);
        jr.max_output_tokens = cfg_.gateway.max_output_tokens;
        const auto baseline = judge_backend_->generate(jr);
        rec.score = judge_score(clamp01(*resp.quality), clamp01(baseline.quality), judge,
                                &judge_noise);
      }
      out.records.push_back(std::move(rec));

      if (calibrate) {
        ++window_n;
        if (resp.model_used == "Small") ++window_off;
        if (window_n == kCalibrationWindow) {
          const double measured = static_cast<double>(window_off) / static_cast<double>(window_n);
          router_->shift_small_bias(kCalibrationGain * (cfg_.sim.offload_target - measured));
          window_n = window_off = 0;
        }
      }

      if (cfg_.sim.run_replay && mode_.admit && now - last_replan >= cfg_.manager.replan_period_s) {
        last_replan = now;
        run_replay_round(gateway_->current_load(), now);
      }
    }
    out.report = compute_metrics(out.records, cfg_.sim.duration_s, cfg_.sim.judge_tie_band,
                                 gateway_->stage_means());
    return out;
  }

  void run_replay_round(double load, double now) {
    auto fresh = gateway_->drain_feedback_records();
    proxy_records_.insert(proxy_records_.end(), fresh.begin(), fresh.end());
    if (mode_.examples && proxy_records_.size() >= 50 &&
        proxy_records_.size() != proxy_trained_on_) {
      retriever_->train_proxy(proxy_records_);
      proxy_trained_on_ = proxy_records_.size();
    }
    manager_->enqueue(manager_->plan_optimization(retriever_->index(), cfg_.manager.task_budget));
    const auto created = manager_->run_pending(*large_, load, now);
    for (const auto id : created)
      if (const auto e = store_->get(id)) retriever_->on_insert(id, e->embedding, now);
    manager_->apply_kv_selection();
  }

  static constexpr std::size_t kCalibrationWindow = 100;
  static constexpr double kCalibrationGain = 0.5;

  Config cfg_;
  std::string scenario_;
  std::uint64_t seed_;
  GatewayMode mode_;
  std::shared_ptr<ExampleStore> store_;
  std::shared_ptr<TableEmbedder> embedder_;
  std::shared_ptr<Retriever> retriever_;
  std::shared_ptr<LinearBandit> router_;
  std::shared_ptr<ExampleManager> manager_;
  std::shared_ptr<SyntheticBackend> small_;
  std::shared_ptr<SyntheticBackend> large_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<SyntheticBackend> judge_backend_;
  std::vector<FeedbackRecord> proxy_records_;
  std::size_t proxy_trained_on_ = 0;
};

inline RunResult run_experiment(const Workload& workload, const Config& cfg,
                                const std::string& scenario, std::uint64_t seed) {
  Simulation sim(cfg, scenario, seed);
  return sim.run(workload);
}

inline RunResult run_experiment(const Config& cfg, const std::string& scenario,
                                std::uint64_t seed) {
  Simulation sim(cfg, scenario, seed);
  return sim.run();
}

}  // namespace echolm
