#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "echolm/backend.hpp"
#include "echolm/config.hpp"
#include "echolm/embedding.hpp"
#include "echolm/example_store.hpp"
#include "echolm/manager.hpp"
#include "echolm/metrics.hpp"
#include "echolm/retriever.hpp"
#include "echolm/router.hpp"

namespace echolm {

struct ServeRequest {
  std::string id;
  std::string text;
  double arrival_s = 0.0;
  bool skip_cache = false;  // opt out of exact-match reuse and admission
  // Synthetic-environment hook: scales example utility for this request.
  double utility_scale = 1.0;
};

enum class Bypass { None, Retriever, Router };

inline const char* to_string(Bypass b) {
  switch (b) {
    case Bypass::Retriever: return "retriever";
    case Bypass::Router: return "router";
    default: return "none";
  }
}

struct ServeResponse {
  std::string request_id;
  std::string text;
  std::string model_used;  // Small | Large | CacheHit | Error
  std::size_t n_examples_used = 0;
  double ttft_ms = 0.0;
  double total_ms = 0.0;
  std::optional<double> quality;
  Bypass bypass = Bypass::None;
};

// Which pipeline stages a scenario runs. The full system enables everything;
// ablations force a policy or drop retrieval.
struct GatewayMode {
  enum class Policy { Learned, ForceSmall, ForceLarge };
  bool exact_match = true;
  bool examples = true;
  Policy policy = Policy::Learned;
  bool admit = true;

  static GatewayMode for_scenario(std::string_view name) {
    GatewayMode m;
    if (name == "echolm") return m;
    if (name == "baseline_small") {
      m.exact_match = m.examples = m.admit = false;
      m.policy = Policy::ForceSmall;
      return m;
    }
    if (name == "baseline_large") {
      m.exact_match = m.examples = m.admit = false;
      m.policy = Policy::ForceLarge;
      return m;
    }
    if (name == "router_only") {
      m.exact_match = m.examples = m.admit = false;
      return m;
    }
    if (name == "examples_only") {
      m.policy = Policy::ForceSmall;
      return m;
    }
    throw std::invalid_argument("unknown scenario: " + std::string(name));
  }
};

// Prompt template: numbered example blocks, then the bare request.
inline std::string assemble_prompt(const std::string& request_text,
                                   const std::vector<RetrievedExample>& examples) {
  std::string p;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    p += "Example " + std::to_string(i + 1) + ":\nQ: " + examples[i].example.request_text +
         "\nA: " + examples[i].example.response_text + "\n\n";
  }
  p += "Q: " + request_text + "\nA:";
  return p;
}

// Per-request orchestration: exact-match lookup, retrieval, routing, backend
// generation, sampled counterfactual feedback, and cache admission, with
// bypass on stage failure so no single component can drop a request.
class Gateway {
 public:
  Gateway(const Config& cfg, GatewayMode mode, std::shared_ptr<ExampleStore> store,
          std::shared_ptr<Retriever> retriever, std::shared_ptr<LinearBandit> router,
          std::shared_ptr<ExampleManager> manager, std::shared_ptr<Backend> small,
          std::shared_ptr<Backend> large, std::uint64_t seed)
      : cfg_(cfg),
        mode_(mode),
        store_(std::move(store)),
        retriever_(std::move(retriever)),
        router_(std::move(router)),
        manager_(std::move(manager)),
        small_(std::move(small)),
        large_(std::move(large)),
        rng_(derive_seed(seed, "gateway")) {
    if (!store_ || !retriever_ || !router_ || !manager_ || !small_ || !large_)
      throw std::invalid_argument("gateway needs all components");
  }

  ServeResponse serve(const ServeRequest& req) {
    ++inflight_;
    const auto res = serve_inner(req);
    --inflight_;
    ++n_served_;
    return res;
  }

  // Load is inflight/capacity by default; simulations override it because a
  // single-threaded virtual-time driver never has real concurrency.
  void set_external_load(double load) { external_load_ = load; }

  // Leaves feedback sampling and proxy records intact; only router learning
  // stops. Ablation hook for frozen-policy runs.
  void set_online_updates(bool on) { online_updates_ = on; }
  double current_load() const {
    if (external_load_ >= 0.0) return std::min(1.0, external_load_);
    return std::min(1.0, static_cast<double>(inflight_.load()) /
                             static_cast<double>(cfg_.gateway.capacity));
  }

  std::vector<FeedbackRecord> drain_feedback_records() {
    return std::exchange(pending_records_, {});
  }

  StageBreakdown stage_means() const {
    StageBreakdown m = stage_totals_;
    const auto n = static_cast<double>(n_served_ ? n_served_ : 1);
    m.lookup_ms /= n;
    m.retrieve_ms /= n;
    m.route_ms /= n;
    m.generate_ms /= n;
    m.feedback_ms /= n;
    m.manage_ms /= n;
    return m;
  }

  Backend& small_backend() { return *small_; }
  Backend& large_backend() { return *large_; }
  const GatewayMode& mode() const { return mode_; }

 private:
  ServeResponse serve_inner(const ServeRequest& req) {
    const auto& g = cfg_.gateway;
    ServeResponse resp;
    resp.request_id = req.id;
    const double now = req.arrival_s;
    double elapsed = g.lookup_ms;
    stage_totals_.lookup_ms += g.lookup_ms;

    if (mode_.exact_match && !req.skip_cache) {
      if (const auto hit = store_->exact_match(req.text)) {
        resp.model_used = "CacheHit";
        resp.text = hit->response_text;
        resp.quality = hit->quality;
        resp.ttft_ms = resp.total_ms = elapsed;
        return resp;
      }
    }

    const std::size_t req_tokens = token_count(req.text);
    const std::size_t token_budget =
        g.context_limit_tokens > req_tokens ? g.context_limit_tokens - req_tokens : 0;

    RetrievalResult ret;
    bool retrieved = false;
    if (mode_.examples) {
      const bool fault = rng_.next_double() < g.inject_retriever_fault;
      if (!fault) {
        try {
          const int m = retriever_->choose_m(rng_);
          ret = retriever_->retrieve(req.text, m, token_budget);
          retrieved = true;
          elapsed += g.retrieve_ms;
          stage_totals_.retrieve_ms += g.retrieve_ms;
        } catch (const std::exception&) {
        }
      }
      if (!retrieved) {
        resp.bypass = Bypass::Retriever;
        elapsed += g.stage_timeout_ms;
        stage_totals_.retrieve_ms += g.stage_timeout_ms;
        ret = RetrievalResult{};
      }
    }
    if (ret.request_emb.empty()) {
      ret.request_emb = retriever_->embedder().embed(req.text);
      ret.request_tokens = req_tokens;
    }

    const double load = current_load();
    const auto ctx = build_context(ret.request_emb, ret.examples, load, ret.request_tokens,
                                   cfg_.router);
    Action action = Action::Large;
    if (mode_.policy == GatewayMode::Policy::ForceSmall) {
      action = Action::Small;
    } else if (mode_.policy == GatewayMode::Policy::ForceLarge) {
      action = Action::Large;
    } else {
      const bool fault = rng_.next_double() < g.inject_router_fault;
      bool routed = false;
      if (!fault) {
        try {
          action = router_->route(ctx);
          routed = true;
          elapsed += g.route_ms;
          stage_totals_.route_ms += g.route_ms;
        } catch (const std::exception&) {
        }
      }
      if (!routed) {
        resp.bypass = Bypass::Router;  // quality-safe default
        action = Action::Large;
        elapsed += g.stage_timeout_ms;
        stage_totals_.route_ms += g.stage_timeout_ms;
      }
    }

    GenerationResult gen;
    Action used = action;
    bool prepended = false;
    bool generated = false;
    for (const Action cand : {action, other(action)}) {
      const bool with_examples =
          !ret.examples.empty() && (cand == Action::Small || g.examples_for_large);
      try {
        gen = run_backend(cand, req, ret, with_examples);
        used = cand;
        prepended = with_examples;
        generated = true;
        break;
      } catch (const BackendError&) {
        elapsed += g.stage_timeout_ms;
        stage_totals_.generate_ms += g.stage_timeout_ms;
      }
    }
    if (!generated) {
      resp.model_used = "Error";
      resp.ttft_ms = resp.total_ms = elapsed;
      return resp;
    }
    stage_totals_.generate_ms += gen.total_ms;
    resp.model_used = to_string(used);
    resp.text = gen.text;
    resp.n_examples_used = prepended ? ret.examples.size() : 0;
    resp.ttft_ms = elapsed + gen.ttft_ms;
    resp.total_ms = elapsed + gen.total_ms;
    const double quality = clamp01(gen.quality);
    resp.quality = quality;

    const double cost_norm =
        backend_for(used).spec().cost_per_token / large_->spec().cost_per_token;
    if (prepended) {
      for (const auto& re : ret.examples) {
        try {
          store_->record_access(re.example.id);
        } catch (const std::out_of_range&) {
          continue;
        }
        manager_->observe_gain(re.example.id, cost_norm, quality, now);
      }
    }
    if (retrieved)
      retriever_->observe(CountObservation{ret.m_used, resp.total_ms, quality});

    if (rng_.next_double() < g.feedback_fraction) {
      emit_feedback(req, ret, ctx, used, quality);
      if (prepended) {  // quality only reflects examples the model saw
        for (const auto& re : ret.examples)
          pending_records_.push_back(FeedbackRecord{req.text, re.example.id, quality});
      }
    }

    if (mode_.admit && !req.skip_cache) {
      Example e;
      e.request_text = req.text;
      e.response_text = gen.text;
      e.embedding = ret.request_emb;
      e.quality = quality;
      e.freq = 0.0;
      e.cacheable = true;
      if (const auto id = manager_->admit(std::move(e), cost_norm, now))
        retriever_->on_insert(*id, ret.request_emb, now);
    }
    return resp;
  }

  static Action other(Action a) { return a == Action::Small ? Action::Large : Action::Small; }
  Backend& backend_for(Action a) { return a == Action::Small ? *small_ : *large_; }

  GenerationResult run_backend(Action a, const ServeRequest& req, const RetrievalResult& ret,
                               bool with_examples) {
    GenerationRequest greq;
    greq.request_tokens = ret.request_tokens;
    greq.max_output_tokens = cfg_.gateway.max_output_tokens;
    if (with_examples) {
      greq.prompt = assemble_prompt(req.text, ret.examples);
      double utility = 0.0;
      for (const auto& re : ret.examples) {
        const std::size_t toks = re.example.block_tokens();
        if (re.example.kv_status.cached())
          greq.example_tokens_cached += toks;
        else
          greq.example_tokens_plain += toks;
        utility += re.helpfulness;
      }
      greq.example_utility = req.utility_scale * utility;
    } else {
      greq.prompt = assemble_prompt(req.text, {});
    }
    return backend_for(a).generate(greq);
  }

  // Counterfactual sample: measure the road not taken, convert both outcomes
  // onto the seven-point scale, and replay a reward for each action.
  void emit_feedback(const ServeRequest& req, const RetrievalResult& ret,
                     const RoutingContext& ctx, Action used, double used_quality) {
    if (mode_.policy != GatewayMode::Policy::Learned) return;
    const Action alt = other(used);
    const bool alt_examples =
        !ret.examples.empty() && (alt == Action::Small || cfg_.gateway.examples_for_large);
    GenerationResult alt_gen;
    try {
      alt_gen = run_backend(alt, req, ret, alt_examples);
    } catch (const BackendError&) {
      return;  // no measurable counterfactual
    }
    stage_totals_.feedback_ms += alt_gen.total_ms;
    const double alt_quality = clamp01(alt_gen.quality);
    const double q_small = 6.0 * (used == Action::Small ? used_quality : alt_quality) - 3.0;
    const double q_large = 6.0 * (used == Action::Large ? used_quality : alt_quality) - 3.0;
    const double c_small = small_->spec().cost_per_token;
    const double c_large = large_->spec().cost_per_token;
    if (!online_updates_) return;
    const auto feats = router_->features(ctx);
    for (const Action a : {used, alt}) {
      const auto reward = compute_reward(a, q_small, q_large, c_small, c_large, cfg_.router);
      router_->online_update(RouterFeedback{feats, a, reward.value});
    }
  }

  Config cfg_;
  GatewayMode mode_;
  std::shared_ptr<ExampleStore> store_;
  std::shared_ptr<Retriever> retriever_;
  std::shared_ptr<LinearBandit> router_;
  std::shared_ptr<ExampleManager> manager_;
  std::shared_ptr<Backend> small_;
  std::shared_ptr<Backend> large_;
  Rng rng_;
  std::atomic<std::size_t> inflight_{0};
  double external_load_ = -1.0;
  bool online_updates_ = true;
  std::size_t n_served_ = 0;
  StageBreakdown stage_totals_;
  std::vector<FeedbackRecord> pending_records_;
};

}  // namespace echolm
