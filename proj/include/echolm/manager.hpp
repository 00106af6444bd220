#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "echolm/backend.hpp"
#include "echolm/cluster_index.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"
#include "echolm/knapsack.hpp"

namespace echolm {

// Moving average of an example's optimization potential; mirrors the value
// the store carries, plus bookkeeping the store does not need.
struct GainRecord {
  ExampleId example_id = 0;
  double gain = 0.0;
  std::size_t samples = 0;
  double last_update = 0.0;
};

enum class ReplayKind { Distill, Expand };

inline const char* to_string(ReplayKind k) {
  return k == ReplayKind::Distill ? "distill" : "expand";
}

struct ReplayTask {
  ReplayKind kind = ReplayKind::Distill;
  ExampleId target = 0;
  double priority = 0.0;
};

// G(e): how much a cheaper-model answer of higher quality could save here.
inline double compute_gain(double model_cost_norm, double response_quality_norm) {
  if (model_cost_norm < 0.0 || model_cost_norm > 1.0)
    throw std::invalid_argument("compute_gain: cost out of [0, 1]");
  if (response_quality_norm < 0.0 || response_quality_norm > 1.0)
    throw std::invalid_argument("compute_gain: quality out of [0, 1]");
  return model_cost_norm * (1.0 - response_quality_norm);
}

struct NeighborGain {
  double similarity = 0.0;
  double gain = 0.0;
};

// G(e+): similarity-weighted mean of the neighbors' gains.
inline double companion_gain(const std::vector<NeighborGain>& neighbors) {
  if (neighbors.empty()) throw std::invalid_argument("companion_gain: no neighbors");
  double num = 0.0, den = 0.0;
  for (const auto& n : neighbors) {
    if (n.similarity < 0.0) throw std::invalid_argument("companion_gain: negative similarity");
    num += n.similarity * n.gain;
    den += n.similarity;
  }
  if (den <= 0.0) throw std::invalid_argument("companion_gain: all-zero similarities");
  return num / den;
}

struct CacheBudget {
  std::uint64_t kv_budget_bytes = 0;
  std::size_t bytes_per_token = 0;
  double compute_ms_per_token = 0.0;
  double io_ms_per_token = 0.0;

  void validate() const {
    if (kv_budget_bytes == 0 || bytes_per_token == 0 || compute_ms_per_token <= 0.0 ||
        io_ms_per_token <= 0.0)
      throw std::invalid_argument("cache budget fields must be positive");
    if (compute_ms_per_token <= io_ms_per_token)
      throw std::invalid_argument("caching KV never pays unless compute > io");
  }
};

inline CacheBudget make_budget(const ManagerConfig& m, const StoreConfig& s) {
  CacheBudget b;
  b.kv_budget_bytes = m.kv_budget_bytes;
  b.bytes_per_token = s.kv_bytes_per_token();
  b.compute_ms_per_token = m.compute_ms_per_token;
  b.io_ms_per_token = m.io_ms_per_token;
  b.validate();
  return b;
}

// Latency saved per window by keeping this block's KV resident instead of
// re-prefilling it on every repurposing.
inline double kv_latency_saving(std::size_t token_count, double freq, const CacheBudget& b) {
  if (token_count == 0) throw std::invalid_argument("kv_latency_saving: zero tokens");
  return (b.compute_ms_per_token - b.io_ms_per_token) * static_cast<double>(token_count) * freq;
}

enum class TaskOutcome { Done, Requeued, Dropped };

struct TaskResult {
  TaskOutcome outcome = TaskOutcome::Done;
  std::optional<ExampleId> new_example;
};

class ExampleManager {
 public:
  ExampleManager(ManagerConfig cfg, StoreConfig store_cfg, std::shared_ptr<ExampleStore> store)
      : cfg_(cfg), budget_(make_budget(cfg, store_cfg)), store_(std::move(store)) {
    cfg_.validate();
  }

  const ManagerConfig& config() const { return cfg_; }
  const CacheBudget& budget() const { return budget_; }

  // Admission of a served pair. The example's gain starts at G(e) for the
  // backend that produced it.
  std::optional<ExampleId> admit(Example e, double model_cost_norm, double now) {
    e.quality = clamp01(e.quality);
    e.gain = compute_gain(model_cost_norm, e.quality);
    e.created_at = now;
    e.last_decay_at = now;
    const auto id = store_->insert(std::move(e));
    if (id) {
      std::lock_guard lk(mu_);
      records_[*id] = GainRecord{*id, store_->get(*id)->gain, 1, now};
    }
    return id;
  }

  // Fold one usage observation into the example's gain average.
  void observe_gain(ExampleId id, double model_cost_norm, double quality_norm, double now) {
    const double g = compute_gain(model_cost_norm, quality_norm);
    double merged = 0.0;
    try {
      merged = store_->merge_gain(id, g, cfg_.alpha);
    } catch (const std::out_of_range&) {
      return;  // evicted since it was used
    }
    std::lock_guard lk(mu_);
    auto& rec = records_[id];
    rec = GainRecord{id, merged, rec.samples + 1, now};
  }

  std::optional<GainRecord> record(ExampleId id) const {
    std::lock_guard lk(mu_);
    const auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  // Candidates are every example's own gain plus its hypothetical companion's;
  // the top slice becomes the replay plan. Ties prefer Distill, then lower id.
  std::vector<ReplayTask> plan_optimization(const ClusterIndex& index,
                                            std::size_t budget_tasks) const {
    std::vector<ReplayTask> cands;
    if (budget_tasks == 0) return cands;
    const auto snap = store_->snapshot();
    std::unordered_map<ExampleId, double> gain_of;
    gain_of.reserve(snap.size());
    for (const auto& e : snap) gain_of.emplace(e.id, e.gain);
    for (const auto& e : snap) {
      cands.push_back({ReplayKind::Distill, e.id, e.gain});
      if (index.size() == 0) continue;
      const auto near = index.preselect(e.embedding, index.k(), cfg_.top_k + 4);
      std::vector<NeighborGain> ng;
      for (const auto& nb : near) {
        if (nb.id == e.id || nb.cosine <= 0.0) continue;
        const auto it = gain_of.find(nb.id);
        if (it == gain_of.end()) continue;  // index may lag evictions
        ng.push_back({nb.cosine, it->second});
        if (ng.size() == cfg_.top_k) break;
      }
      if (!ng.empty()) cands.push_back({ReplayKind::Expand, e.id, companion_gain(ng)});
    }
    std::sort(cands.begin(), cands.end(), [](const ReplayTask& a, const ReplayTask& b) {
      if (a.priority != b.priority) return a.priority > b.priority;
      if (a.kind != b.kind) return a.kind == ReplayKind::Distill;
      return a.target < b.target;
    });
    if (cands.size() > budget_tasks) cands.resize(budget_tasks);
    return cands;
  }

  void enqueue(std::vector<ReplayTask> tasks) {
    std::lock_guard lk(mu_);
    for (auto& t : tasks) queue_.push_back(t);
  }

  std::size_t queue_size() const {
    std::lock_guard lk(mu_);
    return queue_.size();
  }

  // Regenerate the response n_samples times and keep the best one. Stored
  // quality never decreases.
  TaskResult distill(ExampleId id, Backend& backend, double now) {
    const auto ex = store_->get(id);
    if (!ex) return {TaskOutcome::Dropped, std::nullopt};
    std::string best_text;
    double best_q = -1.0;
    try {
      for (std::size_t i = 0; i < cfg_.n_samples; ++i) {
        GenerationRequest req;
        req.prompt = "Q: " + ex->request_text + "\nA:";
        req.request_tokens = token_count(ex->request_text);
        const auto res = backend.generate(req);
        const double q = clamp01(res.quality);
        if (q > best_q) {
          best_q = q;
          best_text = res.text;
        }
      }
    } catch (const BackendError&) {
      return fail({ReplayKind::Distill, id, ex->gain});
    }
    if (best_q > ex->quality) {
      try {
        store_->set_quality(id, best_q, best_text);
      } catch (const std::out_of_range&) {
        return {TaskOutcome::Dropped, std::nullopt};
      }
    }
    settle(ReplayKind::Distill, id, now);
    return {TaskOutcome::Done, std::nullopt};
  }

  // Insert a paraphrased companion next to the original, which stays intact.
  TaskResult expand(ExampleId id, Backend& backend, double now) {
    const auto ex = store_->get(id);
    if (!ex) return {TaskOutcome::Dropped, std::nullopt};
    Variation var;
    try {
      var = backend.variation(*ex);
    } catch (const BackendError&) {
      return fail({ReplayKind::Expand, id, ex->gain});
    }
    Example ne;
    ne.request_text = std::move(var.request_text);
    ne.response_text = std::move(var.response_text);
    ne.embedding = std::move(var.embedding);
    ne.quality = clamp01(var.quality);
    ne.freq = 0.0;
    ne.gain = 0.0;
    ne.created_at = now;
    ne.last_decay_at = now;
    ne.cacheable = true;
    const auto nid = store_->insert(std::move(ne));
    settle(ReplayKind::Expand, id, now);
    return {TaskOutcome::Done, nid};
  }

  TaskResult run_task(const ReplayTask& t, Backend& backend, double now) {
    return t.kind == ReplayKind::Distill ? distill(t.target, backend, now)
                                         : expand(t.target, backend, now);
  }

  // Drains up to max_tasks queued tasks while the system is off-peak.
  // Returns ids of examples created by expansion, so the caller can index them.
  std::vector<ExampleId> run_pending(Backend& backend, double load, double now,
                                     std::size_t max_tasks = SIZE_MAX) {
    std::vector<ExampleId> created;
    if (load >= cfg_.offpeak_load_threshold) return created;
    for (std::size_t ran = 0; ran < max_tasks; ++ran) {
      ReplayTask t;
      {
        std::lock_guard lk(mu_);
        if (queue_.empty()) break;
        t = queue_.front();
        queue_.pop_front();
      }
      const auto res = run_task(t, backend, now);
      if (res.new_example) created.push_back(*res.new_example);
    }
    return created;
  }

  // Knapsack inputs for the current store contents.
  std::vector<KnapsackItem> kv_items() const {
    const auto snap = store_->snapshot();
    std::vector<KnapsackItem> items;
    items.reserve(snap.size());
    for (const auto& e : snap) {
      const std::size_t toks = e.block_tokens();
      if (toks == 0) continue;
      items.push_back({e.id, static_cast<std::uint64_t>(toks) * budget_.bytes_per_token,
                       kv_latency_saving(toks, e.freq, budget_)});
    }
    return items;
  }

  struct KvPlan {
    std::size_t n_cached = 0;
    std::uint64_t bytes_used = 0;
    std::size_t demoted = 0;
  };

  // Solve the residency knapsack on a snapshot and apply the binary decision:
  // winners get (or keep) a KV entry, losers are demoted to plaintext.
  KvPlan apply_kv_selection() {
    const auto snap = store_->snapshot();
    const auto items = kv_items();
    const auto ids = select_kv_cached(items, cfg_.kv_budget_bytes);
    const std::unordered_set<ExampleId> chosen(ids.begin(), ids.end());
    KvPlan plan;
    for (const auto& e : snap) {
      const bool want = chosen.count(e.id) > 0;
      try {
        if (want) {
          const std::uint64_t bytes =
              static_cast<std::uint64_t>(e.block_tokens()) * budget_.bytes_per_token;
          store_->set_kv_status(e.id, KvStatus{bytes});
          ++plan.n_cached;
          plan.bytes_used += bytes;
        } else if (e.kv_status.cached()) {
          store_->set_kv_status(e.id, KvStatus{});
          ++plan.demoted;
        }
      } catch (const std::out_of_range&) {
        // evicted between snapshot and apply
      }
    }
    return plan;
  }

 private:
  TaskResult fail(const ReplayTask& t) {
    std::lock_guard lk(mu_);
    const auto key = std::make_pair(t.kind, t.target);
    if (requeued_.insert(key).second) {
      queue_.push_back(t);
      return {TaskOutcome::Requeued, std::nullopt};
    }
    return {TaskOutcome::Dropped, std::nullopt};
  }

  void settle(ReplayKind kind, ExampleId id, double) {
    std::lock_guard lk(mu_);
    requeued_.erase(std::make_pair(kind, id));
  }

  ManagerConfig cfg_;
  CacheBudget budget_;
  std::shared_ptr<ExampleStore> store_;
  mutable std::mutex mu_;
  std::unordered_map<ExampleId, GainRecord> records_;
  std::deque<ReplayTask> queue_;
  std::set<std::pair<ReplayKind, ExampleId>> requeued_;
};

}  // namespace echolm
