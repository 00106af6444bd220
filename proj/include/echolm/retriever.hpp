#pragma once
// Two-stage example retrieval: centroid preselection by relevance, then
// helpfulness ranking with greedy diversity and a token budget. A small
// tuner adjusts how many examples to attach by watching realized
// latency/quality per count.

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "echolm/cluster_index.hpp"
#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/embedding.hpp"
#include "echolm/example_store.hpp"
#include "echolm/helpfulness.hpp"

namespace echolm {

struct RetrievedExample {
  Example example;
  double cosine = 0.0;
  double helpfulness = 0.0;
};

struct CombinationPolicy {
  int m = 5;
  std::vector<int> candidates{0, 1, 3, 5, 8};
  struct CountStats {
    double mean = 0.0;
    std::size_t n = 0;
  };
  std::vector<CountStats> stats;  // parallel to candidates
  std::size_t since_tune = 0;

  static CombinationPolicy from_config(const RetrieverConfig& cfg) {
    CombinationPolicy p;
    p.candidates = cfg.m_candidates;
    p.m = cfg.default_m;
    p.stats.assign(p.candidates.size(), {});
    return p;
  }
};

// Ranks preselected candidates by helpfulness, greedily enforces pairwise
// diversity, trims to the token budget, and returns the survivors ordered by
// ascending helpfulness so the strongest example sits nearest the request.
inline std::vector<RetrievedExample> retrieve_combination(
    std::span<const float> request_emb, std::size_t request_tokens, const ClusterIndex& index,
    const ExampleStore& store, const HelpfulnessModel& model, int m,
    const RetrieverConfig& cfg, std::size_t token_budget) {
  std::vector<RetrievedExample> out;
  if (m <= 0) return out;

  const auto pre = index.preselect(request_emb, cfg.probes, cfg.n_pre);
  std::vector<RetrievedExample> ranked;
  ranked.reserve(pre.size());
  for (const auto& nb : pre) {
    auto e = store.get(nb.id);  // index rows can outlive evicted examples
    if (!e) continue;
    RetrievedExample r;
    r.cosine = nb.cosine;
    r.helpfulness =
        model.score(help_features(request_emb, request_tokens, *e, cfg.len_norm_tokens));
    r.example = std::move(*e);
    ranked.push_back(std::move(r));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.helpfulness != b.helpfulness) return a.helpfulness > b.helpfulness;
    return a.example.id < b.example.id;
  });

  std::size_t total_tokens = 0;
  for (const auto& cand : ranked) {
    if (out.size() >= static_cast<std::size_t>(m)) break;
    bool too_close = false;
    for (const auto& sel : out) {
      if (dot(cand.example.embedding, sel.example.embedding) > cfg.diversity_threshold) {
        too_close = true;
        break;
      }
    }
    if (too_close) continue;
    total_tokens += cand.example.block_tokens();
    out.push_back(cand);
  }

  // Drop least-helpful survivors until the combination fits the budget.
  while (!out.empty() && total_tokens > token_budget) {
    total_tokens -= out.back().example.block_tokens();
    out.pop_back();
  }

  std::reverse(out.begin(), out.end());  // ascending helpfulness
  return out;
}

struct CountObservation {
  int m = 0;
  double latency_ms = 0.0;
  double quality = 0.0;
};

// Folds one request's outcome into the per-count averages; every tuning
// period the incumbent count moves to the best average, ties to the
// smaller count.
inline void tune_example_count(CombinationPolicy& policy, const CountObservation& obs,
                               const RetrieverConfig& cfg) {
  for (std::size_t i = 0; i < policy.candidates.size(); ++i) {
    if (policy.candidates[i] != obs.m) continue;
    auto& st = policy.stats[i];
    const double objective =
        obs.quality - cfg.lambda_latency * (obs.latency_ms / cfg.latency_norm_ms);
    st.mean += (objective - st.mean) / static_cast<double>(st.n + 1);
    ++st.n;
    ++policy.since_tune;
    break;
  }
  if (policy.since_tune < cfg.tuning_period) return;
  policy.since_tune = 0;
  double best = -std::numeric_limits<double>::infinity();
  int best_m = policy.m;
  for (std::size_t i = 0; i < policy.candidates.size(); ++i) {
    if (policy.stats[i].n == 0) continue;
    if (policy.stats[i].mean > best) {  // strict: first (smallest) count wins ties
      best = policy.stats[i].mean;
      best_m = policy.candidates[i];
    }
  }
  policy.m = best_m;
}

struct RetrievalResult {
  std::vector<RetrievedExample> examples;
  std::vector<float> request_emb;
  std::size_t request_tokens = 0;
  int m_used = 0;
};

inline std::vector<FeedbackRecord> load_feedback_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::vector<FeedbackRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::strip(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    FeedbackRecord r;
    r.request_text = j.at("request").get<std::string>();
    r.example_id = j.at("example_id").get<ExampleId>();
    r.label = j.at("label").get<double>();
    records.push_back(std::move(r));
  }
  return records;
}

// Owns the index, proxy model, and count policy over a shared store. Not
// internally synchronized; the gateway serializes access.
class Retriever {
 public:
  Retriever(RetrieverConfig cfg, std::shared_ptr<ExampleStore> store,
            std::shared_ptr<Embedder> embedder, std::uint64_t seed)
      : cfg_(cfg),
        store_(std::move(store)),
        embedder_(std::move(embedder)),
        seed_(seed),
        policy_(CombinationPolicy::from_config(cfg)) {
    cfg_.validate();
  }

  void rebuild(double now = 0.0) {
    index_ = ClusterIndex::build_from_store(*store_, cfg_, seed_, now);
    adds_since_rebuild_ = 0;
  }

  // Keeps the index fresh between full rebuilds by nearest-centroid appends.
  void on_insert(ExampleId id, std::span<const float> emb, double now = 0.0) {
    if (index_.k() == 0) {
      rebuild(now);
      return;
    }
    index_.add(id, emb);
    if (++adds_since_rebuild_ >= cfg_.rebuild_every) rebuild(now);
  }

  RetrievalResult retrieve(const std::string& request_text, int m, std::size_t token_budget) {
    RetrievalResult res;
    res.request_emb = embedder_->embed(request_text);
    res.request_tokens = token_count(request_text);
    res.m_used = m;
    res.examples = retrieve_combination(res.request_emb, res.request_tokens, index_, *store_,
                                        model_, m, cfg_, token_budget);
    return res;
  }

  // Example count for the next request; occasionally tries a non-incumbent
  // count so the tuner keeps fresh stats for every candidate.
  int choose_m(Rng& rng) const {
    if (policy_.candidates.empty()) return policy_.m;
    if (rng.next_double() < cfg_.explore_rate)
      return policy_.candidates[rng.next_index(policy_.candidates.size())];
    return policy_.m;
  }

  void observe(const CountObservation& obs) { tune_example_count(policy_, obs, cfg_); }

  // Builds feature rows against the current store and fits the proxy.
  // Records whose example has been evicted are dropped.
  std::size_t train_proxy(const std::vector<FeedbackRecord>& records) {
    std::vector<HelpTrainingRow> rows;
    rows.reserve(records.size());
    std::unordered_map<std::string, std::vector<float>> emb_cache;
    for (const auto& rec : records) {
      auto e = store_->get(rec.example_id);
      if (!e) continue;
      const std::string key = normalize_whitespace(rec.request_text);
      auto it = emb_cache.find(key);
      if (it == emb_cache.end())
        it = emb_cache.emplace(key, embedder_->embed(rec.request_text)).first;
      HelpTrainingRow row;
      row.features = help_features(it->second, token_count(rec.request_text), *e,
                                   cfg_.len_norm_tokens);
      row.label = clamp01(rec.label);
      rows.push_back(row);
    }
    model_ = train_helpfulness(rows, cfg_).model;
    return rows.size();
  }

  const ClusterIndex& index() const { return index_; }
  const HelpfulnessModel& model() const { return model_; }
  void set_model(HelpfulnessModel m) { model_ = m; }
  const CombinationPolicy& policy() const { return policy_; }
  CombinationPolicy& policy() { return policy_; }
  const RetrieverConfig& config() const { return cfg_; }
  const Embedder& embedder() const { return *embedder_; }

 private:
  RetrieverConfig cfg_;
  std::shared_ptr<ExampleStore> store_;
  std::shared_ptr<Embedder> embedder_;
  std::uint64_t seed_;
  ClusterIndex index_;
  HelpfulnessModel model_;
  CombinationPolicy policy_;
  std::size_t adds_since_rebuild_ = 0;
};

}  // namespace echolm
