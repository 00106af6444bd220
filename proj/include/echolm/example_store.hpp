#pragma once
// Persistent pool of request/response examples. Owns exact-match lookup,
// per-example access statistics with hourly decay, capacity eviction, and
// JSONL persistence. Many readers, serialized writers.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "echolm/common.hpp"
#include "echolm/config.hpp"

namespace echolm {

struct KvStatus {
  // size_bytes == 0 means plaintext-only; > 0 means a KV blob of that size.
  std::uint64_t size_bytes = 0;
  bool cached() const { return size_bytes > 0; }
  static KvStatus plaintext() { return {0}; }
  static KvStatus cached_bytes(std::uint64_t s) { return {s}; }
  bool operator==(const KvStatus&) const = default;
};

struct Example {
  ExampleId id = 0;
  std::string request_text;
  std::string response_text;
  std::vector<float> embedding;  // unit-norm, dimension = store config
  double quality = 0.0;          // normalized response quality in [0, 1]
  double freq = 0.0;             // decayed repurposing frequency
  double gain = 0.0;             // moving average of optimization gain, [0, 1]
  KvStatus kv_status;
  double created_at = 0.0;    // seconds
  double last_decay_at = 0.0; // seconds; fractional hours carry over
  bool cacheable = true;      // developer skip flag

  // Tokens covered by a KV blob for this example: request + response.
  std::size_t block_tokens() const {
    return token_count(request_text) + token_count(response_text);
  }
};

// Simulated KV blob size for an example under the store's size model.
inline std::uint64_t kv_size_bytes(const Example& e, const StoreConfig& cfg) {
  return static_cast<std::uint64_t>(e.block_tokens()) * cfg.kv_bytes_per_token();
}

struct DecayStats {
  std::size_t updated = 0;
  bool clock_regression = false;
};

class ExampleStore {
 public:
  explicit ExampleStore(StoreConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  ExampleStore(const ExampleStore& other) {
    std::shared_lock lk(other.mu_);
    cfg_ = other.cfg_;
    examples_ = other.examples_;
    by_text_ = other.by_text_;
    next_id_ = other.next_id_;
  }

  const StoreConfig& config() const { return cfg_; }

  // Inserts a cacheable example, evicting the lowest gain*freq entry when at
  // capacity. Returns nullopt when the developer skip flag is set; throws on
  // malformed embeddings or out-of-range fields.
  std::optional<ExampleId> insert(Example e) {
    if (!e.cacheable) return std::nullopt;
    if (e.embedding.size() != cfg_.embedding_dim)
      throw std::invalid_argument("embedding dimension mismatch");
    if (!is_unit_norm(e.embedding))
      throw std::invalid_argument("embedding must be unit-norm");
    if (e.quality < 0.0 || e.quality > 1.0)
      throw std::invalid_argument("quality out of [0, 1]");
    if (e.gain < 0.0 || e.gain > 1.0) throw std::invalid_argument("gain out of [0, 1]");
    if (e.freq < 0.0) throw std::invalid_argument("freq must be >= 0");

    std::unique_lock lk(mu_);
    if (e.id == 0) e.id = next_id_++;
    else next_id_ = std::max(next_id_, e.id + 1);
    if (examples_.size() >= cfg_.max_examples && !examples_.count(e.id))
      evict_lowest_utility_locked();
    const std::string key = normalize_whitespace(e.request_text);
    const ExampleId id = e.id;
    examples_[id] = std::move(e);
    by_text_[key] = id;  // later insert wins for duplicate normalized text
    return id;
  }

  // Byte-identical match after whitespace normalization; no case folding.
  std::optional<Example> exact_match(std::string_view request_text) const {
    std::shared_lock lk(mu_);
    auto it = by_text_.find(normalize_whitespace(request_text));
    if (it == by_text_.end()) return std::nullopt;
    auto eit = examples_.find(it->second);
    if (eit == examples_.end()) return std::nullopt;
    return eit->second;
  }

  std::optional<Example> get(ExampleId id) const {
    std::shared_lock lk(mu_);
    auto it = examples_.find(id);
    if (it == examples_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(ExampleId id) const {
    std::shared_lock lk(mu_);
    return examples_.count(id) > 0;
  }

  std::size_t size() const {
    std::shared_lock lk(mu_);
    return examples_.size();
  }

  // Applies decay_factor per whole elapsed interval to freq and gain.
  // Fractional intervals carry over; repeat calls with the same `now` are
  // no-ops. A clock running backwards is reported, not applied.
  DecayStats decay_tick(double now) {
    std::unique_lock lk(mu_);
    DecayStats stats;
    for (auto& [id, e] : examples_) {
      if (now < e.last_decay_at) {
        stats.clock_regression = true;
        continue;
      }
      const double elapsed = now - e.last_decay_at;
      const auto whole = static_cast<std::uint64_t>(elapsed / cfg_.decay_interval_s);
      if (whole == 0) continue;
      const double factor = std::pow(cfg_.decay_factor, static_cast<double>(whole));
      e.freq *= factor;
      e.gain *= factor;
      e.last_decay_at += static_cast<double>(whole) * cfg_.decay_interval_s;
      ++stats.updated;
    }
    return stats;
  }

  // One repurposing event; decay is handled separately by decay_tick.
  double record_access(ExampleId id) {
    std::unique_lock lk(mu_);
    auto it = examples_.find(id);
    if (it == examples_.end()) throw std::out_of_range("unknown example id");
    it->second.freq += 1.0;
    return it->second.freq;
  }

  // Gain moving average update; `g` is a fresh gain observation in [0, 1].
  double merge_gain(ExampleId id, double g, double alpha) {
    if (g < 0.0 || g > 1.0) throw std::invalid_argument("gain observation out of [0, 1]");
    std::unique_lock lk(mu_);
    auto it = examples_.find(id);
    if (it == examples_.end()) throw std::out_of_range("unknown example id");
    auto& e = it->second;
    e.gain = e.gain + alpha * (g - e.gain);
    return e.gain;
  }

  void set_quality(ExampleId id, double q, std::string response_text) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quality out of [0, 1]");
    std::unique_lock lk(mu_);
    auto it = examples_.find(id);
    if (it == examples_.end()) throw std::out_of_range("unknown example id");
    it->second.quality = q;
    it->second.response_text = std::move(response_text);
  }

  void set_kv_status(ExampleId id, KvStatus s) {
    std::unique_lock lk(mu_);
    auto it = examples_.find(id);
    if (it == examples_.end()) throw std::out_of_range("unknown example id");
    it->second.kv_status = s;
  }

  // Stable snapshot of all examples, ordered by id.
  std::vector<Example> snapshot() const {
    std::shared_lock lk(mu_);
    std::vector<Example> out;
    out.reserve(examples_.size());
    for (const auto& [id, e] : examples_) out.push_back(e);
    return out;
  }

  // Ids plus a flat row-major embedding matrix, ordered by id.
  void export_embeddings(std::vector<ExampleId>& ids, std::vector<float>& flat) const {
    std::shared_lock lk(mu_);
    ids.clear();
    flat.clear();
    ids.reserve(examples_.size());
    flat.reserve(examples_.size() * cfg_.embedding_dim);
    for (const auto& [id, e] : examples_) {
      ids.push_back(id);
      flat.insert(flat.end(), e.embedding.begin(), e.embedding.end());
    }
  }

  // ------------------------------------------------------------------
  // JSONL persistence. One object per line with fields:
  //   id, request, response, embedding, quality, freq, gain, kv, ts
  // kv is the blob size in bytes (0 = plaintext); ts is created_at.

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    std::shared_lock lk(mu_);
    for (const auto& [id, e] : examples_) {
      nlohmann::json j;
      j["id"] = e.id;
      j["request"] = e.request_text;
      j["response"] = e.response_text;
      j["embedding"] = e.embedding;
      j["quality"] = e.quality;
      j["freq"] = e.freq;
      j["gain"] = e.gain;
      j["kv"] = e.kv_status.size_bytes;
      j["ts"] = e.created_at;
      out << j.dump() << "\n";
    }
  }

 private:
  // Caller holds the writer lock.
  void evict_lowest_utility_locked() {
    if (examples_.empty()) return;
    ExampleId victim = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, e] : examples_) {
      const double utility = e.gain * e.freq;
      if (utility < best) {  // ties resolve to the smallest id via map order
        best = utility;
        victim = id;
      }
    }
    auto it = examples_.find(victim);
    auto key_it = by_text_.find(normalize_whitespace(it->second.request_text));
    if (key_it != by_text_.end() && key_it->second == victim) by_text_.erase(key_it);
    examples_.erase(it);
  }

  StoreConfig cfg_;
  mutable std::shared_mutex mu_;
  std::map<ExampleId, Example> examples_;
  std::unordered_map<std::string, ExampleId> by_text_;
  ExampleId next_id_ = 1;
};

struct StoreLoadResult {
  ExampleStore store;
  std::size_t skipped = 0;
};

inline StoreLoadResult load_store(const std::string& path, StoreConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  StoreLoadResult result{ExampleStore(cfg), 0};
  std::string line;
  while (std::getline(in, line)) {
    if (detail::strip(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example e;
      e.id = j.at("id").get<ExampleId>();
      e.request_text = j.at("request").get<std::string>();
      e.response_text = j.at("response").get<std::string>();
      e.embedding = j.at("embedding").get<std::vector<float>>();
      e.quality = j.at("quality").get<double>();
      e.freq = j.at("freq").get<double>();
      e.gain = j.at("gain").get<double>();
      e.kv_status.size_bytes = j.at("kv").get<std::uint64_t>();
      e.created_at = j.at("ts").get<double>();
      e.last_decay_at = e.created_at;
      e.cacheable = true;
      if (!result.store.insert(std::move(e))) ++result.skipped;
    } catch (const std::exception&) {
      ++result.skipped;
    }
  }
  return result;
}

}  // namespace echolm
