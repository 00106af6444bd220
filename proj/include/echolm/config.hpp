#pragma once
// Configuration for all components. The on-disk format is a TOML-compatible
// subset: [section] headers (dotted names allowed), `key = value` lines with
// string/int/float/bool/array values, and `#` comments.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "echolm/common.hpp"

namespace echolm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Raw key-value tree

class ConfigTable {
 public:
  using Value = std::variant<std::string, std::int64_t, double, bool,
                             std::vector<std::int64_t>, std::vector<double>>;

  void set(const std::string& section, const std::string& key, Value v) {
    values_[section + "." + key] = std::move(v);
  }

  bool has(const std::string& full_key) const { return values_.count(full_key) > 0; }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (auto* d = std::get_if<double>(&it->second)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw ConfigError("expected number for " + key);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    throw ConfigError("expected integer for " + key);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (auto* b = std::get_if<bool>(&it->second)) return *b;
    throw ConfigError("expected bool for " + key);
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw ConfigError("expected string for " + key);
  }

  std::vector<std::int64_t> get_int_array(const std::string& key,
                                          std::vector<std::int64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (auto* a = std::get_if<std::vector<std::int64_t>>(&it->second)) return *a;
    throw ConfigError("expected integer array for " + key);
  }

  static ConfigTable parse(std::istream& in);
  static ConfigTable parse_string(const std::string& text) {
    std::istringstream ss(text);
    return parse(ss);
  }
  static ConfigTable parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    return parse(f);
  }

 private:
  std::map<std::string, Value> values_;
};

namespace detail {

inline std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline ConfigTable::Value parse_scalar(const std::string& raw, int line_no) {
  if (raw.empty()) throw ConfigError("empty value at line " + std::to_string(line_no));
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw ConfigError("unterminated string at line " + std::to_string(line_no));
    return raw.substr(1, raw.size() - 2);
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  const bool is_float = raw.find_first_of(".eE") != std::string::npos &&
                        raw.find_first_not_of("+-0123456789.eE") == std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      double d = std::stod(raw, &used);
      if (used == raw.size()) return d;
    } else {
      std::int64_t i = std::stoll(raw, &used, 10);
      if (used == raw.size()) return i;
      double d = std::stod(raw, &used);
      if (used == raw.size()) return d;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse value '" + raw + "' at line " + std::to_string(line_no));
}

}  // namespace detail

inline ConfigTable ConfigTable::parse(std::istream& in) {
  ConfigTable table;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside of strings.
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line.resize(i);
        break;
      }
    }
    const std::string t = detail::strip(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("malformed section header at line " + std::to_string(line_no));
      section = detail::strip(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("empty section name at line " + std::to_string(line_no));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(line_no));
    const std::string key = detail::strip(t.substr(0, eq));
    const std::string raw = detail::strip(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(line_no));
    if (section.empty()) throw ConfigError("key outside section at line " + std::to_string(line_no));
    if (!raw.empty() && raw.front() == '[') {
      if (raw.back() != ']')
        throw ConfigError("unterminated array at line " + std::to_string(line_no));
      std::vector<std::int64_t> ints;
      std::vector<double> doubles;
      bool any_double = false;
      std::string body = raw.substr(1, raw.size() - 2);
      std::stringstream items(body);
      std::string item;
      while (std::getline(items, item, ',')) {
        const std::string v = detail::strip(item);
        if (v.empty()) continue;
        auto sv = detail::parse_scalar(v, line_no);
        if (auto* i = std::get_if<std::int64_t>(&sv)) {
          ints.push_back(*i);
          doubles.push_back(static_cast<double>(*i));
        } else if (auto* d = std::get_if<double>(&sv)) {
          any_double = true;
          doubles.push_back(*d);
        } else {
          throw ConfigError("array elements must be numeric at line " + std::to_string(line_no));
        }
      }
      if (any_double)
        table.set(section, key, doubles);
      else
        table.set(section, key, ints);
      continue;
    }
    table.set(section, key, detail::parse_scalar(raw, line_no));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Typed per-module configuration

struct StoreConfig {
  std::size_t max_examples = 100000;
  double decay_factor = 0.9;       // applied once per whole decay interval
  double decay_interval_s = 3600;  // one hour
  std::size_t embedding_dim = 64;
  std::size_t bytes_per_token_per_layer = 512;
  std::size_t layers = 32;

  std::size_t kv_bytes_per_token() const { return bytes_per_token_per_layer * layers; }

  void validate() const {
    if (decay_factor <= 0.0 || decay_factor >= 1.0)
      throw ConfigError("store.decay_factor must be in (0, 1)");
    if (decay_interval_s <= 0.0) throw ConfigError("store.decay_interval_s must be > 0");
    if (embedding_dim == 0) throw ConfigError("store.embedding_dim must be > 0");
  }
};

struct RetrieverConfig {
  std::size_t n_pre = 32;   // candidates surviving relevance pre-selection
  std::size_t probes = 3;   // centroids probed per query
  std::vector<int> m_candidates = {0, 1, 3, 5, 8};
  double diversity_threshold = 0.95;
  std::size_t tuning_period = 1000;
  double lambda_latency = 0.3;
  double latency_norm_ms = 2000.0;
  double explore_rate = 0.1;  // chance of trying a non-incumbent example count
  std::size_t rebuild_every = 10000;
  std::size_t train_sample_cap = 20000;  // k-means fits on at most this many points
  std::size_t kmeans_max_iters = 25;
  double kmeans_tol = 1e-4;
  double len_norm_tokens = 512.0;  // length-feature normalizer
  // Proxy model training.
  std::size_t train_epochs = 200;
  double train_lr = 0.05;
  double train_l2 = 1e-4;
  int default_m = 5;

  void validate() const {
    if (n_pre == 0) throw ConfigError("retriever.n_pre must be >= 1");
    if (probes == 0) throw ConfigError("retriever.probes must be >= 1");
    if (m_candidates.empty()) throw ConfigError("retriever.m_candidates must be non-empty");
    if (diversity_threshold <= 0.0 || diversity_threshold > 1.0)
      throw ConfigError("retriever.diversity_threshold must be in (0, 1]");
  }
};

struct RouterConfig {
  double epsilon = 0.05;
  double w_q = 1.0;
  double w_c = 0.5;
  double w_p = 1.0;
  double tau = 1.5;
  double beta = 0.5;
  double load_threshold = 0.7;
  std::size_t batch = 64;            // feedbacks per mini-batch step
  std::size_t buffer_capacity = 10000;
  std::size_t bootstrap_epochs = 300;
  double bootstrap_lr = 0.1;
  double l2 = 1e-4;
  double online_lr = 0.05;
  double n_examples_norm = 8.0;
  double len_norm_tokens = 512.0;

  void validate() const {
    if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("router.epsilon must be in [0, 1]");
    if (buffer_capacity == 0) throw ConfigError("router.buffer_capacity must be >= 1");
    if (batch == 0) throw ConfigError("router.batch must be >= 1");
  }
};

struct ManagerConfig {
  std::size_t n_samples = 4;  // distillation candidates per replay
  std::size_t top_k = 5;      // neighbors for companion gain
  double alpha = 0.2;         // gain EMA factor
  std::uint64_t kv_budget_bytes = 256ull * 1024 * 1024;
  double compute_ms_per_token = 0.5;
  double io_ms_per_token = 0.1;
  double offpeak_load_threshold = 0.5;
  double replan_period_s = 600.0;
  std::size_t task_budget = 32;  // replay tasks per planning round

  void validate() const {
    if (n_samples < 2) throw ConfigError("manager.n_samples must be >= 2");
    if (top_k == 0) throw ConfigError("manager.top_k must be >= 1");
    if (alpha <= 0.0 || alpha > 1.0) throw ConfigError("manager.alpha must be in (0, 1]");
    if (compute_ms_per_token <= io_ms_per_token)
      throw ConfigError("manager.compute_ms_per_token must exceed io_ms_per_token");
  }
};

enum class BackendKind { SyntheticSmall, SyntheticLarge, Remote };

struct BackendSpec {
  std::string name;
  BackendKind kind = BackendKind::SyntheticSmall;
  double cost_per_token = 1.0;  // normalized
  double prefill_ms_per_token = 0.2;
  double decode_ms_per_token = 1.0;
  double base_quality_mean = 0.55;
  double base_quality_sigma = 0.08;
  double example_utility_coeff = 0.0;  // synthetic only
  double mean_output_tokens = 64.0;
  double output_tokens_sigma = 16.0;
  std::string endpoint_url;  // remote only

  void validate() const {
    if (prefill_ms_per_token <= 0.0 || decode_ms_per_token <= 0.0)
      throw ConfigError("backend latency slopes must be > 0");
    if (cost_per_token <= 0.0) throw ConfigError("backend cost_per_token must be > 0");
  }
};

struct GatewayConfig {
  std::size_t capacity = 8;  // concurrent in-flight requests
  std::size_t context_limit_tokens = 8192;
  double feedback_fraction = 0.1;
  bool examples_for_large = false;
  double stage_timeout_ms = 50.0;  // simulated cost of a failed stage
  double lookup_ms = 0.5;
  double retrieve_ms = 2.0;
  double route_ms = 0.5;
  std::size_t max_output_tokens = 256;
  // Fault injection for bypass testing: probability each stage fails.
  double inject_retriever_fault = 0.0;
  double inject_router_fault = 0.0;
  BackendSpec small;
  BackendSpec large;

  GatewayConfig() {
    small.name = "small";
    small.kind = BackendKind::SyntheticSmall;
    small.cost_per_token = 1.0;
    small.prefill_ms_per_token = 0.2;
    small.decode_ms_per_token = 1.0;
    small.base_quality_mean = 0.55;
    small.example_utility_coeff = 0.25;
    large.name = "large";
    large.kind = BackendKind::SyntheticLarge;
    large.cost_per_token = 4.0;
    large.prefill_ms_per_token = 0.6;
    large.decode_ms_per_token = 3.0;
    large.base_quality_mean = 0.75;
    large.example_utility_coeff = 0.0;
  }

  void validate() const {
    if (capacity == 0) throw ConfigError("gateway.capacity must be >= 1");
    if (feedback_fraction < 0.0 || feedback_fraction > 1.0)
      throw ConfigError("gateway.feedback_fraction must be in [0, 1]");
    small.validate();
    large.validate();
    if (large.cost_per_token <= small.cost_per_token)
      throw ConfigError("gateway.large cost must exceed small cost");
  }
};

enum class ArrivalKind { Poisson, Bursty };

struct SimConfig {
  // Workload shape.
  std::size_t n_topics = 50;
  double topic_zipf_s = 0.9;
  double band_low = 0.8;
  double band_high = 0.98;
  double repeat_fraction = 0.15;  // chance a request reuses a previous text verbatim
  double hard_topic_fraction = 0.0;
  std::size_t min_request_tokens = 12;
  std::size_t max_request_tokens = 96;
  ArrivalKind arrival = ArrivalKind::Poisson;
  double rate_per_s = 20.0;
  double peak_multiplier = 25.0;
  double period_s = 240.0;   // one full minute bucket fits inside the peak window
  double peak_fraction = 0.25;
  double duration_s = 300.0;
  std::uint64_t seed = 42;
  // Judging.
  double judge_tie_band = 0.3;
  double judge_noise_sigma = 0.0;
  double judge_fraction = 1.0;
  // Experiment setup.
  std::size_t preload_examples = 2000;
  std::size_t bootstrap_rows = 2000;
  bool online_updates = true;
  double offload_target = -1.0;  // <0 disables calibration
  bool run_replay = true;

  void validate() const {
    if (rate_per_s <= 0.0) throw ConfigError("sim.rate_per_s must be > 0");
    if (peak_multiplier < 1.0) throw ConfigError("sim.peak_multiplier must be >= 1");
    if (duration_s <= 0.0) throw ConfigError("sim.duration_s must be > 0");
    if (band_low > band_high || band_low < -1.0 || band_high > 1.0)
      throw ConfigError("sim paraphrase band must satisfy -1 <= low <= high <= 1");
    if (n_topics == 0) throw ConfigError("sim.n_topics must be >= 1");
  }
};

struct Config {
  StoreConfig store;
  RetrieverConfig retriever;
  RouterConfig router;
  ManagerConfig manager;
  GatewayConfig gateway;
  SimConfig sim;
  std::string store_load_path;
  std::string store_save_path;

  void validate() const {
    store.validate();
    retriever.validate();
    router.validate();
    manager.validate();
    gateway.validate();
    sim.validate();
  }
};

namespace detail {

inline void read_backend(const ConfigTable& t, const std::string& prefix, BackendSpec& b) {
  const std::string kind = t.get_string(prefix + ".kind", "");
  if (kind == "synthetic_small") b.kind = BackendKind::SyntheticSmall;
  else if (kind == "synthetic_large") b.kind = BackendKind::SyntheticLarge;
  else if (kind == "remote") b.kind = BackendKind::Remote;
  else if (!kind.empty()) throw ConfigError("unknown backend kind: " + kind);
  b.cost_per_token = t.get_double(prefix + ".cost_per_token", b.cost_per_token);
  b.prefill_ms_per_token = t.get_double(prefix + ".prefill_ms_per_token", b.prefill_ms_per_token);
  b.decode_ms_per_token = t.get_double(prefix + ".decode_ms_per_token", b.decode_ms_per_token);
  b.base_quality_mean = t.get_double(prefix + ".quality_mean", b.base_quality_mean);
  b.base_quality_sigma = t.get_double(prefix + ".quality_sigma", b.base_quality_sigma);
  b.example_utility_coeff = t.get_double(prefix + ".example_utility_coeff", b.example_utility_coeff);
  b.mean_output_tokens = t.get_double(prefix + ".mean_output_tokens", b.mean_output_tokens);
  b.output_tokens_sigma = t.get_double(prefix + ".output_tokens_sigma", b.output_tokens_sigma);
  b.endpoint_url = t.get_string(prefix + ".endpoint_url", b.endpoint_url);
}

}  // namespace detail

inline Config load_config(const ConfigTable& t) {
  Config c;
  auto& st = c.store;
  st.max_examples = static_cast<std::size_t>(t.get_int("store.max_examples", st.max_examples));
  st.decay_factor = t.get_double("store.decay_factor", st.decay_factor);
  st.decay_interval_s = t.get_double("store.decay_interval_s", st.decay_interval_s);
  st.embedding_dim = static_cast<std::size_t>(t.get_int("store.embedding_dim", st.embedding_dim));
  st.bytes_per_token_per_layer = static_cast<std::size_t>(
      t.get_int("store.bytes_per_token_per_layer", st.bytes_per_token_per_layer));
  st.layers = static_cast<std::size_t>(t.get_int("store.layers", st.layers));
  c.store_load_path = t.get_string("store.load_path", "");
  c.store_save_path = t.get_string("store.save_path", "");

  auto& r = c.retriever;
  r.n_pre = static_cast<std::size_t>(t.get_int("retriever.n_pre", r.n_pre));
  r.probes = static_cast<std::size_t>(t.get_int("retriever.p", t.get_int("retriever.probes", r.probes)));
  {
    std::vector<std::int64_t> def(r.m_candidates.begin(), r.m_candidates.end());
    auto got = t.get_int_array("retriever.m_candidates", def);
    r.m_candidates.assign(got.begin(), got.end());
  }
  r.diversity_threshold = t.get_double("retriever.diversity_threshold", r.diversity_threshold);
  r.tuning_period = static_cast<std::size_t>(t.get_int("retriever.tuning_period", r.tuning_period));
  r.lambda_latency = t.get_double("retriever.lambda_latency", r.lambda_latency);
  r.latency_norm_ms = t.get_double("retriever.latency_norm_ms", r.latency_norm_ms);
  r.explore_rate = t.get_double("retriever.explore_rate", r.explore_rate);
  r.rebuild_every = static_cast<std::size_t>(t.get_int("retriever.rebuild_every", r.rebuild_every));
  r.train_sample_cap =
      static_cast<std::size_t>(t.get_int("retriever.train_sample_cap", r.train_sample_cap));
  r.kmeans_max_iters =
      static_cast<std::size_t>(t.get_int("retriever.kmeans_max_iters", r.kmeans_max_iters));
  r.kmeans_tol = t.get_double("retriever.kmeans_tol", r.kmeans_tol);
  r.len_norm_tokens = t.get_double("retriever.len_norm_tokens", r.len_norm_tokens);
  r.train_epochs = static_cast<std::size_t>(t.get_int("retriever.train_epochs", r.train_epochs));
  r.train_lr = t.get_double("retriever.train_lr", r.train_lr);
  r.train_l2 = t.get_double("retriever.train_l2", r.train_l2);
  r.default_m = static_cast<int>(t.get_int("retriever.default_m", r.default_m));

  auto& ro = c.router;
  ro.epsilon = t.get_double("router.epsilon", ro.epsilon);
  ro.w_q = t.get_double("router.w_q", ro.w_q);
  ro.w_c = t.get_double("router.w_c", ro.w_c);
  ro.w_p = t.get_double("router.w_p", ro.w_p);
  ro.tau = t.get_double("router.tau", ro.tau);
  ro.beta = t.get_double("router.beta", ro.beta);
  ro.load_threshold = t.get_double("router.load_threshold", ro.load_threshold);
  ro.batch = static_cast<std::size_t>(t.get_int("router.batch", ro.batch));
  ro.buffer_capacity =
      static_cast<std::size_t>(t.get_int("router.buffer_capacity", ro.buffer_capacity));
  ro.bootstrap_epochs =
      static_cast<std::size_t>(t.get_int("router.bootstrap_epochs", ro.bootstrap_epochs));
  ro.bootstrap_lr = t.get_double("router.bootstrap_lr", ro.bootstrap_lr);
  ro.l2 = t.get_double("router.l2", ro.l2);
  ro.online_lr = t.get_double("router.online_lr", ro.online_lr);
  ro.n_examples_norm = t.get_double("router.n_examples_norm", ro.n_examples_norm);
  ro.len_norm_tokens = t.get_double("router.len_norm_tokens", ro.len_norm_tokens);

  auto& m = c.manager;
  m.n_samples = static_cast<std::size_t>(t.get_int("manager.n_samples", m.n_samples));
  m.top_k = static_cast<std::size_t>(t.get_int("manager.top_k", m.top_k));
  m.alpha = t.get_double("manager.alpha", m.alpha);
  m.kv_budget_bytes =
      static_cast<std::uint64_t>(t.get_int("manager.kv_budget_bytes", m.kv_budget_bytes));
  m.compute_ms_per_token = t.get_double("manager.compute_ms_per_token", m.compute_ms_per_token);
  m.io_ms_per_token = t.get_double("manager.io_ms_per_token", m.io_ms_per_token);
  m.offpeak_load_threshold =
      t.get_double("manager.offpeak_load_threshold", m.offpeak_load_threshold);
  m.replan_period_s = t.get_double("manager.replan_period_s", m.replan_period_s);
  m.task_budget = static_cast<std::size_t>(t.get_int("manager.task_budget", m.task_budget));

  auto& g = c.gateway;
  g.capacity = static_cast<std::size_t>(t.get_int("gateway.capacity", g.capacity));
  g.context_limit_tokens =
      static_cast<std::size_t>(t.get_int("gateway.context_limit_tokens", g.context_limit_tokens));
  g.feedback_fraction = t.get_double("gateway.feedback_fraction", g.feedback_fraction);
  g.examples_for_large = t.get_bool("gateway.examples_for_large", g.examples_for_large);
  g.stage_timeout_ms = t.get_double("gateway.stage_timeout_ms", g.stage_timeout_ms);
  g.lookup_ms = t.get_double("gateway.lookup_ms", g.lookup_ms);
  g.retrieve_ms = t.get_double("gateway.retrieve_ms", g.retrieve_ms);
  g.route_ms = t.get_double("gateway.route_ms", g.route_ms);
  g.max_output_tokens =
      static_cast<std::size_t>(t.get_int("gateway.max_output_tokens", g.max_output_tokens));
  g.inject_retriever_fault =
      t.get_double("gateway.inject_retriever_fault", g.inject_retriever_fault);
  g.inject_router_fault = t.get_double("gateway.inject_router_fault", g.inject_router_fault);
  detail::read_backend(t, "gateway.small", g.small);
  detail::read_backend(t, "gateway.large", g.large);

  auto& s = c.sim;
  s.n_topics = static_cast<std::size_t>(t.get_int("sim.n_topics", s.n_topics));
  s.topic_zipf_s = t.get_double("sim.topic_zipf_s", s.topic_zipf_s);
  s.band_low = t.get_double("sim.band_low", s.band_low);
  s.band_high = t.get_double("sim.band_high", s.band_high);
  s.repeat_fraction = t.get_double("sim.repeat_fraction", s.repeat_fraction);
  s.hard_topic_fraction = t.get_double("sim.hard_topic_fraction", s.hard_topic_fraction);
  s.min_request_tokens =
      static_cast<std::size_t>(t.get_int("sim.min_request_tokens", s.min_request_tokens));
  s.max_request_tokens =
      static_cast<std::size_t>(t.get_int("sim.max_request_tokens", s.max_request_tokens));
  {
    const std::string a = t.get_string("sim.arrival", "poisson");
    if (a == "poisson") s.arrival = ArrivalKind::Poisson;
    else if (a == "bursty") s.arrival = ArrivalKind::Bursty;
    else throw ConfigError("unknown sim.arrival: " + a);
  }
  s.rate_per_s = t.get_double("sim.rate_per_s", s.rate_per_s);
  s.peak_multiplier = t.get_double("sim.peak_multiplier", s.peak_multiplier);
  s.period_s = t.get_double("sim.period_s", s.period_s);
  s.peak_fraction = t.get_double("sim.peak_fraction", s.peak_fraction);
  s.duration_s = t.get_double("sim.duration_s", s.duration_s);
  s.seed = static_cast<std::uint64_t>(t.get_int("sim.seed", static_cast<std::int64_t>(s.seed)));
  s.judge_tie_band = t.get_double("sim.judge_tie_band", s.judge_tie_band);
  s.judge_noise_sigma = t.get_double("sim.judge_noise_sigma", s.judge_noise_sigma);
  s.judge_fraction = t.get_double("sim.judge_fraction", s.judge_fraction);
  s.preload_examples =
      static_cast<std::size_t>(t.get_int("sim.preload_examples", s.preload_examples));
  s.bootstrap_rows = static_cast<std::size_t>(t.get_int("sim.bootstrap_rows", s.bootstrap_rows));
  s.online_updates = t.get_bool("sim.online_updates", s.online_updates);
  s.offload_target = t.get_double("sim.offload_target", s.offload_target);
  s.run_replay = t.get_bool("sim.run_replay", s.run_replay);

  c.validate();
  return c;
}

inline Config load_config_file(const std::string& path) {
  return load_config(ConfigTable::parse_file(path));
}

}  // namespace echolm
