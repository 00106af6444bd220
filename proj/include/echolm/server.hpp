#pragma once

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "echolm/backend.hpp"
#include "echolm/config.hpp"
#include "echolm/gateway.hpp"
#include "echolm/manager.hpp"

namespace echolm {

// Model proxy speaking the plain completion protocol:
// POST /v1/generate {"prompt", "max_tokens"} -> {"text", "tokens"}.
// Latency is wall-clock; ttft equals total because the protocol is not
// streamed. Quality is unknowable over the wire, so a neutral 0.5 is
// reported and judged metrics only mean something for synthetic runs.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendSpec spec) : Backend(std::move(spec)) {
    if (spec_.endpoint_url.empty())
      throw std::invalid_argument("remote backend needs endpoint_url");
  }

  GenerationResult generate(const GenerationRequest& req) override {
    if (!available_) throw BackendError(spec_.name + ": unavailable");
    httplib::Client cli(spec_.endpoint_url);
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(30, 0);
    nlohmann::json body{{"prompt", req.prompt},
                        {"max_tokens", static_cast<std::int64_t>(req.max_output_tokens)}};
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = cli.Post("/v1/generate", body.dump(), "application/json");
    const auto t1 = std::chrono::steady_clock::now();
    if (!res || res->status != 200)
      throw BackendError(spec_.name + ": endpoint error " +
                         (res ? std::to_string(res->status) : "no response"));
    GenerationResult out;
    try {
      const auto j = nlohmann::json::parse(res->body);
      out.text = j.at("text").get<std::string>();
      out.output_tokens = j.at("tokens").get<std::size_t>();
    } catch (const std::exception& e) {
      throw BackendError(spec_.name + ": malformed response: " + e.what());
    }
    out.quality = 0.5;
    out.total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.ttft_ms = out.total_ms;
    return out;
  }
};

inline std::shared_ptr<Backend> make_backend(const BackendSpec& spec, std::uint64_t seed) {
  if (spec.kind == BackendKind::Remote) return std::make_shared<RemoteBackend>(spec);
  return std::make_shared<SyntheticBackend>(spec, seed);
}

// Serves one synthetic model over the completion protocol. Intended for
// demos and tests of the remote path; the reported token count is the
// whitespace token count of the emitted text.
class BackendServer {
 public:
  explicit BackendServer(BackendSpec spec, std::uint64_t seed)
      : backend_(std::move(spec), seed) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(1); };
    server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto j = nlohmann::json::parse(req.body);
        GenerationRequest greq;
        greq.prompt = j.at("prompt").get<std::string>();
        greq.request_tokens = token_count(greq.prompt);
        greq.max_output_tokens = j.value("max_tokens", std::int64_t{256});
        GenerationResult gen;
        {
          std::lock_guard lk(mu_);
          gen = backend_.generate(greq);
        }
        nlohmann::json out{{"text", gen.text},
                           {"tokens", static_cast<std::int64_t>(gen.output_tokens)}};
        res.set_content(out.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }

  // Binds an ephemeral port and serves until stop(). Returns the port.
  int start() {
    const int port = server_.bind_to_any_port("127.0.0.1");
    if (port <= 0) throw std::runtime_error("cannot bind backend server");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  ~BackendServer() { stop(); }

 private:
  SyntheticBackend backend_;
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;
};

// HTTP front for a gateway stack:
//   POST /serve {"id", "text", "skip_cache"?} -> serve response JSON
//   GET  /healthz -> {"ok": true}
// Handlers run on a single-thread queue; the gateway itself is not
// internally synchronized. An optional background thread runs the manager's
// replay plan on its cadence, gated by the live load signal.
class GatewayServer {
 public:
  struct Stack {
    std::shared_ptr<ExampleStore> store;
    std::shared_ptr<TableEmbedder> embedder;
    std::shared_ptr<Retriever> retriever;
    std::shared_ptr<LinearBandit> router;
    std::shared_ptr<ExampleManager> manager;
    std::shared_ptr<Backend> small;
    std::shared_ptr<Backend> large;
    std::unique_ptr<Gateway> gateway;
  };

  static Stack build_stack(const Config& cfg, std::uint64_t seed) {
    Stack s;
    const std::size_t dim = cfg.store.embedding_dim;
    s.store = std::make_shared<ExampleStore>(cfg.store);
    s.embedder = std::make_shared<TableEmbedder>(dim, derive_seed(seed, "embedder"));
    s.retriever =
        std::make_shared<Retriever>(cfg.retriever, s.store, s.embedder, derive_seed(seed, "retriever"));
    s.router = std::make_shared<LinearBandit>(cfg.router, dim, derive_seed(seed, "router"));
    s.manager = std::make_shared<ExampleManager>(cfg.manager, cfg.store, s.store);
    s.small = make_backend(cfg.gateway.small, derive_seed(seed, "small-backend"));
    s.large = make_backend(cfg.gateway.large, derive_seed(seed, "large-backend"));
    if (!cfg.store_load_path.empty()) {
      auto loaded = load_store(cfg.store_load_path, cfg.store);
      for (auto& e : loaded.store.snapshot()) {
        s.embedder->assign(e.request_text, e.embedding);
        s.store->insert(std::move(e));
      }
      if (s.store->size() > 0) s.retriever->rebuild(0.0);
    }
    s.gateway = std::make_unique<Gateway>(cfg, GatewayMode::for_scenario("echolm"), s.store,
                                          s.retriever, s.router, s.manager, s.small, s.large, seed);
    return s;
  }

  GatewayServer(const Config& cfg, std::uint64_t seed)
      : cfg_(cfg), stack_(build_stack(cfg, seed)), started_at_(std::chrono::steady_clock::now()) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(1); };
    server_.Post("/serve", [this](const httplib::Request& req, httplib::Response& res) {
      handle_serve(req, res);
    });
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"ok", true}}.dump(), "application/json");
    });
  }

  ~GatewayServer() { stop(); }

  // Blocks until stop() when port > 0; with port 0 binds an ephemeral port,
  // serves on a thread, and returns that port.
  int start(int port) {
    start_replay_thread();
    if (port > 0) {
      if (!server_.listen("0.0.0.0", port))
        throw std::runtime_error("cannot bind port " + std::to_string(port));
      return port;
    }
    const int bound = server_.bind_to_any_port("127.0.0.1");
    if (bound <= 0) throw std::runtime_error("cannot bind gateway server");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  void stop() {
    stopping_ = true;
    replay_cv_wake();
    if (replay_thread_.joinable()) replay_thread_.join();
    server_.stop();
    if (thread_.joinable()) thread_.join();
    maybe_save_store();
  }

  Gateway& gateway() { return *stack_.gateway; }
  const ExampleStore& store() const { return *stack_.store; }

 private:
  void handle_serve(const httplib::Request& req, httplib::Response& res) {
    try {
      const auto j = nlohmann::json::parse(req.body);
      ServeRequest sr;
      sr.id = j.at("id").get<std::string>();
      sr.text = j.at("text").get<std::string>();
      sr.skip_cache = j.value("skip_cache", false);
      sr.arrival_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_at_)
                         .count();
      ServeResponse resp;
      {
        // One lock covers the gateway and everything it touches; the replay
        // thread takes the same lock before mutating shared components.
        std::lock_guard lk(gateway_mu_);
        resp = stack_.gateway->serve(sr);
      }
      nlohmann::json out{{"request_id", resp.request_id},
                         {"text", resp.text},
                         {"model_used", resp.model_used},
                         {"n_examples_used", static_cast<std::int64_t>(resp.n_examples_used)},
                         {"ttft_ms", resp.ttft_ms},
                         {"total_ms", resp.total_ms},
                         {"bypass", to_string(resp.bypass)}};
      if (resp.quality) out["quality"] = *resp.quality;
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  }

  void start_replay_thread() {
    if (!cfg_.sim.run_replay || replay_thread_.joinable()) return;
    replay_thread_ = std::thread([this] {
      while (!stopping_) {
        {
          std::unique_lock lk(replay_mu_);
          replay_cv_.wait_for(lk, std::chrono::duration<double>(cfg_.manager.replan_period_s),
                              [this] { return stopping_.load(); });
        }
        if (stopping_) return;
        const double now =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_at_).count();
        std::lock_guard lk(gateway_mu_);
        auto& g = *stack_.gateway;
        auto& m = *stack_.manager;
        m.enqueue(m.plan_optimization(stack_.retriever->index(), cfg_.manager.task_budget));
        const auto created = m.run_pending(*stack_.large, g.current_load(), now);
        for (const auto id : created)
          if (const auto e = stack_.store->get(id))
            stack_.retriever->on_insert(id, e->embedding, now);
        m.apply_kv_selection();
      }
    });
  }

  void replay_cv_wake() {
    std::lock_guard lk(replay_mu_);
    replay_cv_.notify_all();
  }

  void maybe_save_store() {
    if (cfg_.store_save_path.empty() || saved_) return;
    saved_ = true;
    stack_.store->save(cfg_.store_save_path);
  }

  Config cfg_;
  Stack stack_;
  std::chrono::steady_clock::time_point started_at_;
  httplib::Server server_;
  std::mutex gateway_mu_;
  std::thread thread_;
  std::thread replay_thread_;
  std::mutex replay_mu_;
  std::condition_variable replay_cv_;
  std::atomic<bool> stopping_{false};
  bool saved_ = false;
};

}  // namespace echolm
