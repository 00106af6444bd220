#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "echolm/knapsack.hpp"
#include "echolm/metrics.hpp"
#include "echolm/server.hpp"
#include "echolm/sim.hpp"

namespace {

echolm::Config load_or_default(const std::string& path) {
  if (path.empty()) return echolm::Config{};
  return echolm::load_config_file(path);
}

int cmd_simulate(const std::string& config_path, const std::string& scenario, std::uint64_t seed,
                 const std::string& out_dir) {
  auto cfg = load_or_default(config_path);
  echolm::Simulation sim(cfg, scenario, seed);
  const auto res = sim.run();
  echolm::emit_report(res.report, res.records, out_dir);
  nlohmann::json line{{"scenario", scenario},
                      {"seed", seed},
                      {"n_requests", static_cast<std::int64_t>(res.report.n_requests)},
                      {"offload_rate", res.report.offload_rate},
                      {"cache_hit_rate", res.report.cache_hit_rate},
                      {"out", out_dir}};
  if (res.report.win_rate) line["win_rate"] = *res.report.win_rate;
  std::cout << line.dump() << "\n";
  return 0;
}

int cmd_serve(const std::string& config_path, int port, std::uint64_t seed) {
  auto cfg = load_or_default(config_path);
  echolm::GatewayServer server(cfg, seed);
  std::cerr << "listening on port " << port << "\n";
  server.start(port);  // blocks until the process is stopped
  return 0;
}

int cmd_replay_optimize(const std::string& config_path, std::uint64_t seed) {
  auto cfg = load_or_default(config_path);
  auto stack = echolm::GatewayServer::build_stack(cfg, seed);
  const auto plan =
      stack.manager->plan_optimization(stack.retriever->index(), cfg.manager.task_budget);
  stack.manager->enqueue(plan);
  const auto created = stack.manager->run_pending(*stack.large, 0.0, 0.0);
  for (const auto id : created)
    if (const auto e = stack.store->get(id)) stack.retriever->on_insert(id, e->embedding, 0.0);
  const auto kv = stack.manager->apply_kv_selection();
  if (!cfg.store_save_path.empty()) stack.store->save(cfg.store_save_path);

  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : plan) {
    tasks.push_back({{"kind", t.kind == echolm::ReplayKind::Distill ? "distill" : "expand"},
                     {"example_id", static_cast<std::int64_t>(t.target)},
                     {"priority", t.priority}});
  }
  nlohmann::json out{{"planned", tasks},
                     {"created_examples", static_cast<std::int64_t>(created.size())},
                     {"kv_cached", static_cast<std::int64_t>(kv.n_cached)},
                     {"kv_bytes_used", static_cast<std::int64_t>(kv.bytes_used)},
                     {"kv_demoted", static_cast<std::int64_t>(kv.demoted)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_bench_knapsack(std::size_t n_items, std::size_t trials, std::uint64_t seed) {
  using namespace echolm;
  Rng rng(seed);
  double worst_ratio = 1.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<KnapsackItem> items;
    items.reserve(n_items);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
      KnapsackItem it;
      it.example_id = i + 1;
      it.weight_bytes = (1 + rng.next_index(64)) * 4096ull;
      it.value = 1.0 + static_cast<double>(rng.next_index(1000));
      total += it.weight_bytes;
      items.push_back(it);
    }
    const std::uint64_t budget = total / 3;
    const auto cap = quantize_budget(budget);

    const auto t0 = std::chrono::steady_clock::now();
    const auto exact = solve_exact_dp(items, cap);
    const auto t1 = std::chrono::steady_clock::now();
    const auto greedy = solve_greedy_swap(items, cap);
    const auto t2 = std::chrono::steady_clock::now();

    const double ratio = exact.total_value > 0.0 ? greedy.total_value / exact.total_value : 1.0;
    worst_ratio = std::min(worst_ratio, ratio);
    nlohmann::json line{
        {"trial", trial},
        {"items", static_cast<std::int64_t>(n_items)},
        {"capacity_units", static_cast<std::int64_t>(cap)},
        {"exact_value", exact.total_value},
        {"greedy_value", greedy.total_value},
        {"greedy_ratio", ratio},
        {"exact_ms", std::chrono::duration<double, std::milli>(t1 - t0).count()},
        {"greedy_ms", std::chrono::duration<double, std::milli>(t2 - t1).count()}};
    std::cout << line.dump() << "\n";
  }
  std::cout << nlohmann::json{{"trials", trials}, {"worst_greedy_ratio", worst_ratio}}.dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echolm: in-context caching gateway and simulator"};
  app.require_subcommand(1);

  std::string config_path, scenario = "echolm", out_dir = "out";
  std::uint64_t seed = 42;
  int port = 8080;
  std::size_t items = 1000, trials = 5;

  auto* sim = app.add_subcommand("simulate", "run one scenario over a synthetic workload");
  sim->add_option("--config", config_path, "config file (key = value lines)");
  sim->add_option("--scenario", scenario,
                  "baseline_small | baseline_large | echolm | router_only | examples_only");
  sim->add_option("--seed", seed, "root seed for workload and components");
  sim->add_option("--out", out_dir, "output directory for summary.json and requests.csv");

  auto* srv = app.add_subcommand("serve", "serve the gateway over HTTP");
  srv->add_option("--config", config_path, "config file");
  srv->add_option("--port", port, "listen port");
  srv->add_option("--seed", seed, "component seed");

  auto* rep = app.add_subcommand("replay-optimize", "run the manager's replay plan once");
  rep->add_option("--config", config_path, "config file (store.load_path supplies the corpus)");
  rep->add_option("--seed", seed, "component seed");

  auto* bk = app.add_subcommand("bench-knapsack", "compare exact and greedy cache selection");
  bk->add_option("--items", items, "items per trial");
  bk->add_option("--trials", trials, "number of trials");
  bk->add_option("--seed", seed, "instance seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, scenario, seed, out_dir);
    if (srv->parsed()) return cmd_serve(config_path, port, seed);
    if (rep->parsed()) return cmd_replay_optimize(config_path, seed);
    if (bk->parsed()) return cmd_bench_knapsack(items, trials, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
