#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "echolm/common.hpp"

namespace echolm {

// One candidate for KV-cache residency. weight is the serialized cache size
// in bytes; value is the latency saved per window if the entry stays resident.
struct KnapsackItem {
  ExampleId example_id = 0;
  std::uint64_t weight_bytes = 0;
  double value = 0.0;
};

struct KnapsackSolution {
  std::vector<std::size_t> chosen;  // indices into the input list, ascending
  double total_value = 0.0;
  std::uint64_t total_weight_units = 0;
  bool exact = false;
};

// Weights are rounded up to 4 KiB allocation units and the budget rounded
// down, so unit-level feasibility implies byte-level feasibility.
inline constexpr std::uint64_t kKvQuantumBytes = 4096;
inline constexpr std::size_t kDpMaxItems = 10000;
inline constexpr std::uint64_t kDpMaxCapacityUnits = 1ull << 20;

inline std::uint64_t quantize_weight(std::uint64_t bytes) {
  return (bytes + kKvQuantumBytes - 1) / kKvQuantumBytes;
}

inline std::uint64_t quantize_budget(std::uint64_t bytes) { return bytes / kKvQuantumBytes; }

namespace detail {

inline void validate_items(const std::vector<KnapsackItem>& items) {
  for (const auto& it : items) {
    if (it.weight_bytes == 0) throw std::invalid_argument("knapsack item with zero weight");
    if (it.value < 0.0) throw std::invalid_argument("knapsack item with negative value");
  }
}

// Indices of items that individually fit, with their quantized weights.
struct Prepared {
  std::vector<std::size_t> idx;
  std::vector<std::uint64_t> units;
  std::vector<double> values;
  std::uint64_t total_units = 0;
};

inline Prepared prepare(const std::vector<KnapsackItem>& items, std::uint64_t capacity_units) {
  Prepared p;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::uint64_t u = quantize_weight(items[i].weight_bytes);
    if (u > capacity_units) continue;
    p.idx.push_back(i);
    p.units.push_back(u);
    p.values.push_back(items[i].value);
    p.total_units += u;
  }
  return p;
}

inline void finish(const Prepared& p, std::vector<std::size_t> local, KnapsackSolution& out) {
  std::sort(local.begin(), local.end());
  for (const std::size_t j : local) {
    out.chosen.push_back(p.idx[j]);
    out.total_value += p.values[j];
    out.total_weight_units += p.units[j];
  }
}

inline void slice_dp(const Prepared& p, std::size_t lo, std::size_t hi, std::uint64_t cap,
                     std::vector<double>& dp) {
  dp.assign(static_cast<std::size_t>(cap) + 1, 0.0);
  for (std::size_t j = lo; j < hi; ++j) {
    const std::uint64_t u = p.units[j];
    const double v = p.values[j];
    for (std::uint64_t w = cap; w >= u; --w) {
      const double cand = dp[static_cast<std::size_t>(w - u)] + v;
      if (cand > dp[static_cast<std::size_t>(w)]) dp[static_cast<std::size_t>(w)] = cand;
      if (w == u) break;
    }
  }
}

// Divide-and-conquer reconstruction keeps memory at O(capacity) instead of
// materializing a keep-bit table over items x capacity.
inline void dp_reconstruct(const Prepared& p, std::size_t lo, std::size_t hi, std::uint64_t cap,
                           std::vector<std::size_t>& local) {
  if (lo >= hi || cap == 0) return;
  if (hi - lo == 1) {
    if (p.units[lo] <= cap && p.values[lo] > 0.0) local.push_back(lo);
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> left, right;
  slice_dp(p, lo, mid, cap, left);
  slice_dp(p, mid, hi, cap, right);
  std::uint64_t split = 0;
  double best = -1.0;
  for (std::uint64_t w = 0; w <= cap; ++w) {
    const double v = left[static_cast<std::size_t>(w)] + right[static_cast<std::size_t>(cap - w)];
    if (v > best) {
      best = v;
      split = w;
    }
  }
  left.clear();
  left.shrink_to_fit();
  right.clear();
  right.shrink_to_fit();
  dp_reconstruct(p, lo, mid, split, local);
  dp_reconstruct(p, mid, hi, cap - split, local);
}

}  // namespace detail

inline KnapsackSolution solve_exact_dp(const std::vector<KnapsackItem>& items,
                                       std::uint64_t capacity_units) {
  detail::validate_items(items);
  KnapsackSolution out;
  out.exact = true;
  const auto p = detail::prepare(items, capacity_units);
  std::vector<std::size_t> local;
  if (p.total_units <= capacity_units) {
    local.resize(p.idx.size());
    for (std::size_t j = 0; j < local.size(); ++j) local[j] = j;
  } else {
    detail::dp_reconstruct(p, 0, p.idx.size(), capacity_units, local);
  }
  detail::finish(p, std::move(local), out);
  return out;
}

inline KnapsackSolution solve_greedy_swap(const std::vector<KnapsackItem>& items,
                                          std::uint64_t capacity_units) {
  detail::validate_items(items);
  KnapsackSolution out;
  out.exact = false;
  const auto p = detail::prepare(items, capacity_units);
  const std::size_t n = p.idx.size();
  if (p.total_units <= capacity_units) {
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;
    detail::finish(p, std::move(all), out);
    return out;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = p.values[a] * static_cast<double>(p.units[b]);
    const double db = p.values[b] * static_cast<double>(p.units[a]);
    if (da != db) return da > db;  // density, cross-multiplied
    if (p.values[a] != p.values[b]) return p.values[a] > p.values[b];
    return a < b;
  });

  std::vector<bool> selected(n, false);
  std::uint64_t used = 0;
  for (const std::size_t j : order) {
    if (used + p.units[j] <= capacity_units && p.values[j] > 0.0) {
      selected[j] = true;
      used += p.units[j];
    }
  }

  // One swap pass: each skipped item either squeezes in or displaces the
  // cheapest selected item it strictly improves on.
  for (const std::size_t j : order) {
    if (selected[j] || p.values[j] <= 0.0) continue;
    if (used + p.units[j] <= capacity_units) {
      selected[j] = true;
      used += p.units[j];
      continue;
    }
    std::size_t victim = n;
    double best_gain = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (!selected[s]) continue;
      if (used - p.units[s] + p.units[j] > capacity_units) continue;
      const double gain = p.values[j] - p.values[s];
      if (gain > best_gain) {
        best_gain = gain;
        victim = s;
      }
    }
    if (victim < n) {
      selected[victim] = false;
      selected[j] = true;
      used += p.units[j] - p.units[victim];
    }
  }

  std::vector<std::size_t> local;
  for (std::size_t j = 0; j < n; ++j)
    if (selected[j]) local.push_back(j);
  detail::finish(p, std::move(local), out);
  return out;
}

// Binary caching decision per item. The exact program runs whenever the
// instance is small enough; larger instances fall back to the heuristic.
inline KnapsackSolution solve_knapsack(const std::vector<KnapsackItem>& items,
                                       std::uint64_t budget_bytes) {
  const std::uint64_t cap = quantize_budget(budget_bytes);
  if (items.size() <= kDpMaxItems && cap <= kDpMaxCapacityUnits)
    return solve_exact_dp(items, cap);
  return solve_greedy_swap(items, cap);
}

inline std::vector<ExampleId> select_kv_cached(const std::vector<KnapsackItem>& items,
                                               std::uint64_t budget_bytes) {
  const auto sol = solve_knapsack(items, budget_bytes);
  std::vector<ExampleId> ids;
  ids.reserve(sol.chosen.size());
  for (const std::size_t i : sol.chosen) ids.push_back(items[i].example_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace echolm
