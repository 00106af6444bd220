#pragma once
// Centroid-partitioned embedding index. Examples are clustered offline with
// spherical k-means into K = round(sqrt(N)) groups; queries probe the nearest
// few centroids and rank members by cosine. The index is immutable after
// build except for nearest-centroid appends, and is swapped out on rebuild.

#include <cstdint>
#include <optional>
#include <vector>

#include "echolm/common.hpp"
#include "echolm/config.hpp"
#include "echolm/example_store.hpp"

namespace echolm {

// Cluster count minimizing K + N/K lookups: K* = sqrt(N), rounded, >= 1.
inline std::size_t choose_k(std::size_t n) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return std::max<std::size_t>(1, k);
}

struct Neighbor {
  ExampleId id = 0;
  double cosine = 0.0;
};

struct KMeansStats {
  std::size_t iterations = 0;
  bool converged = false;
};

class ClusterIndex {
 public:
  ClusterIndex() = default;

  // Builds from parallel id/embedding arrays (row-major, ids ascending).
  // Large corpora are fit on a deterministic subsample capped by
  // cfg.train_sample_cap; the final assignment pass always covers every row.
  static ClusterIndex build(std::vector<ExampleId> ids, std::vector<float> data,
                            std::size_t dim, const RetrieverConfig& cfg,
                            std::uint64_t seed, double built_at = 0.0) {
    ClusterIndex ix;
    ix.dim_ = dim;
    ix.built_at_ = built_at;
    ix.ids_ = std::move(ids);
    ix.data_ = std::move(data);
    const std::size_t n = ix.ids_.size();
    if (ix.data_.size() != n * dim) throw std::invalid_argument("embedding matrix shape mismatch");
    if (n == 0) return ix;

    ix.k_ = choose_k(n);
    Rng rng(derive_seed(seed, "kmeans"));

    // Training subsample: all rows, or a partial Fisher-Yates draw.
    std::vector<std::size_t> sample(n);
    for (std::size_t i = 0; i < n; ++i) sample[i] = i;
    std::size_t s = n;
    if (n > cfg.train_sample_cap) {
      s = cfg.train_sample_cap;
      for (std::size_t i = 0; i < s; ++i) {
        const std::size_t j = i + rng.next_index(n - i);
        std::swap(sample[i], sample[j]);
      }
      sample.resize(s);
    }
    ix.k_ = std::min(ix.k_, s);  // never seed more centers than training points

    ix.seed_centroids(sample, rng);
    ix.stats_ = ix.lloyd(sample, cfg);
    ix.assign_all();
    return ix;
  }

  static ClusterIndex build_from_store(const ExampleStore& store, const RetrieverConfig& cfg,
                                       std::uint64_t seed, double built_at = 0.0) {
    std::vector<ExampleId> ids;
    std::vector<float> flat;
    store.export_embeddings(ids, flat);
    return build(std::move(ids), std::move(flat), store.config().embedding_dim, cfg, seed,
                 built_at);
  }

  // Probes the `probes` nearest centroids and returns the top n_pre members
  // by cosine, ties to the smaller id. Empty index yields an empty list.
  std::vector<Neighbor> preselect(std::span<const float> query, std::size_t probes,
                                  std::size_t n_pre) const {
    std::vector<Neighbor> out;
    if (k_ == 0 || n_pre == 0) return out;

    std::vector<std::pair<double, std::size_t>> ranked(k_);
    for (std::size_t c = 0; c < k_; ++c)
      ranked[c] = {dot(query, centroid(c)), c};
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    const std::size_t np = std::min(probes, k_);
    for (std::size_t p = 0; p < np; ++p)
      for (const std::size_t row : members_[ranked[p].second])
        out.push_back({ids_[row], dot(query, this->row(row))});

    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
      if (a.cosine != b.cosine) return a.cosine > b.cosine;
      return a.id < b.id;
    });
    if (out.size() > n_pre) out.resize(n_pre);
    return out;
  }

  // Appends a new example between rebuilds by nearest-centroid assignment.
  void add(ExampleId id, std::span<const float> emb) {
    if (emb.size() != dim_) throw std::invalid_argument("embedding dimension mismatch");
    if (k_ == 0) throw std::logic_error("cannot add to an empty index; rebuild instead");
    const std::size_t row = ids_.size();
    ids_.push_back(id);
    data_.insert(data_.end(), emb.begin(), emb.end());
    const std::size_t c = nearest_centroid(emb);
    members_[c].push_back(row);
    assignments_.push_back(static_cast<std::uint32_t>(c));
  }

  std::size_t k() const { return k_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  double built_at() const { return built_at_; }
  const KMeansStats& stats() const { return stats_; }

  std::span<const float> centroid(std::size_t c) const {
    return {centroids_.data() + c * dim_, dim_};
  }

  const std::vector<std::size_t>& cluster_members(std::size_t c) const { return members_[c]; }
  ExampleId id_at(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  // Cluster of an indexed example; nullopt when the id is not indexed.
  std::optional<std::size_t> assignment(ExampleId id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it != ids_.end() && *it == id)
      return assignments_[static_cast<std::size_t>(it - ids_.begin())];
    // Appends keep ids ascending in normal operation; fall back to a scan.
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (ids_[i] == id) return assignments_[i];
    return std::nullopt;
  }

 private:
  std::size_t nearest_centroid(std::span<const float> v) const {
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t c = 0; c < k_; ++c) {
      const double s = dot(v, centroid(c));
      if (s > best_cos) {
        best_cos = s;
        best = c;
      }
    }
    return best;
  }

  // k-means++ over the sample: squared chord distance 2 - 2cos weights the
  // draw of each next center.
  void seed_centroids(const std::vector<std::size_t>& sample, Rng& rng) {
    const std::size_t s = sample.size();
    centroids_.assign(k_ * dim_, 0.0f);
    std::vector<double> min_d2(s, 4.0);

    std::size_t first = sample[rng.next_index(s)];
    set_centroid(0, row(first));
    for (std::size_t c = 1; c < k_; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < s; ++i) {
        const double d2 = 2.0 - 2.0 * dot(row(sample[i]), centroid(c - 1));
        if (d2 < min_d2[i]) min_d2[i] = d2;
        total += min_d2[i];
      }
      std::size_t pick = 0;
      if (total <= 0.0) {
        pick = sample[rng.next_index(s)];  // all points coincide with centers
      } else {
        double target = rng.next_double() * total;
        std::size_t i = 0;
        for (; i + 1 < s; ++i) {
          target -= min_d2[i];
          if (target <= 0.0) break;
        }
        pick = sample[i];
      }
      set_centroid(c, row(pick));
    }
  }

  KMeansStats lloyd(const std::vector<std::size_t>& sample, const RetrieverConfig& cfg) {
    const std::size_t s = sample.size();
    std::vector<std::size_t> assign(s, 0);
    std::vector<double> sums(k_ * dim_, 0.0);
    std::vector<std::size_t> counts(k_, 0);
    KMeansStats st;

    for (std::size_t iter = 0; iter < cfg.kmeans_max_iters; ++iter) {
      st.iterations = iter + 1;
      for (std::size_t i = 0; i < s; ++i) assign[i] = nearest_centroid(row(sample[i]));

      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = 0; i < s; ++i) {
        const auto r = row(sample[i]);
        double* dst = sums.data() + assign[i] * dim_;
        for (std::size_t j = 0; j < dim_; ++j) dst[j] += r[j];
        ++counts[assign[i]];
      }

      // Empty clusters grab the point currently worst served, one each.
      std::vector<bool> claimed(s, false);
      for (std::size_t c = 0; c < k_; ++c) {
        if (counts[c] > 0) continue;
        double worst = 2.0;
        std::size_t worst_i = 0;
        for (std::size_t i = 0; i < s; ++i) {
          if (claimed[i]) continue;
          const double cs = dot(row(sample[i]), centroid(assign[i]));
          if (cs < worst) {
            worst = cs;
            worst_i = i;
          }
        }
        claimed[worst_i] = true;
        const auto r = row(sample[worst_i]);
        double* dst = sums.data() + c * dim_;
        for (std::size_t j = 0; j < dim_; ++j) dst[j] = r[j];
        counts[c] = 1;
      }

      double max_shift2 = 0.0;
      for (std::size_t c = 0; c < k_; ++c) {
        const double* src = sums.data() + c * dim_;
        double nrm = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) nrm += src[j] * src[j];
        nrm = std::sqrt(nrm);
        if (nrm <= 1e-12) continue;  // degenerate mean keeps the old centroid
        double shift2 = 0.0;
        float* dst = centroids_.data() + c * dim_;
        for (std::size_t j = 0; j < dim_; ++j) {
          const auto updated = static_cast<float>(src[j] / nrm);
          const double delta = static_cast<double>(updated) - dst[j];
          shift2 += delta * delta;
          dst[j] = updated;
        }
        max_shift2 = std::max(max_shift2, shift2);
      }
      if (std::sqrt(max_shift2) < cfg.kmeans_tol) {
        st.converged = true;
        break;
      }
    }
    return st;
  }

  // Every indexed row joins its nearest final centroid.
  void assign_all() {
    const std::size_t n = ids_.size();
    members_.assign(k_, {});
    assignments_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_centroid(row(i));
      members_[c].push_back(i);
      assignments_[i] = static_cast<std::uint32_t>(c);
    }
  }

  void set_centroid(std::size_t c, std::span<const float> v) {
    std::copy(v.begin(), v.end(), centroids_.begin() + c * dim_);
  }

  std::size_t dim_ = 0;
  std::size_t k_ = 0;
  double built_at_ = 0.0;
  std::vector<ExampleId> ids_;
  std::vector<float> data_;
  std::vector<float> centroids_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::uint32_t> assignments_;
  KMeansStats stats_;
};

}  // namespace echolm
