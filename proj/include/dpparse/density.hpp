#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "embedder.hpp"
#include "knn_index.hpp"

namespace dpparse {

struct DensityParams {
  std::size_t k = 100;
  double beta = 1.0;
  double epsilon_f = 1e-3;

  void validate() const {
    if (k < 1) throw Error("density: k must be >= 1");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("density: beta must be positive and finite");
    if (!(epsilon_f > 0.0 && epsilon_f < 1.0)) throw Error("density: epsilon_f must lie in (0, 1)");
  }
};

/// Soft count in [0, k].
using FrequencyEstimate = double;

/// Kernel sum over already retrieved neighbors, with the overlap rule applied.
inline FrequencyEstimate kernel_sum(const InstanceIndex &index, std::span<const Neighbor> neighbors,
                                    const Segment &query_seg, double beta) {
  double sum = 0.0;
  for (const auto &nb : neighbors) {
    if (index.provenance(nb.index).overlaps(query_seg)) continue;
    sum += std::exp(-beta * nb.sq_distance);
  }
  return sum;
}

/// Gaussian-kernel (Parzen window) sum over the k nearest neighbors of `query`.
/// Neighbors whose provenance overlaps `query_seg` in the same utterance are dropped
/// after retrieval, which also removes the query's own instance.
inline FrequencyEstimate estimate_frequency(const InstanceIndex &index, std::span<const double> query,
                                            const Segment &query_seg, const DensityParams &params) {
  if (index.empty()) return 0.0;
  return kernel_sum(index, index.search(query, params.k), query_seg, params.beta);
}

/// Squared distances of surviving neighbors, for repeated evaluation at different betas.
inline std::vector<double> surviving_distances(const InstanceIndex &index, std::span<const double> query,
                                               const Segment &query_seg, std::size_t k) {
  std::vector<double> out;
  for (const auto &nb : index.search(query, k))
    if (!index.provenance(nb.index).overlaps(query_seg)) out.push_back(nb.sq_distance);
  return out;
}

inline double kernel_sum(std::span<const double> sq_distances, double beta) {
  double s = 0.0;
  for (double d : sq_distances) s += std::exp(-beta * d);
  return s;
}

/// Fraction of neighbor lists whose kernel sum falls below epsilon_f at this beta.
inline double fraction_below(std::span<const std::vector<double>> lists, double beta, double epsilon_f) {
  std::size_t below = 0;
  for (const auto &l : lists)
    if (kernel_sum(l, beta) < epsilon_f) ++below;
  return lists.empty() ? 0.0 : double(below) / double(lists.size());
}

struct CalibrationResult {
  double beta = 0.0;
  double achieved_fraction = 0.0;
};

/// Bisection on log(beta) so that about `target` of the sample has a soft count below
/// epsilon_f. The fraction is non-decreasing in beta.
inline CalibrationResult calibrate_beta_from_lists(std::span<const std::vector<double>> lists,
                                                   std::size_t k, double epsilon_f, double target) {
  if (lists.size() < 100) throw Error("beta calibration needs at least 100 sample items");
  if (!(target > 0.0 && target < 1.0)) throw Error("beta calibration target must lie in (0, 1)");
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (const auto &l : lists)
    for (double d : l)
      if (d > 0.0) {
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
  if (dmax == 0.0) dmin = dmax = 1.0;
  // At lo every positive-distance term is ~1; at hi every one is far below epsilon_f / k.
  double log_lo = std::log(1e-6 / dmax);
  double log_hi = std::log((std::log(double(std::max<std::size_t>(k, 1)) / epsilon_f) + 50.0) / dmin);
  const double f_lo = fraction_below(lists, std::exp(log_lo), epsilon_f);
  const double f_hi = fraction_below(lists, std::exp(log_hi), epsilon_f);
  if (f_lo > target || f_hi < target)
    throw Error("beta calibration: target fraction " + std::to_string(target) +
                " unreachable; achieved " + std::to_string(f_lo) + " at the lower bound and " +
                std::to_string(f_hi) + " at the upper bound");

  CalibrationResult best{std::exp(log_lo), f_lo};
  if (std::abs(f_hi - target) < std::abs(best.achieved_fraction - target)) best = {std::exp(log_hi), f_hi};
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (log_lo + log_hi);
    const double f = fraction_below(lists, std::exp(mid), epsilon_f);
    if (std::abs(f - target) < std::abs(best.achieved_fraction - target)) best = {std::exp(mid), f};
    if (f < target)
      log_lo = mid;
    else
      log_hi = mid;
  }
  return best;
}

/// Calibrates beta on a sample of (embedding, segment) pairs queried against `index`.
inline CalibrationResult calibrate_beta(const InstanceIndex &index, std::span<const SegmentEmbedding> sample,
                                        std::span<const Segment> sample_segs, std::size_t k, double epsilon_f,
                                        double target = 0.5) {
  if (sample.size() != sample_segs.size()) throw Error("beta calibration: sample size mismatch");
  std::vector<std::vector<double>> lists;
  lists.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    lists.push_back(surviving_distances(index, sample[i], sample_segs[i], k));
  return calibrate_beta_from_lists(lists, k, epsilon_f, target);
}

/// Exact multiset counts over discrete keys.
class CountTable {
public:
  void add(const DiscreteKey &key, std::uint32_t n = 1) {
    counts_[key] += n;
    total_ += n;
  }

  void add(DiscreteKey &&key, std::uint32_t n = 1) {
    counts_[std::move(key)] += n;
    total_ += n;
  }

  std::uint64_t count(const DiscreteKey &key) const {
    auto it = counts_.find(key);
    return it == counts_.end() ? 0 : it->second;
  }

  std::uint64_t total() const { return total_; }
  std::size_t distinct() const { return counts_.size(); }
  void clear() {
    counts_.clear();
    total_ = 0;
  }

private:
  std::unordered_map<DiscreteKey, std::uint64_t, DiscreteKeyHash> counts_;
  std::uint64_t total_ = 0;
};

inline FrequencyEstimate exact_count(const CountTable &store, const DiscreteKey &key) {
  return static_cast<double>(store.count(key));
}

/// Lloyd's k-means with seeded farthest-first initialization.
class KMeans {
public:
  KMeans(std::span<const SegmentEmbedding> points, std::size_t n_clusters, std::uint64_t seed,
         std::size_t max_iterations = 100) {
    if (points.empty()) throw Error("k-means: no points");
    if (n_clusters < 1 || n_clusters > points.size())
      throw Error("k-means: n_clusters (" + std::to_string(n_clusters) + ") must lie in [1, " +
                  std::to_string(points.size()) + "]");
    const std::size_t dim = points.front().size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);

    // Farthest-first: seeded first center, then the point farthest from all chosen centers.
    centroids_.push_back(points[pick(rng)]);
    std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
    while (centroids_.size() < n_clusters) {
      const auto &c = centroids_.back();
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        nearest[i] = std::min(nearest[i], sq_dist(points[i], c));
        if (nearest[i] > far_d) {
          far_d = nearest[i];
          far = i;
        }
      }
      centroids_.push_back(points[far]);
    }

    std::vector<std::uint32_t> assign(points.size(), std::numeric_limits<std::uint32_t>::max());
    for (std::size_t it = 0; it < max_iterations; ++it) {
      const InstanceIndex cidx = centroid_index();
      bool changed = false;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const auto a = cidx.search(points[i], 1).front().index;
        if (a != assign[i]) {
          assign[i] = a;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<SegmentEmbedding> sums(n_clusters, SegmentEmbedding(dim, 0.0));
      std::vector<std::size_t> counts(n_clusters, 0);
      for (std::size_t i = 0; i < points.size(); ++i) {
        ++counts[assign[i]];
        for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i][d];
      }
      for (std::size_t c = 0; c < n_clusters; ++c) {
        if (counts[c] == 0) continue; // empty clusters keep their centroid
        for (std::size_t d = 0; d < dim; ++d) centroids_[c][d] = sums[c][d] / double(counts[c]);
      }
    }
    sizes_.assign(n_clusters, 0);
    for (auto a : assign) ++sizes_[a];
    index_ = centroid_index();
  }

  std::size_t n_clusters() const { return centroids_.size(); }
  std::span<const std::size_t> cluster_sizes() const { return sizes_; }
  const std::vector<SegmentEmbedding> &centroids() const { return centroids_; }

  std::size_t nearest_cluster(std::span<const double> query) const { return index_.search(query, 1).front().index; }

  /// Size of the cluster whose centroid is nearest to `query`.
  FrequencyEstimate frequency(std::span<const double> query) const {
    return static_cast<double>(sizes_[nearest_cluster(query)]);
  }

private:
  static double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

  InstanceIndex centroid_index() const {
    std::vector<Segment> prov(centroids_.size());
    return InstanceIndex(centroids_, prov);
  }

  std::vector<SegmentEmbedding> centroids_;
  std::vector<std::size_t> sizes_;
  InstanceIndex index_;
};

inline FrequencyEstimate kmeans_frequency(std::span<const SegmentEmbedding> embeddings, std::size_t n_clusters,
                                          std::span<const double> query, std::uint64_t seed = 0) {
  return KMeans(embeddings, n_clusters, seed).frequency(query);
}

} // namespace dpparse
