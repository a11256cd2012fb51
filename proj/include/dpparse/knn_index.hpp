#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "core.hpp"
#include "embedder.hpp"

namespace dpparse {

struct Neighbor {
  std::uint32_t index = 0;
  double sq_distance = 0.0;

  friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

/// Exact k-nearest-neighbor store of segment embeddings with time provenance.
///
/// Entries are laid out in groups of kLanes: for group g, dimension d holds the d-th
/// coordinate of kLanes consecutive entries. The scan then accumulates kLanes squared
/// distances side by side, each one still summed in plain dimension order, so the result
/// is bit-identical to a scalar loop over the same entry.
class InstanceIndex {
public:
  static constexpr std::size_t kLanes = 8;

  InstanceIndex() = default;

  InstanceIndex(std::span<const SegmentEmbedding> embeddings, std::span<const Segment> provenance) {
    if (embeddings.empty()) throw Error("empty lexicon");
    if (embeddings.size() != provenance.size())
      throw Error("instance index: embeddings and provenance differ in length");
    dim_ = embeddings.front().size();
    if (dim_ == 0) throw Error("instance index: zero-dimensional embeddings");
    size_ = embeddings.size();
    const std::size_t groups = (size_ + kLanes - 1) / kLanes;
    packed_.assign(groups * dim_ * kLanes, 0.0);
    for (std::size_t i = 0; i < size_; ++i) {
      if (embeddings[i].size() != dim_) throw Error("instance index: mixed embedding dimensions");
      const std::size_t g = i / kLanes, lane = i % kLanes;
      for (std::size_t d = 0; d < dim_; ++d) packed_[(g * dim_ + d) * kLanes + lane] = embeddings[i][d];
    }
    provenance_.assign(provenance.begin(), provenance.end());
  }

  std::size_t size() const { return size_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return size_ == 0; }
  const Segment &provenance(std::size_t i) const { return provenance_[i]; }

  double coordinate(std::size_t i, std::size_t d) const {
    return packed_[((i / kLanes) * dim_ + d) * kLanes + i % kLanes];
  }

  SegmentEmbedding entry(std::size_t i) const {
    SegmentEmbedding e(dim_);
    for (std::size_t d = 0; d < dim_; ++d) e[d] = coordinate(i, d);
    return e;
  }

  /// The k nearest entries to `query`, ordered by (squared distance, entry index).
  /// Returns every entry when k exceeds the index size.
  std::vector<Neighbor> search(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim_) throw Error("instance index: query dimension mismatch");
    TopK top(std::min(k, size_));
    scan(query.data(), 0, groups(), top);
    return top.sorted();
  }

  /// search() for many queries at once. The index is walked in cache-sized chunks and
  /// every query visits each chunk while it is resident; results equal per-query search().
  std::vector<std::vector<Neighbor>> search_batch(std::span<const SegmentEmbedding> queries, std::size_t k) const {
    std::vector<TopK> tops(queries.size(), TopK(std::min(k, size_)));
    for (const auto &q : queries)
      if (q.size() != dim_) throw Error("instance index: query dimension mismatch");
    const std::size_t chunk = std::max<std::size_t>(1, kChunkBytes / (dim_ * kLanes * sizeof(double)));
    for (std::size_t g0 = 0; g0 < groups(); g0 += chunk) {
      const std::size_t g1 = std::min(groups(), g0 + chunk);
      for (std::size_t i = 0; i < queries.size(); ++i) scan(queries[i].data(), g0, g1, tops[i]);
    }
    std::vector<std::vector<Neighbor>> out;
    out.reserve(tops.size());
    for (auto &t : tops) out.push_back(t.sorted());
    return out;
  }

private:
  static constexpr std::size_t kChunkBytes = 256 * 1024;

  // Bounded max-heap on (squared distance, index).
  struct TopK {
    explicit TopK(std::size_t k) : k(k) { heap.reserve(k); }

    static bool worse(const Neighbor &a, const Neighbor &b) {
      return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
    }

    // Entries arrive in increasing index order, so an equal distance never displaces the top.
    void offer(std::uint32_t index, double d2) {
      if (heap.size() < k) {
        heap.push_back({index, d2});
        std::push_heap(heap.begin(), heap.end(), worse);
        if (heap.size() == k) threshold = heap.front().sq_distance;
      } else if (d2 < threshold) {
        std::pop_heap(heap.begin(), heap.end(), worse);
        heap.back() = {index, d2};
        std::push_heap(heap.begin(), heap.end(), worse);
        threshold = heap.front().sq_distance;
      }
    }

    std::vector<Neighbor> sorted() {
      std::sort_heap(heap.begin(), heap.end(), worse);
      return std::move(heap);
    }

    std::size_t k;
    double threshold = std::numeric_limits<double>::infinity();
    std::vector<Neighbor> heap;
  };

  std::size_t groups() const { return (size_ + kLanes - 1) / kLanes; }

  void scan(const double *q, std::size_t g0, std::size_t g1, TopK &top) const {
    if (top.k == 0) return;
    // Partial sums only grow, so a group whose smallest partial distance already reaches
    // the current k-th distance cannot contribute and is abandoned early.
    const std::size_t split = dim_ >= 8 ? dim_ / 2 : dim_;
    alignas(64) double acc[kLanes];
    for (std::size_t g = g0; g < g1; ++g) {
      const double *block = packed_.data() + g * dim_ * kLanes;
      for (std::size_t l = 0; l < kLanes; ++l) acc[l] = 0.0;
      accumulate(block, q, 0, split, acc);
      const bool full = top.heap.size() == top.k;
      if (full && !(lane_min(acc) < top.threshold)) continue;
      accumulate(block, q, split, dim_, acc);
      if (full && !(lane_min(acc) < top.threshold)) continue;
      const std::size_t base = g * kLanes;
      const std::size_t lanes = std::min(kLanes, size_ - base);
      for (std::size_t l = 0; l < lanes; ++l) top.offer(static_cast<std::uint32_t>(base + l), acc[l]);
    }
  }

  static double lane_min(const double *acc) {
    double lo = acc[0];
    for (std::size_t l = 1; l < kLanes; ++l) lo = lo < acc[l] ? lo : acc[l];
    return lo;
  }

  static void accumulate(const double *__restrict block, const double *__restrict q, std::size_t d0,
                         std::size_t d1, double *__restrict acc) {
    for (std::size_t d = d0; d < d1; ++d) {
      const double qd = q[d];
      const double *__restrict col = block + d * kLanes;
#pragma GCC unroll 8
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double diff = qd - col[l];
        acc[l] += diff * diff;
      }
    }
  }

  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  std::vector<double> packed_;
  std::vector<Segment> provenance_;
};

inline InstanceIndex build_index(std::span<const SegmentEmbedding> embeddings,
                                 std::span<const Segment> provenance) {
  return InstanceIndex(embeddings, provenance);
}

} // namespace dpparse
