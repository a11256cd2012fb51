#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace dpparse {

/// Fixed-length vector for one segment. Computation is in double.
using SegmentEmbedding = std::vector<double>;

/// Mean-pools the blocks of `seg` along time: out[d] = mean_t frames[t][d].
inline SegmentEmbedding embed(const FrameMatrix &frames, const Segment &seg) {
  if (seg.start >= seg.end || seg.end > frames.n_blocks())
    throw Error("segment [" + std::to_string(seg.start) + "," + std::to_string(seg.end) +
                ") out of bounds for utterance '" + frames.id() + "'");
  const std::uint32_t dim = frames.dim();
  SegmentEmbedding out(dim, 0.0);
  for (std::uint32_t t = seg.start; t < seg.end; ++t) {
    auto row = frames.row(t);
    for (std::uint32_t d = 0; d < dim; ++d) out[d] += row[d];
  }
  const double n = seg.length();
  for (auto &v : out) v /= n;
  return out;
}

/// In-place L2 normalization; zero vectors are left unchanged.
inline void l2_normalize(SegmentEmbedding &v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 <= 0.0) return;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto &x : v) x *= inv;
}

/// The exact symbol run covered by a segment in a text utterance.
struct DiscreteKey {
  std::vector<std::uint32_t> symbols;

  friend bool operator==(const DiscreteKey &, const DiscreteKey &) = default;
};

struct DiscreteKeyHash {
  std::size_t operator()(const DiscreteKey &k) const noexcept {
    // FNV-1a over the symbol ids.
    std::uint64_t h = 1469598103934665603ull;
    for (auto s : k.symbols) {
      h ^= s;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

inline DiscreteKey embed_discrete(std::span<const std::uint32_t> units, const Segment &seg) {
  if (seg.start >= seg.end || seg.end > units.size())
    throw Error("segment [" + std::to_string(seg.start) + "," + std::to_string(seg.end) +
                ") out of bounds for a " + std::to_string(units.size()) + "-unit utterance");
  return DiscreteKey{{units.begin() + seg.start, units.begin() + seg.end}};
}

/// Embedding strategy for a continuous corpus.
class Embedder {
public:
  explicit Embedder(bool normalize = false) : normalize_(normalize) {}

  SegmentEmbedding operator()(const Corpus &corpus, const Segment &seg) const {
    auto e = embed(corpus.utterances[seg.utt], seg);
    if (normalize_) l2_normalize(e);
    return e;
  }

  bool normalizes() const { return normalize_; }

private:
  bool normalize_;
};

} // namespace dpparse
