#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"

namespace dpparse {

/// Segmentation lattice over one utterance: nodes are the block boundaries 0..n_blocks,
/// arcs (i, j) exist for min_len <= j - i <= max_len and carry a log-domain score.
class ScoredLattice {
public:
  ScoredLattice() = default;

  template <typename ScoreFn>
  ScoredLattice(std::uint32_t n_blocks, std::uint32_t min_len, std::uint32_t max_len, ScoreFn &&score)
      : n_(n_blocks), min_(min_len), max_(max_len) {
    if (min_len < 1 || max_len < min_len) throw Error("lattice: invalid length bounds");
    if (n_blocks < min_len) throw Error("utterance shorter than minimum segment");
    width_ = max_ - min_ + 1;
    scores_.assign(std::size_t(n_) * width_, 0.0);
    for (std::uint32_t i = 0; i < n_; ++i)
      for (std::uint32_t len = min_; len <= max_ && i + len <= n_; ++len)
        scores_[std::size_t(i) * width_ + (len - min_)] = score(i, i + len);
  }

  std::uint32_t n_blocks() const { return n_; }
  std::uint32_t min_len() const { return min_; }
  std::uint32_t max_len() const { return max_; }

  bool has_arc(std::uint32_t i, std::uint32_t j) const {
    return i < j && j <= n_ && j - i >= min_ && j - i <= max_;
  }

  double score(std::uint32_t i, std::uint32_t j) const {
    return scores_[std::size_t(i) * width_ + (j - i - min_)];
  }

  std::size_t arc_count() const {
    std::size_t c = 0;
    for (std::uint32_t i = 0; i < n_; ++i)
      for (std::uint32_t len = min_; len <= max_ && i + len <= n_; ++len) ++c;
    return c;
  }

private:
  std::uint32_t n_ = 0, min_ = 1, max_ = 1, width_ = 1;
  std::vector<double> scores_;
};

/// Builds a lattice scoring each arc exactly once via score_fn(start, end).
inline ScoredLattice build_lattice(std::uint32_t n_blocks, const std::function<double(std::uint32_t, std::uint32_t)> &score_fn,
                                   std::uint32_t min_len, std::uint32_t max_len) {
  return ScoredLattice(n_blocks, min_len, max_len, score_fn);
}

/// A complete path, written as the ordered end positions of its arcs.
struct LatticePath {
  std::vector<std::uint32_t> ends;
  double score = 0.0;
};

using NBestList = std::vector<LatticePath>;

/// Ranking used everywhere: higher score, then fewer segments, then lexicographically
/// smaller boundary sequence.
inline bool path_precedes(const LatticePath &a, const LatticePath &b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.ends.size() != b.ends.size()) return a.ends.size() < b.ends.size();
  return a.ends < b.ends;
}

/// N-best dynamic-programming beam search. Each node keeps its `beam` best partial
/// hypotheses; with a beam at least as large as the number of complete paths the
/// result is the exact ranked path list.
inline NBestList nbest(const ScoredLattice &lat, std::size_t beam) {
  if (beam < 1) throw Error("nbest: beam must be >= 1");
  struct Hyp {
    double score;
    std::uint32_t nsegs;
    std::uint32_t prev_node;
    std::uint32_t prev_hyp;
  };
  const std::uint32_t n = lat.n_blocks();
  std::vector<std::vector<Hyp>> hyps(n + 1);
  hyps[0].push_back({0.0, 0, 0, 0});

  auto ends_of = [&](std::uint32_t node, std::uint32_t h) {
    std::vector<std::uint32_t> ends;
    while (node != 0) {
      ends.push_back(node);
      const Hyp &x = hyps[node][h];
      node = x.prev_node;
      h = x.prev_hyp;
    }
    std::reverse(ends.begin(), ends.end());
    return ends;
  };

  struct Cand {
    Hyp hyp;
    std::uint32_t node;
  };
  std::vector<Cand> cands;
  for (std::uint32_t j = 1; j <= n; ++j) {
    cands.clear();
    const std::uint32_t lo = j >= lat.max_len() ? j - lat.max_len() : 0;
    for (std::uint32_t i = lo; i + lat.min_len() <= j; ++i) {
      const double s = lat.score(i, j);
      for (std::uint32_t h = 0; h < hyps[i].size(); ++h) {
        const Hyp &p = hyps[i][h];
        cands.push_back({{p.score + s, p.nsegs + 1, i, h}, j});
      }
    }
    auto better = [&](const Cand &a, const Cand &b) {
      if (a.hyp.score != b.hyp.score) return a.hyp.score > b.hyp.score;
      if (a.hyp.nsegs != b.hyp.nsegs) return a.hyp.nsegs < b.hyp.nsegs;
      auto ea = ends_of(a.hyp.prev_node, a.hyp.prev_hyp);
      auto eb = ends_of(b.hyp.prev_node, b.hyp.prev_hyp);
      ea.push_back(j);
      eb.push_back(j);
      return ea < eb;
    };
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);
    hyps[j].reserve(keep);
    for (std::size_t c = 0; c < keep; ++c) hyps[j].push_back(cands[c].hyp);
  }

  NBestList out;
  out.reserve(hyps[n].size());
  for (std::uint32_t h = 0; h < hyps[n].size(); ++h) out.push_back({ends_of(n, h), hyps[n][h].score});
  return out;
}

/// Softmax weights exp(score / temperature), normalized with max subtraction.
inline std::vector<double> path_probabilities(const NBestList &paths, double temperature) {
  if (paths.empty()) throw Error("sample_path: empty n-best list");
  if (!(temperature > 0.0)) throw Error("sample_path: temperature must be > 0");
  double mx = paths.front().score;
  for (const auto &p : paths) mx = std::max(mx, p.score);
  std::vector<double> w(paths.size());
  double total = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) total += (w[i] = std::exp((paths[i].score - mx) / temperature));
  for (auto &x : w) x /= total;
  return w;
}

/// Index of a path drawn from the softmax over total scores.
template <typename Rng>
std::size_t sample_path_index(const NBestList &paths, double temperature, Rng &rng) {
  const auto w = path_probabilities(paths, temperature);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return w.size() - 1;
}

template <typename Rng>
const LatticePath &sample_path(const NBestList &paths, double temperature, Rng &rng) {
  return paths[sample_path_index(paths, temperature, rng)];
}

} // namespace dpparse
