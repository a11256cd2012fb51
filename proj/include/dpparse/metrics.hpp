#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "embedder.hpp"

namespace dpparse {

inline double f_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }
inline double ratio(std::size_t num, std::size_t den) { return den ? double(num) / double(den) : 0.0; }

struct EvalReport {
  double token_precision = 0.0, token_recall = 0.0, token_f1 = 0.0;
  double boundary_precision = 0.0, boundary_recall = 0.0, boundary_f1 = 0.0;
  std::size_t gold_tokens = 0, hyp_tokens = 0, matched_tokens = 0;
  std::size_t gold_boundaries = 0, hyp_boundaries = 0, matched_boundaries = 0;

  void finalize() {
    token_precision = ratio(matched_tokens, hyp_tokens);
    token_recall = ratio(matched_tokens, gold_tokens);
    token_f1 = f_score(token_precision, token_recall);
    boundary_precision = ratio(matched_boundaries, hyp_boundaries);
    boundary_recall = ratio(matched_boundaries, gold_boundaries);
    boundary_f1 = f_score(boundary_precision, boundary_recall);
  }
};

/// Maps one time to a phone edge. Inside phone [s, e), a boundary more than 30ms or more
/// than half the phone past s moves to e, otherwise to s. Edges stay where they are.
inline std::uint32_t snap_boundary(std::uint32_t b, std::span<const PhoneInterval> phones) {
  if (phones.empty()) return b;
  if (b < phones.front().start_ms || b > phones.back().end_ms)
    throw Error("boundary at " + std::to_string(b) + "ms lies outside the phone alignment");
  auto it = std::upper_bound(phones.begin(), phones.end(), b,
                             [](std::uint32_t t, const PhoneInterval &p) { return t < p.start_ms; });
  if (it == phones.begin()) throw Error("boundary at " + std::to_string(b) + "ms precedes the phone alignment");
  const PhoneInterval &p = *(it - 1);
  if (b == p.start_ms || b == p.end_ms) return b;
  if (b > p.end_ms) throw Error("boundary at " + std::to_string(b) + "ms falls in a gap of the phone alignment");
  const std::uint32_t overlap = b - p.start_ms;
  const std::uint32_t dur = p.end_ms - p.start_ms;
  return (overlap > 30 || 2 * overlap > dur) ? p.end_ms : p.start_ms;
}

/// Snaps and deduplicates a set of boundary times.
inline std::vector<std::uint32_t> snap_boundaries(std::span<const std::uint32_t> hyp_ms,
                                                  std::span<const PhoneInterval> phones) {
  std::set<std::uint32_t> out;
  for (auto b : hyp_ms) out.insert(snap_boundary(b, phones));
  return {out.begin(), out.end()};
}

/// Hypothesis boundaries in ms per utterance, including both utterance edges.
struct TimedSegmentation {
  std::vector<std::string> ids;
  std::vector<std::vector<std::uint32_t>> boundaries_ms;
};

inline TimedSegmentation to_timed(const Segmentation &seg) {
  TimedSegmentation t;
  t.ids = seg.ids;
  for (const auto &toks : seg.tokens) {
    std::vector<std::uint32_t> b;
    if (!toks.empty()) b.push_back(block_to_ms(toks.front().start));
    for (const auto &s : toks) b.push_back(block_to_ms(s.end));
    t.boundaries_ms.push_back(std::move(b));
  }
  return t;
}

/// Token and boundary precision/recall/F1, micro-averaged over utterances. The first
/// and last hypothesis boundaries are the utterance edges; only internal boundaries
/// enter the boundary scores.
inline EvalReport token_boundary_f1(const TimedSegmentation &hyp, const GoldAlignment &gold) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < gold.ids.size(); ++i) where.emplace(gold.ids[i], i);
  EvalReport r;
  for (std::size_t u = 0; u < hyp.ids.size(); ++u) {
    auto it = where.find(hyp.ids[u]);
    if (it == where.end()) throw Error("no gold alignment for utterance '" + hyp.ids[u] + "'");
    const UtteranceAlignment &g = gold.utterances[it->second];
    const auto &hb = hyp.boundaries_ms[u];
    if (hb.size() < 2 || g.word_boundaries_ms.size() < 2) continue;
    const std::uint32_t dur = g.duration_ms();

    std::vector<std::uint32_t> snapped(hb.size());
    snapped.front() = 0;
    snapped.back() = dur;
    try {
      for (std::size_t i = 1; i + 1 < hb.size(); ++i) snapped[i] = snap_boundary(hb[i], g.phones);
    } catch (const Error &e) {
      throw Error("utterance '" + hyp.ids[u] + "': " + e.what());
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> gold_tok;
    for (std::size_t i = 0; i + 1 < g.word_boundaries_ms.size(); ++i)
      gold_tok.emplace(g.word_boundaries_ms[i], g.word_boundaries_ms[i + 1]);
    r.gold_tokens += gold_tok.size();
    r.hyp_tokens += hb.size() - 1;
    for (std::size_t i = 0; i + 1 < snapped.size(); ++i)
      if (snapped[i] < snapped[i + 1] && gold_tok.count({snapped[i], snapped[i + 1]})) ++r.matched_tokens;

    std::set<std::uint32_t> gold_b(g.word_boundaries_ms.begin() + 1, g.word_boundaries_ms.end() - 1);
    std::set<std::uint32_t> hyp_b;
    for (std::size_t i = 1; i + 1 < snapped.size(); ++i)
      if (snapped[i] > 0 && snapped[i] < dur) hyp_b.insert(snapped[i]);
    r.gold_boundaries += gold_b.size();
    r.hyp_boundaries += hyp_b.size();
    for (auto b : hyp_b) r.matched_boundaries += gold_b.count(b);
  }
  r.finalize();
  return r;
}

inline EvalReport token_boundary_f1(const Segmentation &hyp, const GoldAlignment &gold) {
  return token_boundary_f1(to_timed(hyp), gold);
}

/// Content-blind baseline: a boundary every `period_blocks`; the remainder becomes a
/// shorter final token.
template <SegmentableCorpus C>
Segmentation fixed_rate_segmenter(const C &corpus, std::uint32_t period_blocks) {
  if (period_blocks < 1) throw Error("fixed-rate segmenter: period must be >= 1 block");
  Segmentation seg = Segmentation::empty_for(corpus);
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const std::uint32_t n = corpus.n_units(u);
    for (std::uint32_t s = 0; s < n; s += period_blocks)
      seg.tokens[u].push_back({static_cast<std::uint32_t>(u), s, std::min(n, s + period_blocks)});
  }
  return seg;
}

struct Triplet {
  SegmentEmbedding a, b, x;
};

inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("cosine distance: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error("cosine distance undefined for a zero vector");
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

/// Share of triplets where X is closer to A than to B; ties count one half.
inline double abx_score(std::span<const Triplet> triplets) {
  if (triplets.empty()) throw Error("abx: no triplets");
  double score = 0.0;
  for (const auto &t : triplets) {
    const double dax = cosine_distance(t.a, t.x);
    const double dbx = cosine_distance(t.b, t.x);
    score += dax < dbx ? 1.0 : (dax == dbx ? 0.5 : 0.0);
  }
  return score / double(triplets.size());
}

/// An embedding attached to a time span (e.g. one per hypothesized token).
struct TimedEmbedding {
  SegmentEmbedding vector;
  std::uint32_t start_ms = 0;
  std::uint32_t end_ms = 0;
};

/// Mean of the items overlapping [start_ms, end_ms) by more than `min_overlap_ms`.
inline SegmentEmbedding pool_overlapping(std::span<const TimedEmbedding> items, std::uint32_t start_ms,
                                         std::uint32_t end_ms, std::uint32_t min_overlap_ms = 40) {
  SegmentEmbedding sum;
  std::size_t n = 0;
  for (const auto &it : items) {
    const std::uint32_t lo = std::max(start_ms, it.start_ms), hi = std::min(end_ms, it.end_ms);
    if (hi <= lo || hi - lo <= min_overlap_ms) continue;
    if (sum.empty()) sum.assign(it.vector.size(), 0.0);
    if (it.vector.size() != sum.size()) throw Error("pooling: dimension mismatch");
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += it.vector[d];
    ++n;
  }
  if (n == 0) throw Error("pooling: no item overlaps the interval by more than " + std::to_string(min_overlap_ms) + "ms");
  for (auto &v : sum) v /= double(n);
  return sum;
}

} // namespace dpparse
