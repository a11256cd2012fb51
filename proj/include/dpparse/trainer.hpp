#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "backends.hpp"
#include "core.hpp"
#include "dp_score.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace dpparse {

struct TrainerConfig {
  std::size_t n_iterations = 10;
  std::size_t beam = 10;
  double temperature = 1.0;
  BackendSettings backend;
  DPParams dp;

  void validate() const {
    if (n_iterations < 1) throw Error("trainer: n_iterations must be >= 1");
    if (beam < 1) throw Error("trainer: beam must be >= 1");
    if (!(temperature > 0.0)) throw Error("trainer: temperature must be > 0");
    if (backend.l0_subsample < 1) throw Error("trainer: l0_subsample must be >= 1");
    if (backend.min_len < 1 || backend.max_len < backend.min_len) throw Error("trainer: invalid segment length bounds");
    if (backend.workers < 1) throw Error("trainer: workers must be >= 1");
    backend.density.validate();
    dp.validate();
  }
};

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t n_tokens = 0;
  double mean_token_ms = 0.0;
  double wall_seconds = 0.0;
};

/// Whole utterances no longer than max_len become the seed lexicon; longer ones add nothing.
template <SegmentableCorpus C>
std::vector<Segment> init_segmentation(const C &corpus, std::uint32_t max_len) {
  std::vector<Segment> seed;
  for (std::size_t u = 0; u < corpus.size(); ++u)
    if (corpus.n_units(u) <= max_len) seed.push_back({static_cast<std::uint32_t>(u), 0, corpus.n_units(u)});
  return seed;
}

inline std::vector<Segment> flatten(const Segmentation &seg) {
  std::vector<Segment> out;
  out.reserve(seg.token_count());
  for (const auto &t : seg.tokens) out.insert(out.end(), t.begin(), t.end());
  return out;
}

template <typename Backend>
struct TrainerState {
  std::size_t iteration = 0;
  /// Tokens that build L in the next Step 1: the seed lexicon, then the latest segmentation.
  std::vector<Segment> lexicon_tokens;
  /// Latest segmentation; empty until the first iteration completes.
  Segmentation segmentation;
  P0Cache p0;
  BaseSummary base;
};

/// The segmentation loop: alternate lexicon estimation (Step 1) and lattice
/// re-segmentation of every utterance against the frozen lexicon (Step 2).
template <typename Backend>
class Trainer {
public:
  using CorpusType = typename Backend::CorpusType;
  using State = TrainerState<Backend>;

  Trainer(const CorpusType &corpus, Backend backend, TrainerConfig config)
      : corpus_(&corpus), backend_(std::move(backend)), cfg_(std::move(config)) {
    cfg_.validate();
    for (std::size_t u = 0; u < corpus.size(); ++u)
      if (corpus.n_units(u) < cfg_.backend.min_len)
        throw Error("utterance '" + corpus.id(u) + "' is shorter than the minimum segment length");
  }

  const TrainerConfig &config() const { return cfg_; }
  Backend &backend() { return backend_; }
  const Backend &backend() const { return backend_; }

  /// Step 0: seed lexicon, candidate enumeration, base index, calibration and P0 cache.
  State initialize() {
    State st;
    st.lexicon_tokens = init_segmentation(*corpus_, cfg_.backend.max_len);
    const auto candidates = enumerate_candidates(*corpus_, cfg_.backend.min_len, cfg_.backend.max_len);
    st.p0 = P0Cache(*corpus_, cfg_.backend.min_len, cfg_.backend.max_len);
    st.base = backend_.build_base(candidates, cfg_.backend, st.p0);
    return st;
  }

  /// Scores arc s for the current lexicon of size n_L.
  double score_arc(const Segment &s, const State &st, const DPParams &dp) const {
    const auto q = backend_.query(s);
    const double l_w = backend_.lexicon_frequency(q, s);
    const auto p0 = st.p0.get(s);
    if (!p0) throw Error("P0 cache miss for utterance '" + corpus_->id(s.utt) + "'");
    return arc_score(word_probability(l_w, *p0, dp), s.length(), dp);
  }

  /// One full iteration. The new segmentation replaces the old only once every
  /// utterance has been decoded; its token count becomes n_L of the next iteration.
  State run_iteration(const State &in) {
    State st = in;
    backend_.set_lexicon(st.lexicon_tokens, cfg_.backend);
    DPParams dp = cfg_.dp;
    dp.n_L = static_cast<double>(st.lexicon_tokens.size());
    dp.n_L0 = static_cast<double>(std::max<std::size_t>(st.base.n_L0, 1));

    Segmentation next = Segmentation::empty_for(*corpus_);
    const std::size_t it = st.iteration;
    parallel_for(corpus_->size(), cfg_.backend.workers, [&](std::size_t u) {
      try {
        next.tokens[u] = segment_utterance(static_cast<std::uint32_t>(u), st, dp, it);
      } catch (const std::exception &e) {
        throw Error("utterance '" + corpus_->id(u) + "': " + e.what());
      }
    });
    st.segmentation = std::move(next);
    st.lexicon_tokens = flatten(st.segmentation);
    st.iteration = it + 1;
    return st;
  }

  std::vector<Segment> segment_utterance(std::uint32_t u, const State &st, const DPParams &dp,
                                         std::size_t iteration) const {
    const ScoredLattice lat(corpus_->n_units(u), cfg_.backend.min_len, cfg_.backend.max_len,
                            [&](std::uint32_t i, std::uint32_t j) { return score_arc({u, i, j}, st, dp); });
    const NBestList paths = nbest(lat, cfg_.beam);
    if (paths.empty()) throw Error("no complete segmentation path");
    Rng rng = utterance_rng(cfg_.backend.seed, corpus_->id(u), iteration);
    const auto &chosen = sample_path(paths, cfg_.temperature, rng);
    return Segmentation::from_ends(u, chosen.ends);
  }

  /// initialize + n_iterations iterations. `log` receives one record per iteration.
  Segmentation train(const std::function<void(const IterationLog &)> &log = {}) {
    State st = initialize();
    for (std::size_t i = 0; i < cfg_.n_iterations; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      st = run_iteration(st);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log) {
        const std::size_t n = st.segmentation.token_count();
        std::uint64_t blocks = 0;
        for (const auto &t : st.lexicon_tokens) blocks += t.length();
        log({st.iteration, n, n ? double(block_to_ms(1)) * double(blocks) / double(n) : 0.0, wall});
      }
    }
    last_base_ = st.base;
    return std::move(st.segmentation);
  }

  const BaseSummary &last_base() const { return last_base_; }

private:
  const CorpusType *corpus_;
  Backend backend_;
  TrainerConfig cfg_;
  BaseSummary last_base_;
};

} // namespace dpparse
