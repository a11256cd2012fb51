#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "density.hpp"
#include "embedder.hpp"
#include "knn_index.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace dpparse {

/// Every candidate segment of every utterance with min_len <= length <= max_len.
template <SegmentableCorpus C>
std::vector<Segment> enumerate_candidates(const C &corpus, std::uint32_t min_len, std::uint32_t max_len) {
  std::vector<Segment> out;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const std::uint32_t n = corpus.n_units(u);
    for (std::uint32_t s = 0; s < n; ++s)
      for (std::uint32_t len = min_len; len <= max_len && s + len <= n; ++len)
        out.push_back({static_cast<std::uint32_t>(u), s, s + len});
  }
  return out;
}

/// Base-distribution values for every candidate segment, laid out per utterance as
/// [start][length - min_len]. Values never change once built.
class P0Cache {
public:
  P0Cache() = default;

  template <SegmentableCorpus C>
  P0Cache(const C &corpus, std::uint32_t min_len, std::uint32_t max_len)
      : min_(min_len), width_(max_len - min_len + 1) {
    values_.resize(corpus.size());
    filled_.resize(corpus.size());
    for (std::size_t u = 0; u < corpus.size(); ++u) {
      values_[u].assign(std::size_t(corpus.n_units(u)) * width_, 0.0);
      filled_[u].assign(values_[u].size(), 0);
    }
  }

  void set(const Segment &s, double p0) {
    const auto i = slot(s);
    values_[s.utt][i] = p0;
    filled_[s.utt][i] = 1;
  }

  std::optional<double> get(const Segment &s) const {
    lookups_.fetch_add(1, std::memory_order_relaxed);
    if (s.utt >= values_.size() || s.length() < min_ || s.length() - min_ >= width_) return std::nullopt;
    const auto i = slot(s);
    if (i >= values_[s.utt].size() || !filled_[s.utt][i]) return std::nullopt;
    hits_.fetch_add(1, std::memory_order_relaxed);
    return values_[s.utt][i];
  }

  std::uint64_t lookups() const { return lookups_.load(); }
  std::uint64_t hits() const { return hits_.load(); }
  void reset_counters() const {
    lookups_ = 0;
    hits_ = 0;
  }

  P0Cache(const P0Cache &o) { *this = o; }
  P0Cache &operator=(const P0Cache &o) {
    min_ = o.min_;
    width_ = o.width_;
    values_ = o.values_;
    filled_ = o.filled_;
    lookups_ = o.lookups_.load();
    hits_ = o.hits_.load();
    return *this;
  }
  P0Cache(P0Cache &&o) noexcept { *this = std::move(o); }
  P0Cache &operator=(P0Cache &&o) noexcept {
    min_ = o.min_;
    width_ = o.width_;
    values_ = std::move(o.values_);
    filled_ = std::move(o.filled_);
    lookups_ = o.lookups_.load();
    hits_ = o.hits_.load();
    return *this;
  }

  friend bool operator==(const P0Cache &a, const P0Cache &b) { return a.values_ == b.values_; }

private:
  std::size_t slot(const Segment &s) const { return std::size_t(s.start) * width_ + (s.length() - min_); }

  std::uint32_t min_ = 1, width_ = 1;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::uint8_t>> filled_;
  mutable std::atomic<std::uint64_t> lookups_{0}, hits_{0};
};

/// Settings shared by all frequency backends.
struct BackendSettings {
  std::uint32_t min_len = 1;
  std::uint32_t max_len = 20;
  std::size_t l0_subsample = 1'000'000;
  std::size_t calibration_sample = 10'000;
  double calibration_target = 0.5;
  bool calibrate = true;
  DensityParams density;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct BaseSummary {
  std::size_t n_candidates = 0;
  std::size_t n_L0 = 0;
  double beta = 0.0;
  double calibration_fraction = 0.0;
};

/// Uniform subsample without replacement, returned in ascending order.
inline std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t want, Rng &rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (want >= population) return idx;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, population - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// fn(begin, end) over consecutive batches of [0, n), batches spread over workers.
template <typename Fn>
void for_each_batch(std::size_t n, std::size_t workers, Fn &&fn, std::size_t batch = 64) {
  const std::size_t nb = (n + batch - 1) / batch;
  parallel_for(nb, workers, [&](std::size_t b) { fn(b * batch, std::min(n, (b + 1) * batch)); });
}

/// Speech backend: mean-pooled embeddings, kNN indexes for L0 and L, Gaussian soft counts.
class KnnBackend {
public:
  using CorpusType = Corpus;

  KnnBackend(const Corpus &corpus, Embedder embedder = Embedder{}) : corpus_(&corpus), embedder_(embedder) {}

  using Query = SegmentEmbedding;
  Query query(const Segment &s) const { return embedder_(*corpus_, s); }

  BaseSummary build_base(std::span<const Segment> candidates, const BackendSettings &cfg, P0Cache &cache) {
    if (candidates.empty()) throw Error("no candidate segments");
    Rng rng = purpose_rng(cfg.seed, "l0-subsample");
    const auto pick = subsample_indices(candidates.size(), cfg.l0_subsample, rng);
    std::vector<SegmentEmbedding> emb(pick.size());
    std::vector<Segment> prov(pick.size());
    parallel_for(pick.size(), cfg.workers, [&](std::size_t i) {
      prov[i] = candidates[pick[i]];
      emb[i] = query(prov[i]);
    });
    base_ = InstanceIndex(emb, prov);

    params_ = cfg.density;
    BaseSummary summary{candidates.size(), base_.size(), params_.beta, 0.0};
    if (cfg.calibrate && base_.size() >= 100) {
      Rng crng = purpose_rng(cfg.seed, "beta-calibration");
      const auto cal = subsample_indices(base_.size(), cfg.calibration_sample, crng);
      std::vector<std::vector<double>> lists(cal.size());
      for_each_batch(cal.size(), cfg.workers, [&](std::size_t b0, std::size_t b1) {
        std::vector<SegmentEmbedding> qs;
        for (std::size_t i = b0; i < b1; ++i) qs.push_back(emb[cal[i]]);
        const auto found = base_.search_batch(qs, params_.k);
        for (std::size_t i = b0; i < b1; ++i)
          for (const auto &nb : found[i - b0])
            if (!base_.provenance(nb.index).overlaps(prov[cal[i]])) lists[i].push_back(nb.sq_distance);
      });
      const auto r = calibrate_beta_from_lists(lists, params_.k, params_.epsilon_f, cfg.calibration_target);
      params_.beta = r.beta;
      summary.beta = r.beta;
      summary.calibration_fraction = r.achieved_fraction;
    }

    const double n_L0 = static_cast<double>(base_.size());
    for_each_batch(candidates.size(), cfg.workers, [&](std::size_t b0, std::size_t b1) {
      std::vector<SegmentEmbedding> qs;
      for (std::size_t i = b0; i < b1; ++i) qs.push_back(query(candidates[i]));
      const auto found = base_.search_batch(qs, params_.k);
      for (std::size_t i = b0; i < b1; ++i)
        cache.set(candidates[i], kernel_sum(base_, found[i - b0], candidates[i], params_.beta) / n_L0);
    });
    return summary;
  }

  void set_lexicon(std::span<const Segment> tokens, const BackendSettings &cfg) {
    if (tokens.empty()) {
      lexicon_ = InstanceIndex{};
      return;
    }
    std::vector<SegmentEmbedding> emb(tokens.size());
    parallel_for(tokens.size(), cfg.workers, [&](std::size_t i) { emb[i] = query(tokens[i]); });
    lexicon_ = InstanceIndex(emb, tokens);
  }

  FrequencyEstimate lexicon_frequency(const Query &q, const Segment &s) const {
    return estimate_frequency(lexicon_, q, s, params_);
  }

  const InstanceIndex &base_index() const { return base_; }
  const InstanceIndex &lexicon_index() const { return lexicon_; }
  const DensityParams &density() const { return params_; }

private:
  const Corpus *corpus_;
  Embedder embedder_;
  DensityParams params_;
  InstanceIndex base_;
  InstanceIndex lexicon_;
};

/// Text backend: exact substring counts. The occurrences overlapping the query inside its
/// own utterance (its own instance included) are left out, mirroring the kNN rule.
class CountBackend {
public:
  using CorpusType = TextCorpus;
  using Query = DiscreteKey;

  explicit CountBackend(const TextCorpus &corpus) : corpus_(&corpus) {}

  Query query(const Segment &s) const { return embed_discrete(corpus_->utterances[s.utt].symbols, s); }

  BaseSummary build_base(std::span<const Segment> candidates, const BackendSettings &cfg, P0Cache &cache) {
    if (candidates.empty()) throw Error("no candidate segments");
    base_.clear();
    for (const auto &s : candidates) base_.add(query(s));
    const double n_L0 = static_cast<double>(base_.total());
    parallel_for(candidates.size(), cfg.workers, [&](std::size_t i) {
      const auto &s = candidates[i];
      const auto key = query(s);
      const double own = double(self_overlaps(s, cfg.min_len, cfg.max_len));
      cache.set(s, (exact_count(base_, key) - own) / n_L0);
    });
    return {candidates.size(), static_cast<std::size_t>(base_.total()), 0.0, 0.0};
  }

  void set_lexicon(std::span<const Segment> tokens, const BackendSettings &) {
    lexicon_.clear();
    by_utt_.assign(corpus_->size(), {});
    for (const auto &t : tokens) {
      lexicon_.add(query(t));
      by_utt_[t.utt].push_back(t);
    }
  }

  FrequencyEstimate lexicon_frequency(const Query &q, const Segment &s) const {
    double c = exact_count(lexicon_, q);
    const auto &sym = corpus_->utterances[s.utt].symbols;
    for (const auto &t : by_utt_[s.utt])
      if (t.overlaps(s) && t.length() == s.length() &&
          std::equal(sym.begin() + t.start, sym.begin() + t.end, sym.begin() + s.start))
        c -= 1.0;
    return c;
  }

  const CountTable &base_counts() const { return base_; }
  const CountTable &lexicon_counts() const { return lexicon_; }

private:
  // Occurrences of s's string in its own utterance at positions overlapping s (s included).
  std::size_t self_overlaps(const Segment &s, std::uint32_t min_len, std::uint32_t max_len) const {
    const auto &sym = corpus_->utterances[s.utt].symbols;
    const std::uint32_t len = s.length();
    if (len < min_len || len > max_len) return 0;
    std::size_t n = 0;
    const std::uint32_t lo = s.start + 1 >= len ? s.start + 1 - len : 0;
    for (std::uint32_t p = lo; p < s.end && p + len <= sym.size(); ++p)
      if (std::equal(sym.begin() + p, sym.begin() + p + len, sym.begin() + s.start)) ++n;
    return n;
  }

  const TextCorpus *corpus_;
  CountTable base_;
  CountTable lexicon_;
  std::vector<std::vector<Segment>> by_utt_;
};

/// Ablation backend: soft counts replaced by the size of the nearest k-means cluster.
/// Cluster numbers come from an oracle (the true number of types in the clustered set).
class KMeansBackend {
public:
  using CorpusType = Corpus;
  using Query = SegmentEmbedding;
  using ClusterOracle = std::function<std::size_t(std::span<const Segment>)>;

  KMeansBackend(const Corpus &corpus, ClusterOracle oracle, Embedder embedder = Embedder{},
                std::size_t max_points = 20'000, std::size_t max_iterations = 100)
      : corpus_(&corpus), embedder_(embedder), oracle_(std::move(oracle)), max_points_(max_points),
        max_iterations_(max_iterations) {}

  Query query(const Segment &s) const { return embedder_(*corpus_, s); }

  BaseSummary build_base(std::span<const Segment> candidates, const BackendSettings &cfg, P0Cache &cache) {
    if (candidates.empty()) throw Error("no candidate segments");
    Rng rng = purpose_rng(cfg.seed, "l0-subsample");
    // Lloyd iterations cost points x clusters, so the clustered base is capped at max_points.
    const auto pick = subsample_indices(candidates.size(), std::min(cfg.l0_subsample, max_points_), rng);
    std::vector<SegmentEmbedding> emb(pick.size());
    std::vector<Segment> prov(pick.size());
    parallel_for(pick.size(), cfg.workers, [&](std::size_t i) {
      prov[i] = candidates[pick[i]];
      emb[i] = query(prov[i]);
    });
    const std::size_t clusters = std::clamp<std::size_t>(oracle_(prov), 1, prov.size());
    base_.emplace(emb, clusters, splitmix64(cfg.seed ^ 0x6b6d65616e73ull), max_iterations_);
    const double n_L0 = static_cast<double>(prov.size());
    parallel_for(candidates.size(), cfg.workers, [&](std::size_t i) {
      cache.set(candidates[i], base_->frequency(query(candidates[i])) / n_L0);
    });
    return {candidates.size(), prov.size(), 0.0, 0.0};
  }

  void set_lexicon(std::span<const Segment> tokens, const BackendSettings &cfg) {
    lexicon_.reset();
    if (tokens.empty()) return;
    std::vector<SegmentEmbedding> emb(tokens.size());
    parallel_for(tokens.size(), cfg.workers, [&](std::size_t i) { emb[i] = query(tokens[i]); });
    const std::size_t clusters = std::clamp<std::size_t>(oracle_(tokens), 1, tokens.size());
    lexicon_.emplace(emb, clusters, splitmix64(cfg.seed ^ 0x6c6578696b6dull), max_iterations_);
  }

  FrequencyEstimate lexicon_frequency(const Query &q, const Segment &) const {
    return lexicon_ ? lexicon_->frequency(q) : 0.0;
  }

private:
  const Corpus *corpus_;
  Embedder embedder_;
  ClusterOracle oracle_;
  std::size_t max_points_;
  std::size_t max_iterations_;
  std::optional<KMeans> base_;
  std::optional<KMeans> lexicon_;
};

} // namespace dpparse
