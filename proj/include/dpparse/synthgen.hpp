#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "embedder.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace dpparse {

/// Synthetic corpus with a known segmentation: a Zipfian lexicon of prototype words
/// whose tokens are noisy copies of the prototype blocks.
struct GenConfig {
  Mode mode = Mode::continuous;
  std::size_t vocab_size = 50;
  double zipf_exponent = 1.0;
  std::uint32_t word_len_min = 2;
  std::uint32_t word_len_max = 6;
  std::uint32_t dim = 16;
  double noise_sigma = 0.1;
  std::size_t n_utterances = 2000;
  std::uint32_t words_per_utterance_min = 1;
  std::uint32_t words_per_utterance_max = 3;
  std::size_t alphabet_size = 30; // discrete mode only
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size < 1) throw Error("gen: vocab_size must be >= 1");
    if (!(zipf_exponent >= 0.0)) throw Error("gen: zipf_exponent must be >= 0");
    if (word_len_min < 1 || word_len_max < word_len_min) throw Error("gen: invalid word length range");
    if (!(noise_sigma >= 0.0)) throw Error("gen: noise_sigma must be >= 0");
    if (words_per_utterance_min < 1 || words_per_utterance_max < words_per_utterance_min)
      throw Error("gen: invalid words-per-utterance range");
    if (mode == Mode::continuous && dim < 1) throw Error("gen: dim must be >= 1");
    if (mode == Mode::discrete) {
      if (alphabet_size < 2) throw Error("gen: alphabet_size must be >= 2");
      // Enough distinct strings must exist to draw vocab_size different words.
      double space = 0.0;
      for (std::uint32_t l = word_len_min; l <= word_len_max && space < 1e12; ++l)
        space += std::pow(double(alphabet_size), double(l));
      if (space < double(vocab_size)) throw Error("gen: alphabet too small for a distinct vocabulary");
    }
  }
};

struct LexiconEntry {
  std::size_t word_id = 0;
  std::uint32_t length = 0;
  std::size_t frequency_rank = 0; // 1 = most probable
};

struct SyntheticCorpus {
  Corpus corpus;         // continuous mode
  TextCorpus text;       // discrete mode
  GoldAlignment gold;
  std::vector<LexiconEntry> lexicon;
  std::vector<std::vector<std::size_t>> word_ids; // per utterance, emitted word ids
};

/// Zipf probabilities over ranks 1..n: p(r) proportional to r^-s.
inline std::vector<double> zipf_weights(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = std::pow(double(r + 1), -s);
  return w;
}

inline std::string utterance_name(std::size_t i) {
  std::string digits = std::to_string(i);
  return "utt" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

inline SyntheticCorpus generate(const GenConfig &cfg) {
  cfg.validate();
  Rng rng(splitmix64(cfg.seed));
  std::uniform_int_distribution<std::uint32_t> word_len(cfg.word_len_min, cfg.word_len_max);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticCorpus out;
  // Prototypes: continuous words are sequences of unit vectors; discrete words are
  // distinct symbol strings.
  std::vector<std::vector<std::vector<double>>> protos(cfg.vocab_size);
  std::vector<std::vector<std::uint32_t>> spellings(cfg.vocab_size);
  if (cfg.mode == Mode::continuous) {
    for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
      const std::uint32_t len = word_len(rng);
      for (std::uint32_t b = 0; b < len; ++b) {
        std::vector<double> v(cfg.dim);
        double n2 = 0.0;
        do {
          n2 = 0.0;
          for (auto &x : v) {
            x = gauss(rng);
            n2 += x * x;
          }
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (auto &x : v) x *= inv;
        protos[w].push_back(std::move(v));
      }
    }
  } else {
    std::uniform_int_distribution<std::uint32_t> sym(0, static_cast<std::uint32_t>(cfg.alphabet_size - 1));
    std::set<std::vector<std::uint32_t>> used;
    for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
      std::vector<std::uint32_t> s;
      do {
        s.assign(word_len(rng), 0);
        for (auto &x : s) x = sym(rng);
      } while (!used.insert(s).second);
      spellings[w] = std::move(s);
    }
    for (std::size_t a = 0; a < cfg.alphabet_size; ++a) out.text.alphabet.push_back("p" + std::to_string(a));
  }
  for (std::size_t w = 0; w < cfg.vocab_size; ++w)
    out.lexicon.push_back({w, cfg.mode == Mode::continuous ? std::uint32_t(protos[w].size())
                                                           : std::uint32_t(spellings[w].size()),
                           w + 1});

  const auto weights = zipf_weights(cfg.vocab_size, cfg.zipf_exponent);
  std::discrete_distribution<std::size_t> pick_word(weights.begin(), weights.end());
  std::uniform_int_distribution<std::uint32_t> n_words(cfg.words_per_utterance_min, cfg.words_per_utterance_max);

  for (std::size_t u = 0; u < cfg.n_utterances; ++u) {
    const std::string id = utterance_name(u);
    const std::uint32_t nw = n_words(rng);
    std::vector<std::size_t> words(nw);
    for (auto &w : words) w = pick_word(rng);

    UtteranceAlignment ali;
    ali.word_boundaries_ms.push_back(0);
    std::uint32_t t = 0;
    std::vector<float> frames;
    std::vector<std::uint32_t> symbols;
    for (auto w : words) {
      const std::uint32_t len = out.lexicon[w].length;
      for (std::uint32_t b = 0; b < len; ++b) {
        std::string label;
        if (cfg.mode == Mode::continuous) {
          for (std::uint32_t d = 0; d < cfg.dim; ++d)
            frames.push_back(static_cast<float>(protos[w][b][d] + cfg.noise_sigma * gauss(rng)));
          label = "w" + std::to_string(w) + "_" + std::to_string(b);
        } else {
          symbols.push_back(spellings[w][b]);
          label = out.text.alphabet[spellings[w][b]];
        }
        ali.phones.push_back({block_to_ms(t), block_to_ms(t + 1), std::move(label)});
        ++t;
      }
      ali.word_boundaries_ms.push_back(block_to_ms(t));
    }
    if (cfg.mode == Mode::continuous)
      out.corpus.utterances.emplace_back(id, t, cfg.dim, std::move(frames));
    else
      out.text.utterances.push_back({id, std::move(symbols)});
    out.gold.ids.push_back(id);
    out.gold.utterances.push_back(std::move(ali));
    out.word_ids.push_back(std::move(words));
  }
  return out;
}

/// Gold word tokens as a block-level segmentation (phones coincide with blocks).
template <SegmentableCorpus C>
Segmentation gold_segmentation(const C &corpus, const GoldAlignment &gold) {
  Segmentation seg = Segmentation::empty_for(corpus);
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    const auto *ali = gold.find(corpus.id(u));
    if (!ali) throw Error("no gold alignment for utterance '" + corpus.id(u) + "'");
    std::vector<std::uint32_t> ends;
    for (std::size_t i = 1; i < ali->word_boundaries_ms.size(); ++i)
      ends.push_back(ms_to_block_end(ali->word_boundaries_ms[i]));
    seg.tokens[u] = Segmentation::from_ends(static_cast<std::uint32_t>(u), ends);
  }
  return seg;
}

/// Number of distinct gold phone-label sequences among `segments`: the true type count
/// handed to the k-means ablation. A segment's sequence is the labels of the phones that
/// overlap its time span.
template <SegmentableCorpus C>
std::function<std::size_t(std::span<const Segment>)> label_type_oracle(const C &corpus, const GoldAlignment &gold) {
  std::vector<const UtteranceAlignment *> by_utt(corpus.size());
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    by_utt[u] = gold.find(corpus.id(u));
    if (!by_utt[u]) throw Error("no gold alignment for utterance '" + corpus.id(u) + "'");
  }
  return [by_utt](std::span<const Segment> segments) {
    std::set<std::vector<std::string>> types;
    for (const auto &s : segments) {
      const std::uint32_t lo = block_to_ms(s.start), hi = block_to_ms(s.end);
      std::vector<std::string> key;
      for (const auto &p : by_utt.at(s.utt)->phones)
        if (p.start_ms < hi && lo < p.end_ms) key.push_back(p.label);
      types.insert(std::move(key));
    }
    return types.size();
  };
}

/// Moves every internal hypothesis boundary by a uniform offset in [-max_ms, +max_ms],
/// keeping boundaries strictly increasing. Used to exercise phone snapping.
inline TimedSegmentation jitter_boundaries(TimedSegmentation t, std::uint32_t max_ms, std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x6a6974746572ull));
  std::uniform_int_distribution<int> off(-int(max_ms), int(max_ms));
  for (auto &b : t.boundaries_ms)
    for (std::size_t i = 1; i + 1 < b.size(); ++i) {
      const int lo = int(b[i - 1]) + 1, hi = int(b[i + 1]) - 1;
      if (lo > hi) continue;
      b[i] = std::uint32_t(std::clamp(int(b[i]) + off(rng), lo, hi));
    }
  return t;
}

/// ABX triplets over gold word tokens of a continuous synthetic corpus: A and X are two
/// tokens of one word type, B a token of another type. Embeddings are mean-pooled.
inline std::vector<Triplet> word_triplets(const SyntheticCorpus &syn, std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<Segment>> by_word(syn.lexicon.size());
  for (std::size_t u = 0; u < syn.word_ids.size(); ++u) {
    std::uint32_t t = 0;
    for (auto w : syn.word_ids[u]) {
      by_word[w].push_back({static_cast<std::uint32_t>(u), t, t + syn.lexicon[w].length});
      t += syn.lexicon[w].length;
    }
  }
  std::vector<std::size_t> repeated;
  for (std::size_t w = 0; w < by_word.size(); ++w)
    if (by_word[w].size() >= 2) repeated.push_back(w);
  std::size_t present = 0;
  for (const auto &v : by_word) present += !v.empty();
  if (repeated.empty() || present < 2) throw Error("abx triplets need a repeated word and a second word type");

  Rng rng(splitmix64(seed ^ 0x616278ull));
  auto pick = [&](std::size_t n_items) { return std::uniform_int_distribution<std::size_t>(0, n_items - 1)(rng); };
  std::vector<Triplet> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::size_t w = repeated[pick(repeated.size())];
    std::size_t v = pick(by_word.size());
    if (v == w || by_word[v].empty()) continue;
    const auto &toks = by_word[w];
    const std::size_t ia = pick(toks.size());
    std::size_t ix = pick(toks.size() - 1);
    if (ix >= ia) ++ix;
    const Segment &b = by_word[v][pick(by_word[v].size())];
    out.push_back({embed(syn.corpus.utterances[toks[ia].utt], toks[ia]), embed(syn.corpus.utterances[b.utt], b),
                   embed(syn.corpus.utterances[toks[ix].utt], toks[ix])});
  }
  return out;
}

} // namespace dpparse
