#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dpparse/density.hpp"
#include "dpparse/synthgen.hpp"

using namespace dpparse;

namespace {

std::vector<std::size_t> word_counts(const SyntheticCorpus &syn) {
  std::vector<std::size_t> c(syn.lexicon.size(), 0);
  for (const auto &ws : syn.word_ids)
    for (auto w : ws) ++c[w];
  return c;
}

GenConfig many_tokens(double zipf) {
  GenConfig g;
  g.vocab_size = 50;
  g.zipf_exponent = zipf;
  g.dim = 2;
  g.word_len_min = g.word_len_max = 1;
  g.words_per_utterance_min = g.words_per_utterance_max = 10;
  g.n_utterances = 10'000;
  g.seed = 7;
  return g;
}

} // namespace

TEST(Generate, NoiselessCopiesAreBitIdentical) {
  GenConfig g;
  g.noise_sigma = 0.0;
  g.n_utterances = 200;
  const auto syn = generate(g);
  std::map<std::size_t, std::vector<float>> first;
  std::size_t compared = 0;
  for (std::size_t u = 0; u < syn.word_ids.size(); ++u) {
    const auto &m = syn.corpus.utterances[u];
    std::uint32_t t = 0;
    for (auto w : syn.word_ids[u]) {
      const std::uint32_t len = syn.lexicon[w].length;
      std::vector<float> frames(m.data().begin() + std::size_t(t) * m.dim(),
                                m.data().begin() + std::size_t(t + len) * m.dim());
      auto [it, fresh] = first.emplace(w, frames);
      if (!fresh) {
        EXPECT_EQ(it->second, frames);
        ++compared;
      }
      t += len;
    }
  }
  EXPECT_GT(compared, 100u);
}

TEST(Generate, ZeroExponentIsUniform) {
  const auto syn = generate(many_tokens(0.0));
  const auto counts = word_counts(syn);
  const double n = 100'000.0, p = 1.0 / 50.0;
  const double sd = std::sqrt(n * p * (1.0 - p));
  for (auto c : counts) EXPECT_NEAR(double(c), n * p, 3.0 * sd);
}

TEST(Generate, UnitExponentHasSlopeMinusOne) {
  const auto syn = generate(many_tokens(1.0));
  const auto counts = word_counts(syn);
  // least-squares slope of log(count) against log(rank)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) {
    const double x = std::log(double(r + 1)), y = std::log(double(counts[r]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -1.0, 0.1);
}

TEST(Generate, AlignmentMatchesFramesAndWords) {
  GenConfig g;
  g.n_utterances = 100;
  const auto syn = generate(g);
  ASSERT_EQ(syn.gold.ids.size(), 100u);
  for (std::size_t u = 0; u < 100; ++u) {
    const auto &a = syn.gold.utterances[u];
    EXPECT_EQ(a.duration_ms(), block_to_ms(syn.corpus.utterances[u].n_blocks()));
    EXPECT_EQ(a.word_boundaries_ms.size(), syn.word_ids[u].size() + 1);
    EXPECT_EQ(a.phones.size(), syn.corpus.utterances[u].n_blocks());
    EXPECT_GE(syn.word_ids[u].size(), g.words_per_utterance_min);
    EXPECT_LE(syn.word_ids[u].size(), g.words_per_utterance_max);
  }
  for (const auto &e : syn.lexicon) {
    EXPECT_GE(e.length, g.word_len_min);
    EXPECT_LE(e.length, g.word_len_max);
  }
  EXPECT_TRUE(validate_corpus(syn.corpus).empty());
}

TEST(Generate, GoldSegmentationScoresPerfectly) {
  GenConfig g;
  g.n_utterances = 50;
  const auto syn = generate(g);
  const auto seg = gold_segmentation(syn.corpus, syn.gold);
  EXPECT_TRUE(seg.valid());
  const auto r = token_boundary_f1(seg, syn.gold);
  EXPECT_EQ(r.token_f1, 1.0);
  EXPECT_EQ(r.boundary_f1, 1.0);
}

TEST(Generate, DiscreteWordsAreDistinctStrings) {
  GenConfig g;
  g.mode = Mode::discrete;
  g.vocab_size = 100;
  g.n_utterances = 300;
  const auto syn = generate(g);
  EXPECT_TRUE(syn.corpus.utterances.empty());
  EXPECT_EQ(syn.text.utterances.size(), 300u);
  EXPECT_EQ(syn.text.alphabet.size(), g.alphabet_size);
  EXPECT_TRUE(validate_corpus(syn.text).empty());
  const auto seg = gold_segmentation(syn.text, syn.gold);
  std::map<std::size_t, std::vector<std::uint32_t>> spelling;
  for (std::size_t u = 0; u < seg.size(); ++u)
    for (std::size_t i = 0; i < seg.tokens[u].size(); ++i) {
      const auto &s = seg.tokens[u][i];
      const auto &sym = syn.text.utterances[u].symbols;
      const std::vector<std::uint32_t> str(sym.begin() + s.start, sym.begin() + s.end);
      auto [it, fresh] = spelling.emplace(syn.word_ids[u][i], str);
      if (!fresh) {
        EXPECT_EQ(it->second, str);
      }
    }
  std::set<std::vector<std::uint32_t>> distinct;
  for (const auto &[w, s] : spelling) distinct.insert(s);
  EXPECT_EQ(distinct.size(), spelling.size());
}

TEST(Generate, SameSeedSameCorpus) {
  GenConfig g;
  g.n_utterances = 30;
  const auto a = generate(g), b = generate(g);
  ASSERT_EQ(a.corpus.size(), b.corpus.size());
  for (std::size_t u = 0; u < a.corpus.size(); ++u)
    EXPECT_TRUE(std::ranges::equal(a.corpus.utterances[u].data(), b.corpus.utterances[u].data()));
  g.seed = 1;
  const auto c = generate(g);
  EXPECT_NE(a.word_ids, c.word_ids);
}

TEST(Generate, RejectsBadConfigs) {
  GenConfig g;
  g.word_len_min = 5;
  g.word_len_max = 3;
  EXPECT_THROW(generate(g), Error);
  g = {};
  g.mode = Mode::discrete;
  g.alphabet_size = 2;
  g.word_len_min = g.word_len_max = 2;
  g.vocab_size = 5;
  EXPECT_THROW(generate(g), Error);
}

TEST(LabelTypeOracle, CountsDistinctLabelSequences) {
  GenConfig g;
  g.vocab_size = 5;
  g.n_utterances = 40;
  const auto syn = generate(g);
  const auto oracle = label_type_oracle(syn.corpus, syn.gold);
  const auto seg = gold_segmentation(syn.corpus, syn.gold);
  std::vector<Segment> toks;
  std::set<std::size_t> words;
  for (std::size_t u = 0; u < seg.size(); ++u) {
    toks.insert(toks.end(), seg.tokens[u].begin(), seg.tokens[u].end());
    words.insert(syn.word_ids[u].begin(), syn.word_ids[u].end());
  }
  EXPECT_EQ(oracle(toks), words.size());
}

TEST(JitterBoundaries, KeepsOrderAndEdges) {
  GenConfig g;
  g.n_utterances = 100;
  const auto syn = generate(g);
  const auto timed = to_timed(gold_segmentation(syn.corpus, syn.gold));
  const auto j = jitter_boundaries(timed, 25, 3);
  for (std::size_t u = 0; u < j.ids.size(); ++u) {
    const auto &b = j.boundaries_ms[u];
    EXPECT_EQ(b.front(), timed.boundaries_ms[u].front());
    EXPECT_EQ(b.back(), timed.boundaries_ms[u].back());
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LT(b[i - 1], b[i]);
    for (std::size_t i = 0; i < b.size(); ++i)
      EXPECT_LE(std::abs(int(b[i]) - int(timed.boundaries_ms[u][i])), 25);
  }
  // jitter within 20ms of a 40ms phone edge snaps back (never more than half the phone)
  EXPECT_EQ(token_boundary_f1(jitter_boundaries(timed, 19, 4), syn.gold).token_f1, 1.0);
}

TEST(WordTriplets, SameWordPairsAreCloser) {
  GenConfig g;
  g.n_utterances = 300;
  const auto syn = generate(g);
  const auto ts = word_triplets(syn, 2000, 9);
  ASSERT_EQ(ts.size(), 2000u);
  EXPECT_GT(abx_score(ts), 0.95);
}

TEST(Generate, NoiselessSoftCountsMatchTokenCounts) {
  GenConfig g;
  g.noise_sigma = 0.0;
  g.vocab_size = 10;
  g.n_utterances = 150;
  const auto syn = generate(g);
  const auto seg = gold_segmentation(syn.corpus, syn.gold);
  std::vector<SegmentEmbedding> emb;
  std::vector<Segment> prov;
  std::vector<std::size_t> word_of;
  for (std::size_t u = 0; u < seg.size(); ++u)
    for (std::size_t i = 0; i < seg.tokens[u].size(); ++i) {
      prov.push_back(seg.tokens[u][i]);
      emb.push_back(embed(syn.corpus.utterances[u], prov.back()));
      word_of.push_back(syn.word_ids[u][i]);
    }
  std::vector<std::size_t> count(syn.lexicon.size(), 0);
  for (auto w : word_of) ++count[w];
  const auto idx = build_index(emb, prov);
  const std::size_t k = 1000;
  for (std::size_t i = 0; i < emb.size(); i += 7) {
    // the query's own instance is excluded by overlap, so one fewer than the token count
    const double f = estimate_frequency(idx, emb[i], prov[i], {k, 1e3, 1e-3});
    EXPECT_NEAR(f, double(std::min(count[word_of[i]], k) - 1), 1e-6);
  }
}
