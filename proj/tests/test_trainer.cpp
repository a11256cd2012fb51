#include <gtest/gtest.h>

#include "dpparse/synthgen.hpp"
#include "dpparse/trainer.hpp"

using namespace dpparse;

namespace {

Corpus corpus_of_lengths(std::initializer_list<std::uint32_t> lengths) {
  Corpus c;
  std::size_t i = 0;
  for (auto n : lengths) c.utterances.emplace_back("u" + std::to_string(i++), n, 2, std::vector<float>(n * 2, 0.5f));
  return c;
}

SyntheticCorpus small_speech(std::uint64_t seed = 5) {
  GenConfig g;
  g.vocab_size = 8;
  g.n_utterances = 60;
  g.seed = seed;
  return generate(g);
}

SyntheticCorpus small_text(std::uint64_t seed = 6) {
  GenConfig g;
  g.mode = Mode::discrete;
  g.vocab_size = 10;
  g.alphabet_size = 12;
  g.n_utterances = 150;
  g.seed = seed;
  return generate(g);
}

TrainerConfig quick_config(double delta, std::size_t iterations = 2) {
  TrainerConfig t;
  t.n_iterations = iterations;
  t.dp.delta = delta;
  t.backend.seed = 17;
  return t;
}

} // namespace

TEST(InitSegmentation, ThresholdRule) {
  const auto c = corpus_of_lengths({5, 15, 30});
  const auto seed = init_segmentation(c, 20);
  ASSERT_EQ(seed.size(), 2u);
  EXPECT_EQ(seed[0], (Segment{0, 0, 5}));
  EXPECT_EQ(seed[1], (Segment{1, 0, 15}));
  EXPECT_TRUE(init_segmentation(corpus_of_lengths({21, 40}), 20).empty());
  EXPECT_EQ(init_segmentation(corpus_of_lengths({1, 2, 20}), 20).size(), 3u);
}

TEST(EnumerateCandidates, Counts) {
  EXPECT_EQ(enumerate_candidates(corpus_of_lengths({6}), 2, 6).size(), 15u);
  EXPECT_EQ(enumerate_candidates(corpus_of_lengths({1}), 1, 20).size(), 1u);
  EXPECT_TRUE(enumerate_candidates(Corpus{}, 1, 20).empty());
  for (const auto &s : enumerate_candidates(corpus_of_lengths({9, 4}), 2, 3)) {
    EXPECT_GE(s.length(), 2u);
    EXPECT_LE(s.length(), 3u);
  }
}

TEST(BuildBase, SmallCorpusIsNotSubsampled) {
  const auto syn = small_speech();
  Trainer t(syn.corpus, KnnBackend(syn.corpus), quick_config(4.0));
  const auto st = t.initialize();
  EXPECT_EQ(st.base.n_L0, st.base.n_candidates);
  EXPECT_EQ(t.backend().base_index().size(), st.base.n_candidates);
  EXPECT_GT(st.base.beta, 0.0);
  EXPECT_NEAR(st.base.calibration_fraction, 0.5, 0.02);
}

TEST(BuildBase, SubsampleIsCappedAndSeeded) {
  const auto syn = small_speech();
  auto cfg = quick_config(4.0);
  cfg.backend.l0_subsample = 500;
  Trainer a(syn.corpus, KnnBackend(syn.corpus), cfg), b(syn.corpus, KnnBackend(syn.corpus), cfg);
  const auto sa = a.initialize(), sb = b.initialize();
  EXPECT_EQ(sa.base.n_L0, 500u);
  EXPECT_TRUE(sa.p0 == sb.p0);
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(a.backend().base_index().provenance(i), b.backend().base_index().provenance(i));
}

TEST(BuildBase, DiscreteBaseIsExactCountsWithoutOwnOccurrence) {
  TextCorpus c;
  c.alphabet = {"a", "b"};
  c.utterances.push_back({"x", {0, 1, 0, 1}});
  c.utterances.push_back({"y", {0, 1}});
  auto cfg = quick_config(2.0);
  cfg.backend.max_len = 4;
  Trainer t(c, CountBackend(c), cfg);
  const auto st = t.initialize();
  // candidates: 10 in "x", 3 in "y"
  ASSERT_EQ(st.base.n_L0, 13u);
  // "ab" occurs 3 times; "y"'s own copy is excluded, the two in "x" do not overlap it
  EXPECT_DOUBLE_EQ(*st.p0.get({1, 0, 2}), 2.0 / 13.0);
  // "ab" at x[0,2): the other copy in x at [2,4) does not overlap, the one in y counts
  EXPECT_DOUBLE_EQ(*st.p0.get({0, 0, 2}), 2.0 / 13.0);
  // "ba" occurs once, at x[1,3): only itself
  EXPECT_DOUBLE_EQ(*st.p0.get({0, 1, 3}), 0.0);
}

TEST(RunIteration, EveryArcHitsTheBaseCache) {
  const auto syn = small_speech();
  Trainer t(syn.corpus, KnnBackend(syn.corpus), quick_config(4.0));
  auto st = t.initialize();
  st.p0.reset_counters();
  st = t.run_iteration(st);
  EXPECT_GT(st.p0.lookups(), 0u);
  EXPECT_EQ(st.p0.hits(), st.p0.lookups());
}

TEST(RunIteration, BaseProbabilitiesNeverChange) {
  const auto syn = small_speech();
  Trainer t(syn.corpus, KnnBackend(syn.corpus), quick_config(4.0));
  const auto st0 = t.initialize();
  auto st = t.run_iteration(st0);
  st = t.run_iteration(st);
  EXPECT_TRUE(st.p0 == st0.p0);
}

TEST(RunIteration, LexiconSizeIsTheTokenCount) {
  const auto syn = small_speech();
  Trainer t(syn.corpus, KnnBackend(syn.corpus), quick_config(4.0));
  auto st = t.initialize();
  EXPECT_EQ(st.lexicon_tokens.size(), init_segmentation(syn.corpus, 20).size());
  for (int i = 0; i < 3; ++i) {
    st = t.run_iteration(st);
    EXPECT_TRUE(st.segmentation.valid());
    EXPECT_EQ(st.lexicon_tokens.size(), st.segmentation.token_count());
    EXPECT_EQ(st.iteration, std::size_t(i + 1));
  }
}

TEST(RunIteration, GreedyDecodingIsIdempotent) {
  const auto syn = small_speech();
  auto cfg = quick_config(4.0);
  cfg.beam = 1;
  Trainer t(syn.corpus, KnnBackend(syn.corpus), cfg);
  auto st = t.initialize();
  st = t.run_iteration(st);
  const auto a = t.run_iteration(st), b = t.run_iteration(st);
  EXPECT_EQ(a.segmentation.tokens, b.segmentation.tokens);
}

TEST(RunIteration, DiscreteLexiconRaisesWordProbability) {
  const auto syn = small_text();
  auto cfg = quick_config(2.0);
  Trainer t(syn.text, CountBackend(syn.text), cfg);
  auto st = t.initialize();
  const auto gold = gold_segmentation(syn.text, syn.gold);
  st.lexicon_tokens.clear();
  for (const auto &toks : gold.tokens) st.lexicon_tokens.insert(st.lexicon_tokens.end(), toks.begin(), toks.end());
  t.backend().set_lexicon(st.lexicon_tokens, cfg.backend);
  DPParams dp = cfg.dp;
  dp.n_L = double(st.lexicon_tokens.size());
  // a gold token of a word seen elsewhere beats its base probability
  std::size_t checked = 0;
  for (const auto &toks : gold.tokens)
    for (const auto &s : toks) {
      const double lw = t.backend().lexicon_frequency(t.backend().query(s), s);
      if (lw < 1.0) continue;
      EXPECT_GT(word_probability(lw, *st.p0.get(s), dp), *st.p0.get(s));
      ++checked;
    }
  EXPECT_GT(checked, 100u);
}

TEST(Train, WorkerCountDoesNotChangeTheResult) {
  const auto syn = small_speech();
  auto one = quick_config(4.0, 3), three = quick_config(4.0, 3);
  three.backend.workers = 3;
  const auto a = Trainer(syn.corpus, KnnBackend(syn.corpus), one).train();
  const auto b = Trainer(syn.corpus, KnnBackend(syn.corpus), three).train();
  EXPECT_EQ(a.tokens, b.tokens);
}

TEST(Train, SameSeedSameResultDifferentSeedUsuallyDiffers) {
  const auto syn = small_text();
  const auto a = Trainer(syn.text, CountBackend(syn.text), quick_config(2.0, 4)).train();
  const auto b = Trainer(syn.text, CountBackend(syn.text), quick_config(2.0, 4)).train();
  EXPECT_EQ(a.tokens, b.tokens);
  auto other = quick_config(2.0, 4);
  other.backend.seed = 18;
  other.dp.gamma = 0.0;
  other.temperature = 50.0;
  const auto c = Trainer(syn.text, CountBackend(syn.text), other).train();
  EXPECT_NE(a.tokens, c.tokens);
}

TEST(Train, LogsOneRecordPerIteration) {
  const auto syn = small_text();
  std::vector<IterationLog> logs;
  const auto seg = Trainer(syn.text, CountBackend(syn.text), quick_config(2.0, 3)).train(
      [&](const IterationLog &r) { logs.push_back(r); });
  ASSERT_EQ(logs.size(), 3u);
  EXPECT_EQ(logs.back().iteration, 3u);
  EXPECT_EQ(logs.back().n_tokens, seg.token_count());
  EXPECT_GT(logs.back().mean_token_ms, 0.0);
}

TEST(Train, DiscreteRecoversASmallLexicon) {
  const auto syn = small_text();
  const auto seg = Trainer(syn.text, CountBackend(syn.text), quick_config(2.0, 10)).train();
  EXPECT_GE(token_boundary_f1(seg, syn.gold).token_f1, 0.6);
}

TEST(Trainer, RejectsUtterancesBelowMinimumLength) {
  const auto c = corpus_of_lengths({3, 1});
  auto cfg = quick_config(4.0);
  cfg.backend.min_len = 2;
  EXPECT_THROW(Trainer(c, KnnBackend(c), cfg), Error);
}

TEST(KMeansBackend, TrainsWithAnOracleClusterCount) {
  const auto syn = small_speech();
  auto cfg = quick_config(4.0, 2);
  KMeansBackend backend(syn.corpus, label_type_oracle(syn.corpus, syn.gold), Embedder{}, 2000, 20);
  const auto seg = Trainer(syn.corpus, std::move(backend), cfg).train();
  EXPECT_TRUE(seg.valid());
}
