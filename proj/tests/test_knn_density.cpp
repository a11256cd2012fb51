#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "dpparse/density.hpp"
#include "oracles.hpp"

using namespace dpparse;

namespace {

std::vector<SegmentEmbedding> random_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<SegmentEmbedding> rows(n, SegmentEmbedding(dim));
  for (auto &r : rows)
    for (auto &x : r) x = g(rng);
  return rows;
}

// Provenance in distinct utterances so nothing overlaps.
std::vector<Segment> distinct_provenance(std::size_t n) {
  std::vector<Segment> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = {static_cast<std::uint32_t>(i), 0, 1};
  return p;
}

} // namespace

TEST(InstanceIndex, EmptyIsAnError) {
  try {
    build_index({}, {});
    FAIL();
  } catch (const Error &e) {
    EXPECT_STREQ(e.what(), "empty lexicon");
  }
}

TEST(InstanceIndex, SelfMatch) {
  const std::vector<SegmentEmbedding> rows{{0, 0}, {1, 5}, {3, -2}};
  const auto idx = build_index(rows, distinct_provenance(3));
  const auto nn = idx.search(rows[2], 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].index, 2u);
  EXPECT_EQ(nn[0].sq_distance, 0.0);
}

TEST(InstanceIndex, LargeKReturnsEverything) {
  const auto rows = random_rows(13, 4, 1);
  const auto idx = build_index(rows, distinct_provenance(13));
  EXPECT_EQ(idx.search(rows[0], 100).size(), 13u);
}

TEST(InstanceIndex, MatchesLinearScan) {
  const auto rows = random_rows(100'000, 8, 2);
  const auto queries = random_rows(100, 8, 3);
  const auto idx = build_index(rows, distinct_provenance(rows.size()));
  for (const auto &q : queries) {
    const auto got = idx.search(q, 10);
    const auto want = oracle::linear_knn(rows, q, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].index, want[i].index);
      EXPECT_EQ(got[i].sq_distance, want[i].d2);
    }
  }
}

TEST(InstanceIndex, TiesResolveByIndex) {
  const std::vector<SegmentEmbedding> rows(20, SegmentEmbedding{1.0, 1.0});
  const auto idx = build_index(rows, distinct_provenance(20));
  const auto nn = idx.search(SegmentEmbedding{0.0, 0.0}, 5);
  for (std::uint32_t i = 0; i < 5; ++i) EXPECT_EQ(nn[i].index, i);
}

TEST(InstanceIndex, BatchSearchEqualsSingleSearch) {
  const auto rows = random_rows(5000, 16, 4);
  const auto queries = random_rows(70, 16, 5);
  const auto idx = build_index(rows, distinct_provenance(rows.size()));
  const auto batch = idx.search_batch(queries, 25);
  for (std::size_t i = 0; i < queries.size(); ++i) EXPECT_EQ(batch[i], idx.search(queries[i], 25));
}

TEST(EstimateFrequency, IdenticalNeighborContributesOne) {
  const std::vector<SegmentEmbedding> rows{{2.0, 3.0}};
  const auto idx = build_index(rows, std::vector<Segment>{{1, 0, 4}});
  EXPECT_EQ(estimate_frequency(idx, rows[0], {0, 0, 4}, {10, 1.0, 1e-3}), 1.0);
}

TEST(EstimateFrequency, KNeighborsAtDistanceDWithBetaOneOverD) {
  const double d = 2.5;
  const std::size_t k = 7;
  std::vector<SegmentEmbedding> rows;
  for (std::size_t i = 0; i < k; ++i) rows.push_back({std::sqrt(d), 0.0});
  const auto idx = build_index(rows, distinct_provenance(k));
  const double f = estimate_frequency(idx, SegmentEmbedding{0.0, 0.0}, {999, 0, 1}, {k, 1.0 / d, 1e-3});
  EXPECT_NEAR(f, double(k) * std::exp(-1.0), 1e-12);
}

TEST(EstimateFrequency, OverlappingNeighborsAreExcluded) {
  const std::vector<SegmentEmbedding> rows{{0.0}, {0.0}, {0.0}};
  const std::vector<Segment> prov{{0, 0, 3}, {0, 2, 5}, {0, 4, 6}};
  const auto idx = build_index(rows, prov);
  EXPECT_EQ(estimate_frequency(idx, SegmentEmbedding{0.0}, {0, 1, 5}, {3, 1.0, 1e-3}), 0.0);
  // sharing only an endpoint is not overlap: [2,5) survives, [4,6) does not
  EXPECT_EQ(estimate_frequency(idx, SegmentEmbedding{0.0}, {0, 5, 8}, {3, 1.0, 1e-3}), 2.0);
  // same span in another utterance is not overlap
  EXPECT_EQ(estimate_frequency(idx, SegmentEmbedding{0.0}, {1, 0, 6}, {3, 1.0, 1e-3}), 3.0);
}

TEST(EstimateFrequency, StaysWithinZeroAndK) {
  const auto rows = random_rows(2000, 4, 6);
  const auto queries = random_rows(200, 4, 7);
  const auto idx = build_index(rows, distinct_provenance(rows.size()));
  for (double beta : {1e-6, 0.1, 1.0, 100.0})
    for (const auto &q : queries) {
      const double f = estimate_frequency(idx, q, {100000, 0, 1}, {50, beta, 1e-3});
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 50.0);
    }
}

TEST(EstimateFrequency, InsertionOrderDoesNotMatter) {
  const auto rows = random_rows(500, 6, 8);
  auto shuffled = rows;
  std::mt19937 rng(9);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = build_index(rows, distinct_provenance(rows.size()));
  const auto b = build_index(shuffled, distinct_provenance(rows.size()));
  for (const auto &q : random_rows(50, 6, 10)) {
    const double fa = estimate_frequency(a, q, {100000, 0, 1}, {20, 0.5, 1e-3});
    const double fb = estimate_frequency(b, q, {100000, 0, 1}, {20, 0.5, 1e-3});
    EXPECT_NEAR(fa, fb, 1e-12);
  }
}

namespace {

// Half the points have a near-duplicate partner; the other half are isolated.
struct DuplicateSample {
  std::vector<SegmentEmbedding> points;
  std::vector<Segment> prov;
};

DuplicateSample half_duplicated(std::size_t n_pairs, std::size_t n_single, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  DuplicateSample s;
  auto far_point = [&] {
    SegmentEmbedding v(8);
    for (auto &x : v) x = 10.0 * g(rng);
    return v;
  };
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto a = far_point();
    auto b = a;
    for (auto &x : b) x += 1e-3 * g(rng);
    s.points.push_back(std::move(a));
    s.points.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < n_single; ++i) s.points.push_back(far_point());
  s.prov = distinct_provenance(s.points.size());
  return s;
}

} // namespace

TEST(CalibrateBeta, HalfDuplicatedSampleLandsNearHalf) {
  const auto s = half_duplicated(500, 1000, 11);
  const auto idx = build_index(s.points, s.prov);
  const auto r = calibrate_beta(idx, s.points, s.prov, 10, 1e-3, 0.5);
  EXPECT_GE(r.achieved_fraction, 0.48);
  EXPECT_LE(r.achieved_fraction, 0.52);

  // direct re-evaluation at the returned beta
  std::size_t below = 0;
  for (std::size_t i = 0; i < s.points.size(); ++i)
    if (estimate_frequency(idx, s.points[i], s.prov[i], {10, r.beta, 1e-3}) < 1e-3) ++below;
  EXPECT_DOUBLE_EQ(double(below) / double(s.points.size()), r.achieved_fraction);
}

TEST(CalibrateBeta, FractionIsMonotoneInBeta) {
  const auto s = half_duplicated(200, 300, 12);
  const auto idx = build_index(s.points, s.prov);
  std::vector<std::vector<double>> lists;
  for (std::size_t i = 0; i < s.points.size(); ++i) lists.push_back(surviving_distances(idx, s.points[i], s.prov[i], 10));
  double prev = 0.0;
  for (double beta = 1e-8; beta < 1e8; beta *= 3.0) {
    const double f = fraction_below(lists, beta, 1e-3);
    EXPECT_GE(f, prev);
    prev = f;
  }
  EXPECT_EQ(fraction_below(lists, 1e-12, 1e-3), 0.0);
}

TEST(CalibrateBeta, UnreachableTargetReportsBothBounds) {
  // every point duplicated exactly: no beta pushes any sum below epsilon_f
  std::vector<SegmentEmbedding> pts;
  for (int i = 0; i < 100; ++i) {
    pts.push_back({double(i), 0.0});
    pts.push_back({double(i), 0.0});
  }
  const auto prov = distinct_provenance(pts.size());
  const auto idx = build_index(pts, prov);
  try {
    calibrate_beta(idx, pts, prov, 5, 1e-3, 0.5);
    FAIL();
  } catch (const Error &e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("lower bound"), std::string::npos);
    EXPECT_NE(m.find("upper bound"), std::string::npos);
  }
}

TEST(ExactCount, CountsOccurrences) {
  CountTable t;
  const DiscreteKey dog{{0, 1, 2}}, cat{{3, 4, 5}};
  t.add(dog);
  t.add(dog);
  t.add(dog);
  t.add(cat);
  EXPECT_EQ(exact_count(t, dog), 3.0);
  EXPECT_EQ(exact_count(t, cat), 1.0);
  EXPECT_EQ(exact_count(t, DiscreteKey{{9}}), 0.0);
  EXPECT_EQ(t.total(), 4u);
  EXPECT_EQ(t.distinct(), 2u);
}

TEST(KMeans, TwoBlobs) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<SegmentEmbedding> pts;
  for (int i = 0; i < 7; ++i) pts.push_back({g(rng), g(rng)});
  for (int i = 0; i < 3; ++i) pts.push_back({10.0 + g(rng), 10.0 + g(rng)});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_EQ(kmeans_frequency(pts, 2, SegmentEmbedding{0.05, -0.02}, seed), 7.0);
    EXPECT_EQ(kmeans_frequency(pts, 2, SegmentEmbedding{9.9, 10.1}, seed), 3.0);
  }
}

TEST(KMeans, DegenerateClusterCounts) {
  const auto pts = random_rows(25, 3, 14);
  const KMeans all(pts, pts.size(), 0);
  for (const auto &p : pts) EXPECT_EQ(all.frequency(p), 1.0);
  const KMeans one(pts, 1, 0);
  EXPECT_EQ(one.frequency(pts[3]), 25.0);
  EXPECT_THROW(KMeans(pts, 26, 0), Error);
}

TEST(KMeans, OneHotPointsConvergeToTheirCorners) {
  std::vector<SegmentEmbedding> pts;
  for (int rep = 0; rep < 4; ++rep)
    for (int c = 0; c < 5; ++c) {
      SegmentEmbedding v(5, 0.0);
      v[c] = 1.0;
      pts.push_back(v);
    }
  const KMeans km(pts, 5, 3);
  for (auto s : km.cluster_sizes()) EXPECT_EQ(s, 4u);
}

TEST(EstimateFrequency, OneHotCodesReproduceExactCounts) {
  // each discrete key becomes its own one-hot vector; with a sharp kernel the soft count
  // of a key is its number of occurrences (all counts stay below k)
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<std::uint32_t> sym(0, 3);
  std::vector<std::vector<std::uint32_t>> utts(40);
  for (auto &u : utts) {
    u.resize(6);
    for (auto &s : u) s = sym(rng);
  }
  std::vector<DiscreteKey> keys;
  std::vector<Segment> prov;
  CountTable table;
  for (std::uint32_t u = 0; u < utts.size(); ++u)
    for (std::uint32_t s = 0; s + 2 <= 6; s += 2) {
      keys.push_back(embed_discrete(utts[u], {u, s, s + 2}));
      prov.push_back({u, s, s + 2});
      table.add(DiscreteKey(keys.back()));
    }
  std::map<std::vector<std::uint32_t>, std::size_t> code;
  for (const auto &k : keys) code.emplace(k.symbols, code.size());
  auto one_hot = [&](const DiscreteKey &k) {
    SegmentEmbedding v(code.size(), 0.0);
    v[code.at(k.symbols)] = 1.0;
    return v;
  };
  std::vector<SegmentEmbedding> emb;
  for (const auto &k : keys) emb.push_back(one_hot(k));
  const auto idx = build_index(emb, prov);
  for (const auto &k : keys) {
    const double f = estimate_frequency(idx, one_hot(k), {9999, 0, 1}, {100, 50.0, 1e-3});
    EXPECT_NEAR(f, exact_count(table, k), 1e-9);
  }
}
