#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"

using namespace stfcn;
using namespace stfcn::testing;

namespace {

GridSpec unit_grid(Index rows = 4, Index cols = 4, Index intervals = 10) {
  GridSpec g;
  g.lon_min = 0.0;
  g.lon_max = 4.0;
  g.lat_min = 0.0;
  g.lat_max = 4.0;
  g.rows = rows;
  g.cols = cols;
  g.t0 = 1000;
  g.dt = 600;
  g.intervals = intervals;
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest

TEST(Ingest, SingleRecordAtCentre) {
  const GridSpec g = unit_grid();
  const std::vector<TripRecord> r{{1000, 1.5, 2.5}};
  const IngestResult res = ingest(r, g);
  EXPECT_EQ(res.accepted, 1u);
  EXPECT_EQ(sum(res.cube.counts), 1.0);
  EXPECT_EQ(res.cube.counts(2, 1, 0), 1.0);
}

TEST(Ingest, BoundaryGoesToHigherCell) {
  const GridSpec g = unit_grid();
  const std::vector<TripRecord> r{{1000 + 600, 2.0, 1.0}};
  const IngestResult res = ingest(r, g);
  EXPECT_EQ(res.cube.counts(1, 2, 1), 1.0);
}

TEST(Ingest, OutOfRangeIsCountedNotStored) {
  const GridSpec g = unit_grid();
  const std::vector<TripRecord> r{{1000, 4.0, 1.0}, {1000, 1.0, -0.1}, {999, 1.0, 1.0}, {1000 + 6000, 1.0, 1.0}};
  const IngestResult res = ingest(r, g);
  EXPECT_EQ(res.out_of_range, 4u);
  EXPECT_EQ(sum(res.cube.counts), 0.0);
}

TEST(Ingest, ConservationOnScatteredRecords) {
  Rng rng(1);
  const GridSpec g = unit_grid(5, 7, 20);
  std::vector<TripRecord> r;
  for (int k = 0; k < 1000; ++k)
    r.push_back({900 + static_cast<std::int64_t>(rng.below(12400)), rng.uniform(-0.5, 4.5), rng.uniform(-0.5, 4.5)});
  const IngestResult res = ingest(r, g);
  EXPECT_EQ(res.accepted + res.out_of_range, 1000u);
  EXPECT_GT(res.out_of_range, 0u);
  EXPECT_EQ(sum(res.cube.counts), 1000.0 - static_cast<double>(res.out_of_range));
}

TEST(Ingest, TextWithHeaderAndBadLines) {
  std::istringstream in(
      "timestamp,longitude,latitude\n"
      "1000,0.5,0.5\n"
      "garbage\n"
      "1600,3.5,0.5\n"
      "1700,abc,1.0\n");
  const IngestResult res = ingest(in, unit_grid());
  EXPECT_EQ(res.accepted, 2u);
  ASSERT_EQ(res.rejected.size(), 2u);
  EXPECT_EQ(res.rejected[0].line, 3u);
  EXPECT_EQ(res.rejected[1].line, 5u);
  EXPECT_EQ(res.cube.counts(0, 0, 0), 1.0);
  EXPECT_EQ(res.cube.counts(0, 3, 1), 1.0);
}

TEST(Ingest, IsoTimestamps) {
  GridSpec g = unit_grid();
  g.t0 = 1477958400;  // 2016-11-01T00:00:00Z
  std::istringstream in(
      "2016-11-01T00:05:00Z,0.5,0.5\n"
      "2016-11-01 00:10:00,0.5,0.5\n"
      "2016-11-01T08:20:00+08:00,0.5,0.5\n");
  const IngestResult res = ingest(in, g);
  EXPECT_EQ(res.accepted, 3u);
  EXPECT_EQ(res.cube.counts(0, 0, 0), 1.0);
  EXPECT_EQ(res.cube.counts(0, 0, 1), 1.0);
  EXPECT_EQ(res.cube.counts(0, 0, 2), 1.0);
  EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_iso8601("2000-02-29T12:00:00.5Z"), 951825600);
  EXPECT_FALSE(parse_iso8601("2016-13-01T00:00:00"));
}

TEST(Ingest, MalformedHeaderIsFormatError) {
  std::istringstream in("time;lon\n1000,0.5,0.5\n");
  EXPECT_THROW(ingest(in, unit_grid()), FormatError);
}

TEST(Ingest, InvalidGridIsConfigError) {
  GridSpec g = unit_grid();
  g.lon_max = g.lon_min;
  EXPECT_THROW(ingest(std::vector<TripRecord>{}, g), ConfigError);
}

// ---------------------------------------------------------------------------
// cube files

TEST(CubeFile, RoundTrip) {
  SynthConfig sc;
  sc.rows = 3;
  sc.cols = 4;
  sc.days = 1;
  sc.dt = 3600;
  sc.period = 24;
  const DemandCube cube = synthesize(sc);
  std::stringstream ss;
  write_cube(ss, cube);
  const DemandCube back = read_cube(ss);
  EXPECT_EQ(back.counts, cube.counts);
  EXPECT_EQ(back.grid.t0, cube.grid.t0);
  EXPECT_EQ(back.grid.dt, 3600);
  EXPECT_DOUBLE_EQ(back.grid.lat_max, cube.grid.lat_max);
}

TEST(CubeFile, LayoutIsRowMajorPerInterval) {
  DemandCube cube(unit_grid(2, 3, 2));
  cube.counts(1, 2, 0) = 7;
  cube.counts(0, 0, 1) = 5;
  std::stringstream ss;
  write_cube(ss, cube);
  std::string header, l0, l1, l2, l3;
  std::getline(ss, header);
  std::getline(ss, l0);
  std::getline(ss, l1);
  std::getline(ss, l2);
  EXPECT_EQ(header.substr(0, 6), "2 3 2 ");
  EXPECT_EQ(l0, "0 0 0");
  EXPECT_EQ(l1, "0 0 7");
  EXPECT_EQ(l2, "5 0 0");
}

TEST(CubeFile, CorruptionIsFormatError) {
  std::istringstream short_header("2 3 2 0 600 0 1 0\n");
  EXPECT_THROW(read_cube(short_header), FormatError);
  std::istringstream truncated("1 2 2 0 600 0 1 0 1\n1 2\n");
  EXPECT_THROW(read_cube(truncated), FormatError);
  std::istringstream ragged("1 2 1 0 600 0 1 0 1\n1 2 3\n");
  EXPECT_THROW(read_cube(ragged), FormatError);
  EXPECT_THROW(read_cube_file("/nonexistent/cube.txt"), DataError);
}

// ---------------------------------------------------------------------------
// decomposition

namespace {

double variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size());
}

double max_reconstruction_error(const std::vector<double>& s, const Decomposition& d) {
  double worst = 0.0;
  for (Index t = d.begin; t < d.end; ++t) {
    const std::size_t k = static_cast<std::size_t>(t - d.begin);
    worst = std::max(worst, std::abs(d.trend[k] + d.periodic_at(t) + d.residual[k] - s[static_cast<std::size_t>(t)]));
  }
  return worst;
}

}  // namespace

TEST(Decompose, PureSinusoidHasNoResidual) {
  for (Index L : {12, 13, 144}) {
    std::vector<double> s(static_cast<std::size_t>(5 * L));
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = 7.0 + 3.0 * std::sin(2 * std::numbers::pi * double(t) / double(L));
    const Decomposition d = decompose(s, L);
    EXPECT_LE(d.residual_variance, 1e-10 * variance(s)) << L;
    EXPECT_LE(max_reconstruction_error(s, d), 1e-9);
  }
}

TEST(Decompose, RampHasNoPeriodicComponent) {
  for (Index L : {6, 7}) {
    std::vector<double> s(60);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = 2.0 + 0.5 * double(t);
    const Decomposition d = decompose(s, L);
    for (double p : d.periodic) EXPECT_NEAR(p, 0.0, 1e-9);
    for (Index t = d.begin; t < d.end; ++t) EXPECT_NEAR(d.trend[static_cast<std::size_t>(t - d.begin)], s[t], 1e-9);
  }
}

TEST(Decompose, FittedRangeExcludesEdges) {
  const std::vector<double> s(40, 1.0);
  const Decomposition odd = decompose(s, 7);
  EXPECT_EQ(odd.begin, 3);
  EXPECT_EQ(odd.end, 37);
  const Decomposition even = decompose(s, 8);
  EXPECT_EQ(even.begin, 4);
  EXPECT_EQ(even.end, 36);
}

TEST(Decompose, PeriodicComponentIsCentred) {
  Rng rng(2);
  std::vector<double> s(200);
  for (double& v : s) v = rng.uniform(0, 10);
  const Decomposition d = decompose(s, 24);
  double m = 0.0;
  for (double p : d.periodic) m += p;
  EXPECT_NEAR(m, 0.0, 1e-10);
  EXPECT_LE(max_reconstruction_error(s, d), 1e-9);
}

TEST(Decompose, Errors) {
  const std::vector<double> s(20, 1.0);
  EXPECT_THROW(decompose(s, 11), RangeError);
  EXPECT_THROW(decompose(s, 1), ConfigError);
}

TEST(SelectPeriod, NoisyRampPlusDailyPicksDaily) {
  // 144 and 288 both fit a daily cycle; the tie band absorbs the sampling
  // noise between them and the smaller period wins.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    std::vector<double> s(144 * 14);
    for (std::size_t t = 0; t < s.size(); ++t)
      s[t] = 100.0 + 0.01 * double(t) + 30.0 * std::sin(2 * std::numbers::pi * double(t % 144) / 144.0) + rng.normal();
    const std::vector<Index> cands{72, 144, 288};
    std::vector<PeriodScore> scores;
    EXPECT_EQ(select_period(s, cands, 0.05, &scores), 144) << seed;
    ASSERT_EQ(scores.size(), 3u);
    EXPECT_LT(scores[1].residual_variance, scores[0].residual_variance);
  }
}

TEST(SelectPeriod, WeeklySyntheticPicksWeek) {
  SynthConfig sc;
  sc.days = 28;
  sc.weekly_amplitude = 0.5;
  sc.noise_fraction = 0.2;
  sc.seed = 4;
  const DemandCube cube = synthesize(sc);
  const std::vector<double> total = cube.total_series();
  const std::vector<Index> cands{144, 1008};
  EXPECT_EQ(select_period(total, cands), 1008);
}

TEST(SelectPeriod, SingleCandidateAndTies) {
  std::vector<double> s(100);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = double(t % 5);
  const std::vector<Index> one{7};
  EXPECT_EQ(select_period(s, one), 7);
  // Both 5 and 10 explain the series exactly.
  const std::vector<Index> tied{10, 5};
  EXPECT_EQ(select_period(s, tied), 5);
  EXPECT_THROW(select_period(s, std::vector<Index>{}), ConfigError);
}

// ---------------------------------------------------------------------------
// samples

TEST(Samples, SliceOrder) {
  // counts(0, 0, t) = t makes every slice self-describing.
  const Index T = 1100;
  Tensord counts({1, 1, T});
  for (Index t = 0; t < T; ++t) counts(0, 0, t) = double(t);
  const SampleWindow w{10, 10, 1008};
  const VolumeSample s = make_sample(counts, w, 1020);
  for (Index k = 0; k < 10; ++k) {
    EXPECT_EQ(s.input(0, 0, k), double(1019 - k));
    EXPECT_EQ(s.input(0, 0, 10 + k), double(11 - k));
  }
  EXPECT_EQ(s.target(0, 0), 1020.0);
}

TEST(Samples, EarliestValidTarget) {
  Tensord counts({2, 2, 40});
  const SampleWindow w{3, 4, 20};
  EXPECT_EQ(w.first_target(), 24);
  EXPECT_NO_THROW(make_sample(counts, w, 24));
  EXPECT_THROW(make_sample(counts, w, 23), RangeError);
  const SampleSet set = make_samples(counts, w, 0, 40);
  EXPECT_EQ(set.samples.front().t, 24);
  EXPECT_EQ(set.skipped, 24);
}

TEST(Samples, ConfigErrors) {
  Tensord counts({1, 1, 50});
  EXPECT_THROW(make_samples(counts, SampleWindow{0, 2, 5}, 0, 50), ConfigError);
  EXPECT_THROW(make_samples(counts, SampleWindow{2, 0, 5}, 0, 50), ConfigError);
}

TEST(SamplesProperty, CountAndBoundsOnRandomWindows) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index T = 5 + static_cast<Index>(rng.below(80));
    const SampleWindow w{1 + static_cast<Index>(rng.below(6)), 1 + static_cast<Index>(rng.below(6)),
                         static_cast<Index>(rng.below(30))};
    const Index lo = static_cast<Index>(rng.below(static_cast<std::uint64_t>(T)));
    const Index hi = lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(T - lo + 1)));
    Tensord counts({1, 2, T});
    for (Index t = 0; t < T; ++t) {
      counts(0, 0, t) = double(t);
      counts(0, 1, t) = 1.0;
    }
    const SampleSet set = make_samples(counts, w, lo, hi);
    const Index first = std::max(w.period_length + w.period_window, w.recent);
    EXPECT_EQ(static_cast<Index>(set.samples.size()), std::max<Index>(0, hi - std::max(lo, first)));
    for (const VolumeSample& s : set.samples) {
      EXPECT_EQ(s.input.shape(), (Shape{1, 2, w.depth()}));
      for (Index k = 0; k < w.depth(); ++k) {
        const double idx = s.input(0, 0, k);
        EXPECT_GE(idx, 0.0);
        EXPECT_LT(idx, double(T));
        EXPECT_EQ(s.input(0, 1, k), 1.0);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// differencing

TEST(Difference, PeriodicAndRampGiveZeros) {
  const Index L = 6, T = 40;
  Tensord periodic({1, 2, T});
  for (Index t = 0; t < T; ++t) {
    periodic(0, 0, t) = double((t * 7) % L);
    periodic(0, 1, t) = 3.0 + 2.0 * double(t);
  }
  const DifferenceTransform d(periodic, L);
  EXPECT_EQ(sumsq(d.diff()), 0.0);
}

TEST(Difference, ManualValue) {
  Tensord x({1, 1, 5}, {1, 4, 2, 8, 3});
  const DifferenceTransform d(x, 2);
  // t = 3: (8 - 4) - (2 - 1) = 3; t = 4: (3 - 2) - (8 - 4) = -3.
  EXPECT_EQ(d.diff()(0, 0, 3), 3.0);
  EXPECT_EQ(d.diff()(0, 0, 4), -3.0);
  EXPECT_EQ(d.diff()(0, 0, 2), 0.0);
}

TEST(Difference, RoundTripIsExact) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Index L = 1 + static_cast<Index>(rng.below(10)), T = L + 2 + static_cast<Index>(rng.below(60));
    const Tensord x = random_tensor({2, 3, T}, rng, 0.0, 50.0);
    const DifferenceTransform d(x, L);
    for (Index t = d.valid_from(); t < T; ++t)
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 3; ++j) EXPECT_NEAR(d.invert(i, j, t, d.diff()(i, j, t)), x(i, j, t), 1e-12);
    const Tensord back = d.integrate(d.diff());
    EXPECT_LE((back.data() - x.data()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Difference, InsufficientHistory) {
  EXPECT_THROW(DifferenceTransform(Tensord({1, 1, 5}), 4), RangeError);
  const DifferenceTransform d(Tensord({1, 1, 10}), 3);
  EXPECT_THROW(d.invert(0, 0, 3, 0.0), RangeError);
}

// ---------------------------------------------------------------------------
// split and synthesis

TEST(Split, ThirtyDays) {
  GridSpec g = unit_grid(2, 2, 30 * 144);
  const SplitRanges r = split(g, 21, 9);
  EXPECT_EQ(r.train_begin, 0);
  EXPECT_EQ(r.train_end, 3024);
  EXPECT_EQ(r.test_begin, 3024);
  EXPECT_EQ(r.test_end, 4320);
}

TEST(Split, Errors) {
  GridSpec g = unit_grid(2, 2, 10 * 144);
  EXPECT_THROW(split(g, 0, 2), ConfigError);
  EXPECT_THROW(split(g, 8, 3), ConfigError);
  const SplitRanges r = split(g, 7, 3);
  EXPECT_LE(r.train_end, r.test_begin);
}

TEST(Synth, DeterministicAndNonNegative) {
  SynthConfig sc;
  sc.days = 2;
  const DemandCube a = synthesize(sc);
  const DemandCube b = synthesize(sc);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_GE(a.counts.data().minCoeff(), 0.0);
  EXPECT_EQ(a.intervals(), 288);
  sc.seed += 1;
  EXPECT_FALSE(synthesize(sc).counts == a.counts);
}

TEST(Synth, DemandIsSpatiallyUnequal) {
  SynthConfig sc;
  sc.days = 3;
  const DemandCube cube = synthesize(sc);
  EXPECT_GT(gini(cube.region_totals(0, cube.intervals())), 0.3);
}

TEST(Decompose, SingleCycleHasNoResidualDegreesOfFreedom) {
  Rng rng(7);
  std::vector<double> s(48);
  for (double& v : s) v = rng.uniform(0, 5);
  EXPECT_TRUE(std::isinf(decompose(s, 24).residual_variance));
  const std::vector<Index> c{12, 24};
  EXPECT_EQ(select_period(s, c), 12);
  const std::vector<Index> only{24};
  EXPECT_THROW(select_period(s, only), RangeError);
}
