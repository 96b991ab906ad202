#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "tsfactor/evaluation.hpp"
#include "tsfactor/exploratory.hpp"
#include "tsfactor/simulate.hpp"

using namespace tsfactor;

namespace {

bool bitwise_equal(const EpochSet& a, const EpochSet& b) {
  for (std::size_t e = 0; e < a.num_epochs(); ++e)
    if (std::memcmp(a.epoch(e).data(), b.epoch(e).data(), sizeof(double) * a.epoch(e).size()) != 0) return false;
  return a.num_epochs() == b.num_epochs();
}

SimSpec small(SimKind kind, std::uint64_t seed) {
  SimSpec s;
  s.kind = kind;
  s.channels = 6;
  s.length = 128;
  s.seed = seed;
  if (kind == SimKind::kShiftedClusters) s.shifts = {{0, 2, 10}};
  return s;
}

const SimKind kKinds[] = {SimKind::kIidGaussian, SimKind::kLowRankWhite, SimKind::kArLatent,
                          SimKind::kShiftedClusters, SimKind::kCoupledRegions};

}  // namespace

// --- simulation -----------------------------------------------------------------

TEST(Simulate, SeededDeterminismIsBitwise) {
  for (SimKind kind : kKinds)
    for (std::uint64_t seed : {0ull, 1ull, 123456789ull}) {
      const SimSpec s = small(kind, seed);
      EXPECT_TRUE(bitwise_equal(generate(s, 3, 2), generate(s, 3, 2))) << to_string(kind);
    }
}

TEST(Simulate, EpochsIndependentOfCount) {
  const SimSpec s = small(SimKind::kArLatent, 4);
  const EpochSet two = generate(s, 2), five = generate(s, 5);
  EXPECT_EQ(two.epoch(1), five.epoch(1));
}

TEST(Simulate, StreamsAndSeedsDiffer) {
  const SimSpec s = small(SimKind::kIidGaussian, 4);
  EXPECT_NE(generate(s, 1, 0).epoch(0), generate(s, 1, 1).epoch(0));
  EXPECT_NE(generate(s, 1, 0).epoch(0), generate(small(SimKind::kIidGaussian, 5), 1, 0).epoch(0));
}

TEST(Simulate, ShapesAndMetadata) {
  for (SimKind kind : kKinds) {
    SimSpec s = small(kind, 1);
    s.sampling_rate = 250.0;
    const EpochSet es = generate(s, 2);
    EXPECT_EQ(es.num_epochs(), 2u);
    EXPECT_EQ(es.channels(), 6);
    EXPECT_EQ(es.samples(), 128);
    EXPECT_EQ(es.sampling_rate(), 250.0);
    EXPECT_EQ(es.channel_labels().front(), "ch1");
  }
}

TEST(Simulate, LowRankHasExactRank) {
  for (Index rank : {1, 2, 4}) {
    SimSpec s = small(SimKind::kLowRankWhite, 3);
    s.rank = rank;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(generate(s, 1).epoch(0));
    const auto sv = svd.singularValues();
    EXPECT_GT(sv(rank - 1), 1e-6 * sv(0));
    if (rank < 6) {
      EXPECT_LT(sv(rank), 1e-10 * sv(0));
    }
  }
}

TEST(Simulate, CircularShiftPreservesChannelEnergy) {
  SimSpec plain = small(SimKind::kArLatent, 6), shifted = plain;
  shifted.kind = SimKind::kShiftedClusters;
  shifted.shifts = {{0, 2, 17}, {3, 4, -5}};
  const Eigen::MatrixXd a = generate(plain, 1).epoch(0), b = generate(shifted, 1).epoch(0);
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(a.row(i).squaredNorm(), b.row(i).squaredNorm(), 1e-9 * a.row(i).squaredNorm());
  EXPECT_EQ(b(0, 0), a(0, 17));
  EXPECT_EQ(b(3, 5), a(3, 0));
  EXPECT_EQ(b.row(5), a.row(5));
}

TEST(Simulate, Shift2PeakAtShift) {
  const SimSpec s = preset("shift2", 2);
  const EpochSet es = generate(s, 1);
  const auto ccf = cross_correlation_series(es.epoch(0).row(0), es.epoch(0).row(10), 60);
  const auto peak = std::max_element(ccf.begin(), ccf.end()) - ccf.begin() - 60;
  // ch1(t) = f(t + 40), ch11(t) = f(t): ch1 leads by 40
  EXPECT_LE(std::abs(std::abs(peak) - 40), 2);
}

TEST(Simulate, CoupledRegionsLayout) {
  const SimSpec s = preset("coupled", 3);
  const RegionMap rm = generated_regions(s);
  ASSERT_EQ(rm.regions().size(), 2u);
  EXPECT_EQ(rm.at("A").channels.size(), 16u);
  EXPECT_EQ(rm.at("B").channels.front(), 16);
  EXPECT_EQ(generated_regions(preset("iid")).at("all").channels.size(), 20u);
}

TEST(Simulate, RejectsBadSpecs) {
  SimSpec s;
  s.channels = 0;
  EXPECT_THROW(generate(s, 1), ArgumentError);
  s = SimSpec{};
  s.kind = SimKind::kLowRankWhite;
  s.rank = 21;
  EXPECT_THROW(generate(s, 1), ArgumentError);
  s = SimSpec{};
  s.kind = SimKind::kArLatent;
  s.phi = 1.0;
  EXPECT_THROW(generate(s, 1), ArgumentError);
  s = SimSpec{};
  s.shifts = {{0, 20, 1}};
  EXPECT_THROW(generate(s, 1), ArgumentError);
  EXPECT_THROW(generate(SimSpec{}, 0), ArgumentError);
  EXPECT_THROW(preset("nope"), ArgumentError);
  EXPECT_THROW(parse_sim_kind("nope"), ArgumentError);
}

// --- evaluation -----------------------------------------------------------------

TEST(NormalizedError, Examples) {
  oracle::Gen gen(61);
  const EpochSet z = gen.epochs(3, 20, 2);
  EXPECT_EQ(normalized_error(z, z), 0.0);
  std::vector<Eigen::MatrixXd> zero, twice;
  for (const auto& ep : z.epochs()) {
    zero.push_back(Eigen::MatrixXd::Zero(3, 20));
    twice.push_back(2.0 * ep);
  }
  EXPECT_DOUBLE_EQ(normalized_error(z, z.with_data(zero)), 1.0);
  EXPECT_DOUBLE_EQ(normalized_error(z, z.with_data(twice)), 1.0);
  EXPECT_THROW(normalized_error(z.with_data(zero), z), ArgumentError);
  EXPECT_THROW(normalized_error(z, gen.epochs(3, 21, 2)), ShapeError);
}

TEST(NormalizedError, PoolsOverEpochs) {
  oracle::Gen gen(62);
  const EpochSet z = gen.epochs(2, 10, 3), h = gen.epochs(2, 10, 3);
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < 3; ++e) {
    num += oracle::residual_energy(z.epoch(e), h.epoch(e));
    den += z.epoch(e).squaredNorm();
  }
  EXPECT_NEAR(normalized_error(z, h), num / den, 1e-12);
}

TEST(Benchmark, SmallRunShapesAndStatistics) {
  SimSpec s = small(SimKind::kLowRankWhite, 8);
  const std::vector<Index> sweep{1, 2, 3};
  const std::vector<Method> methods{Method::kInstant, Method::kDynamic};
  const EvalReport r = run_benchmark(s, sweep, 4, methods);
  EXPECT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(r.test_sets, 4);
  for (Method m : methods) {
    EXPECT_LT(r.cell(m, 2).test_mean, 1e-10);
    EXPECT_GT(r.cell(m, 1).test_mean, 0.1);
    EXPECT_GE(r.cell(m, 1).test_std, 0.0);
  }
  EXPECT_LT(r.cell(Method::kInstant, 2).train_error, 1e-20);
  EXPECT_EQ(r.first_differences(Method::kInstant).size(), 2u);
  EXPECT_THROW((void)r.cell(Method::kInstant, 9), LookupError);
}

TEST(Benchmark, TestMeanAndSampleStdMatchManualScoring) {
  const SimSpec s = small(SimKind::kArLatent, 9);
  const std::vector<Index> sweep{1};
  const std::vector<Method> methods{Method::kInstant};
  const EvalReport r = run_benchmark(s, sweep, 3, methods);
  const FactorModel model = fit(Method::kInstant, generate(s, 1, 0), 1);
  std::vector<double> errs;
  for (std::uint64_t k = 1; k <= 3; ++k) {
    const EpochSet test = center(generate(s, 1, k));
    errs.push_back(normalized_error(test, reconstruct(model, test)));
  }
  const double mean = (errs[0] + errs[1] + errs[2]) / 3.0;
  double ss = 0.0;
  for (double e : errs) ss += (e - mean) * (e - mean);
  EXPECT_NEAR(r.cells[0].test_mean, mean, 1e-12);
  EXPECT_NEAR(r.cells[0].test_std, std::sqrt(ss / 2.0), 1e-12);
}

TEST(Benchmark, RejectsBadArguments) {
  const SimSpec s = small(SimKind::kIidGaussian, 1);
  const std::vector<Method> methods{Method::kInstant};
  const std::vector<Index> bad{0}, ok{1}, none{};
  EXPECT_THROW(run_benchmark(s, bad, 2, methods), ArgumentError);
  EXPECT_THROW(run_benchmark(s, none, 2, methods), ArgumentError);
  EXPECT_THROW(run_benchmark(s, ok, 0, methods), ArgumentError);
  EXPECT_THROW(run_benchmark(s, ok, 2, std::span<const Method>{}), ArgumentError);
}

// --- variance accounted ------------------------------------------------------------

TEST(VarianceAccounted, DiagonalExample) {
  const InstantFactorModel model(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(4, 1));
  const auto va = variance_accounted(model);
  ASSERT_EQ(va.cumulative.size(), 2u);
  EXPECT_DOUBLE_EQ(va.cumulative[0], 0.8);
  EXPECT_DOUBLE_EQ(va.cumulative[1], 1.0);
}

TEST(VarianceAccounted, MonotoneEndsAtOneAndRankTwoIsComplete) {
  SimSpec s = small(SimKind::kLowRankWhite, 11);
  const EpochSet es = generate(s, 2);
  for (Method m : {Method::kInstant, Method::kDynamic}) {
    const auto va = variance_accounted(fit(m, es, 2));
    EXPECT_GE(va.cumulative[1], 1.0 - 1e-10);
    for (std::size_t j = 1; j < va.cumulative.size(); ++j) EXPECT_GE(va.cumulative[j], va.cumulative[j - 1]);
    EXPECT_EQ(va.cumulative.back(), 1.0);
  }
}

TEST(VarianceAccounted, DynamicUsesFrequencySummedEigenvalues) {
  oracle::Gen gen(63);
  const EpochSet es = gen.coloured(4, 64, 2, 2);
  const auto model = fit_dynamic(es, 1);
  const Eigen::VectorXd totals = model.eigenvalues().rowwise().sum();
  EXPECT_NEAR(variance_accounted(model).cumulative[0], totals(0) / totals.sum(), 1e-12);
}

// --- factor PSD -----------------------------------------------------------------

TEST(FactorPsd, ConstantFactorPowerAtDc) {
  const FactorSeries fs({Eigen::MatrixXd::Constant(1, 16, 3.0)});
  const FactorPsd raw = factor_psd(fs, 8.0, 0);
  EXPECT_EQ(raw.frequencies_hz.size(), 9u);
  EXPECT_DOUBLE_EQ(raw.frequencies_hz[1], 0.5);
  EXPECT_GT(raw.density[0][0][0], 0.0);
  for (std::size_t k = 1; k < 9; ++k) EXPECT_NEAR(raw.density[0][0][k], 0.0, 1e-12);

  const FactorPsd smoothed = factor_psd(fs, 8.0);
  const std::size_t m = static_cast<std::size_t>(default_smoothing(16));
  for (std::size_t k = m + 1; k < 9; ++k) EXPECT_NEAR(smoothed.density[0][0][k], 0.0, 1e-12);
}

TEST(FactorPsd, PowerSumEqualsMeanSquare) {
  oracle::Gen gen(64);
  for (int trial = 0; trial < 10; ++trial) {
    const Index T = gen.uniform(4, 80);
    const double rate = 100.0;
    const FactorSeries fs({gen.gaussian(2, T)});
    const FactorPsd psd = factor_psd(fs, rate, 0);
    for (Index j = 0; j < 2; ++j) {
      double total = 0.0;
      for (double d : psd.density[0][static_cast<std::size_t>(j)]) total += d * rate / static_cast<double>(T);
      const double ms = fs.epoch(0).row(j).squaredNorm() / static_cast<double>(T);
      EXPECT_NEAR(total, ms, 1e-9 * ms);
    }
  }
}

TEST(FactorPsd, PeakAtSinusoidFrequency) {
  const Index T = 200;
  const double rate = 100.0;
  Eigen::MatrixXd f(1, T);
  for (Index t = 0; t < T; ++t) f(0, t) = std::cos(2.0 * std::numbers::pi * 10.0 * static_cast<double>(t) / rate);
  const FactorPsd psd = factor_psd(FactorSeries({f, f}), rate, 1);
  for (const auto& epoch : psd.density) {
    const auto& d = epoch[0];
    const auto k = std::max_element(d.begin(), d.end()) - d.begin();
    EXPECT_NEAR(psd.frequencies_hz[static_cast<std::size_t>(k)], 10.0, rate / T + 1e-12);
  }
}

TEST(FactorPsd, Ar1LowToNyquistRatio) {
  // S(low)/S(Nyquist) = (1 + phi)^2 / (1 - phi)^2 = 361 for phi = 0.9
  oracle::Gen gen(69);
  const Index T = 16384;
  const Eigen::MatrixXd e = gen.gaussian(1, T + 500);
  Eigen::MatrixXd f(1, T + 500);
  f(0, 0) = e(0, 0);
  for (Index t = 1; t < T + 500; ++t) f(0, t) = 0.9 * f(0, t - 1) + e(0, t);
  const FactorPsd psd = factor_psd(FactorSeries({Eigen::MatrixXd(f.rightCols(T))}), 1.0);
  const auto& d = psd.density[0][0];
  // interior bins carry a factor 2 in the one-sided density
  const double ratio = (d[1] / 2.0) / d.back();
  EXPECT_NEAR(ratio, 361.0, 0.5 * 361.0);
}

TEST(FactorPsd, WhiteNoiseIsFlat) {
  oracle::Gen gen(70);
  const FactorPsd psd = factor_psd(FactorSeries({gen.gaussian(1, 1000)}), 1.0);
  const auto& d = psd.density[0][0];
  std::vector<double> two_sided(d.begin(), d.end());
  for (std::size_t k = 1; k + 1 < two_sided.size(); ++k) two_sided[k] /= 2.0;
  const auto [lo, hi] = std::minmax_element(two_sided.begin(), two_sided.end());
  EXPECT_LT(*hi / *lo, 5.0);
}

// --- cross-correlation --------------------------------------------------------------

TEST(CrossCorrelation, MatchesBruteForce) {
  oracle::Gen gen(65);
  for (int trial = 0; trial < 20; ++trial) {
    const Index T = gen.uniform(3, 60), L = gen.uniform(0, T - 1);
    const Eigen::MatrixXd ab = gen.gaussian(2, T);
    const auto fast = cross_correlation_series(ab.row(0), ab.row(1), L);
    const auto slow = oracle::brute_ccf(ab.row(0), ab.row(1), L);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12);
  }
}

TEST(CrossCorrelation, AutoIsOneAtZeroLag) {
  oracle::Gen gen(66);
  const Eigen::MatrixXd a = gen.gaussian(1, 100);
  const auto c = cross_correlation_series(a.row(0), a.row(0), 3);
  EXPECT_NEAR(c[3], 1.0, 1e-12);
  for (double v : c) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
}

TEST(CrossCorrelation, DelayedCopyPeaksAtPlusDelay) {
  oracle::Gen gen(67);
  const Eigen::MatrixXd w = gen.gaussian(1, 505);
  Eigen::MatrixXd a = w.rightCols(500), b = w.leftCols(500);
  // b(t) = a(t - 5)
  const FactorSeries fa({a}), fb({b});
  const auto ccf = cross_correlation(fa, 0, fb, 0, 20);
  const auto& v = ccf.values[0];
  EXPECT_EQ(ccf.lags()[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())], 5);
}

TEST(CrossCorrelation, IndependentNoiseStaysSmall) {
  oracle::Gen gen(68);
  std::vector<Eigen::MatrixXd> a, b;
  for (int e = 0; e < 100; ++e) {
    a.push_back(gen.gaussian(1, 1000));
    b.push_back(gen.gaussian(1, 1000));
  }
  const auto ccf = cross_correlation(FactorSeries(a), 0, FactorSeries(b), 0, 20);
  int small_epochs = 0;
  for (const auto& v : ccf.values) {
    double mx = 0.0;
    for (double x : v) mx = std::max(mx, std::abs(x));
    small_epochs += mx < 0.15;
  }
  EXPECT_GE(small_epochs, 95);
}

TEST(CrossCorrelation, ZeroVarianceGivesNanAndWarning) {
  const FactorSeries a({Eigen::MatrixXd::Ones(1, 10)}), b({Eigen::MatrixXd::Random(1, 10)});
  const auto ccf = cross_correlation(a, 0, b, 0, 2);
  EXPECT_TRUE(std::isnan(ccf.values[0][0]));
  ASSERT_EQ(ccf.warnings.size(), 1u);
}

TEST(CrossCorrelation, RejectsBadArguments) {
  const FactorSeries a({Eigen::MatrixXd::Random(2, 10)}), b({Eigen::MatrixXd::Random(1, 11)});
  EXPECT_THROW(cross_correlation(a, 0, b, 0, 2), ShapeError);
  EXPECT_THROW(cross_correlation(a, 2, a, 0, 2), ArgumentError);
  EXPECT_THROW(cross_correlation(a, 0, a, 0, 10), ArgumentError);
  EXPECT_THROW(cross_correlation(a, 0, a, 0, -1), ArgumentError);
}
