#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "tsfactor/instant_pca.hpp"
#include "tsfactor/simulate.hpp"
#include "tsfactor/spectral.hpp"

using namespace tsfactor;
using oracle::rel_diff;

TEST(Dft, MatchesDefinitionOnRandomShapes) {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.uniform(1, 4), T = gen.uniform(2, 67);
    const Eigen::MatrixXd x = gen.gaussian(n, T);
    EXPECT_LT(rel_diff(dft_epoch(x).values, oracle::naive_dft(x)), 1e-12) << "n=" << n << " T=" << T;
  }
}

TEST(Dft, RoundTripIsIdentity) {
  oracle::Gen gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.uniform(1, 5), T = gen.uniform(2, 300);
    const Eigen::MatrixXd x = gen.gaussian(n, T);
    const Eigen::MatrixXcd back = idft(dft_epoch(x).values);
    EXPECT_LT(rel_diff(back, x.cast<Complex>()), 1e-10);
    EXPECT_LT((idft_real(dft_epoch(x).values) - x).norm() / x.norm(), 1e-10);
  }
}

TEST(Dft, InverseMatchesDefinition) {
  oracle::Gen gen(13);
  Eigen::MatrixXcd X(2, 9);
  X.real() = gen.gaussian(2, 9);
  X.imag() = gen.gaussian(2, 9);
  EXPECT_LT(rel_diff(idft(X), oracle::naive_idft(X)), 1e-12);
}

TEST(Dft, ConjugateSymmetricForRealInput) {
  oracle::Gen gen(14);
  const Eigen::MatrixXd x = gen.gaussian(3, 41);
  const Eigen::MatrixXcd X = dft_epoch(x).values;
  for (Index k = 1; k < 41; ++k) EXPECT_LT(std::abs(X(1, k) - std::conj(X(1, 41 - k))), 1e-10 * X.norm());
}

TEST(Dft, RejectsDegenerateInput) {
  EXPECT_THROW(dft_epoch(Eigen::MatrixXd::Ones(2, 1)), ShapeError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 4);
  bad(1, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(dft_epoch(bad), ValidationError);
}

TEST(Dft, IdftRealRejectsComplexSeries) {
  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(1, 8);
  X(0, 1) = Complex(1.0, 0.0);  // no matching conjugate at bin 7
  EXPECT_THROW(idft_real(X), NumericError);
  EXPECT_GT(imaginary_residue(idft(X)), 0.1);
}

TEST(Dft, ImaginaryResidueOfZeroIsZero) { EXPECT_EQ(imaginary_residue(Eigen::MatrixXcd::Zero(2, 3)), 0.0); }

TEST(Bandwidth, FloorSquareRoot) {
  EXPECT_EQ(default_bandwidth(1000), 31);
  EXPECT_EQ(default_bandwidth(2), 1);
  EXPECT_EQ(default_bandwidth(3), 1);
  EXPECT_EQ(default_bandwidth(4), 2);
  EXPECT_EQ(default_bandwidth(15), 3);
  EXPECT_EQ(default_bandwidth(16), 4);
  EXPECT_EQ(default_bandwidth(17), 4);
  for (Index r = 1; r < 3000; r += 37) {
    EXPECT_EQ(default_bandwidth(r * r), r);
    EXPECT_EQ(default_bandwidth(r * r - 1), r - 1);
  }
}

TEST(Bandwidth, DefaultSmoothingFitsTheWindow) {
  EXPECT_EQ(default_smoothing(2), 0);
  EXPECT_EQ(default_smoothing(3), 1);
  EXPECT_EQ(default_smoothing(4), 1);
  EXPECT_EQ(default_smoothing(5), 2);
  EXPECT_EQ(default_smoothing(1000), 31);
  for (Index T = 2; T < 400; ++T) EXPECT_LE(2 * default_smoothing(T) + 1, T);
}

TEST(CrossPowerSpectrum, MatchesLiteralSmoothing) {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = gen.uniform(1, 4), T = gen.uniform(2, 40), E = gen.uniform(1, 3);
    const Index m = gen.uniform(0, (T - 1) / 2);
    const EpochSet es = gen.epochs(n, T, E);
    const SpectralMatrix s = cross_power_spectrum(es, m);
    const auto expected = oracle::smoothed_spectrum(es, m);
    for (Index k = 0; k < T; ++k)
      ASSERT_LT(rel_diff(s.at(k), expected[static_cast<std::size_t>(k)]), 1e-10)
          << "n=" << n << " T=" << T << " E=" << E << " m=" << m << " k=" << k;
  }
}

TEST(CrossPowerSpectrum, BatchesManyEpochsLikeOne) {
  oracle::Gen gen(22);
  const EpochSet es = gen.epochs(2, 12, 70);
  const SpectralMatrix s = cross_power_spectrum(es, 2);
  const auto expected = oracle::smoothed_spectrum(es, 2);
  for (Index k = 0; k < 12; ++k) EXPECT_LT(rel_diff(s.at(k), expected[static_cast<std::size_t>(k)]), 1e-10);
}

TEST(CrossPowerSpectrum, ZeroBandwidthIsRawPeriodogram) {
  oracle::Gen gen(23);
  const EpochSet es = gen.epochs(3, 16, 1);
  const SpectralMatrix s = cross_power_spectrum(es, 0);
  const auto I = oracle::periodogram(es.epoch(0));
  for (Index k = 0; k < 16; ++k) EXPECT_LT(rel_diff(s.at(k), I[static_cast<std::size_t>(k)]), 1e-12);
}

TEST(CrossPowerSpectrum, HermitianAndConjugateSymmetric) {
  oracle::Gen gen(24);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = gen.uniform(1, 6), T = gen.uniform(3, 120), E = gen.uniform(1, 4);
    const SpectralMatrix s = cross_power_spectrum(gen.epochs(n, T, E));
    for (Index k = 0; k < T; ++k) {
      const Eigen::MatrixXcd S = s.at(k);
      ASSERT_LT(rel_diff(S, S.adjoint()), 1e-10);
      ASSERT_LT(rel_diff(s.at((T - k) % T), S.conjugate()), 1e-10);
    }
  }
}

TEST(CrossPowerSpectrum, EdgeBinsAreReal) {
  oracle::Gen gen(25);
  for (Index T : {16, 17}) {
    const SpectralMatrix s = cross_power_spectrum(gen.epochs(3, T, 2), 3);
    EXPECT_EQ(s.at(0).imag().cwiseAbs().maxCoeff(), 0.0);
    if (T % 2 == 0) {
      EXPECT_EQ(s.at(T / 2).imag().cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(CrossPowerSpectrum, PositiveSemidefiniteWhenWindowExceedsChannels) {
  oracle::Gen gen(26);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = gen.uniform(2, 8), T = gen.uniform(4 * n, 200);
    const Index m = gen.uniform(n / 2, (T - 1) / 2);  // 2m+1 > n
    const SpectralMatrix s = cross_power_spectrum(gen.coloured(n, T, gen.uniform(1, 3), 2), m);
    for (Index k = 0; k <= T / 2; ++k) {
      const Eigen::MatrixXcd S = s.half_bin(k);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
      ASSERT_GE(es.eigenvalues().minCoeff(), -1e-8 * S.trace().real()) << "k=" << k;
    }
  }
}

TEST(CrossPowerSpectrum, ParsevalAcrossAllBins) {
  oracle::Gen gen(27);
  for (int trial = 0; trial < 15; ++trial) {
    const Index n = gen.uniform(1, 5), T = gen.uniform(2, 150), E = gen.uniform(1, 4);
    const Index m = gen.uniform(0, (T - 1) / 2);
    const EpochSet es = gen.epochs(n, T, E);
    const SpectralMatrix s = cross_power_spectrum(es, m);
    double spectral = 0.0;
    for (Index k = 0; k < T; ++k) spectral += s.at(k).trace().real();
    const double temporal = static_cast<double>(T) * zero_lag_covariance(es).trace();
    EXPECT_NEAR(spectral / temporal, 1.0, 1e-9) << "T=" << T << " m=" << m;
  }
}

TEST(CrossPowerSpectrum, AveragesEpochEstimates) {
  oracle::Gen gen(28);
  const EpochSet es = gen.epochs(2, 30, 3);
  const SpectralMatrix all = cross_power_spectrum(es, 4);
  for (Index k = 0; k < 30; ++k) {
    Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(2, 2);
    for (std::size_t e = 0; e < 3; ++e) mean += cross_power_spectrum(EpochSet({es.epoch(e)}, 1.0, {}), 4).at(k);
    EXPECT_LT(rel_diff(all.at(k), mean / 3.0), 1e-12);
  }
}

TEST(CrossPowerSpectrum, RecoversAr1Spectrum) {
  const double phi = 0.5;
  const Index T = 2048;
  std::vector<Eigen::MatrixXd> eps;
  for (std::size_t e = 0; e < 40; ++e) {
    auto rng = detail::substream(5, 0, e);
    eps.push_back(detail::ar1(rng, phi, T).transpose());
  }
  const SpectralMatrix s = cross_power_spectrum(EpochSet(std::move(eps), 1.0, {}));
  double worst = 0.0;
  for (Index k = 0; k <= T / 2; ++k) {
    const double expected = oracle::ar1_spectrum(phi, 2.0 * std::numbers::pi * static_cast<double>(k) / T);
    worst = std::max(worst, std::abs(s.half_bin(k)(0, 0).real() / expected - 1.0));
  }
  EXPECT_LT(worst, 0.1);
}

TEST(CrossPowerSpectrum, WarnsWhenRankDeficient) {
  oracle::Gen gen(29);
  EXPECT_TRUE(cross_power_spectrum(gen.epochs(3, 20, 1), 1).warnings().empty());
  EXPECT_FALSE(cross_power_spectrum(gen.epochs(4, 20, 1), 1).warnings().empty());
  EXPECT_TRUE(cross_power_spectrum(gen.epochs(3, 20, 2), 1).warnings().empty());
}

TEST(CrossPowerSpectrum, RejectsBadBandwidth) {
  oracle::Gen gen(30);
  const EpochSet es = gen.epochs(2, 10, 1);
  EXPECT_THROW(cross_power_spectrum(es, -1), ArgumentError);
  EXPECT_THROW(cross_power_spectrum(es, 5), ArgumentError);
  EXPECT_NO_THROW(cross_power_spectrum(es, 4));
}

TEST(CrossPowerSpectrum, ReportsMetadata) {
  oracle::Gen gen(31);
  const SpectralMatrix s = cross_power_spectrum(gen.epochs(3, 100, 2));
  EXPECT_EQ(s.bandwidth(), 10);
  EXPECT_EQ(s.length(), 100);
  EXPECT_EQ(s.channels(), 3);
  EXPECT_EQ(s.epochs(), 2u);
  EXPECT_THROW(s.at(100), ArgumentError);
  EXPECT_THROW(s.at(-1), ArgumentError);
}

TEST(CrossPowerSpectrum, CsvDumpHasOneLinePerEntry) {
  oracle::Gen gen(32);
  std::ostringstream os;
  write_spectral_csv(cross_power_spectrum(gen.epochs(2, 6, 1), 1), os);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("bin,row,col,re,im\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 6 * 4);
}
