#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tsfactor/epoch_set.hpp"

namespace oracle {

using tsfactor::Index;
using Complex = std::complex<double>;

// O(T^2) DFT straight from the definition, X(k) = sum_t x(t) exp(-2 pi i t k / T).
inline Eigen::MatrixXcd naive_dft(const Eigen::MatrixXd& x) {
  const Index n = x.rows(), T = x.cols();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, T);
  for (Index k = 0; k < T; ++k)
    for (Index t = 0; t < T; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((t * k) % T) / static_cast<double>(T);
      out.col(k) += x.col(t).cast<Complex>() * std::polar(1.0, angle);
    }
  return out;
}

inline Eigen::MatrixXcd naive_idft(const Eigen::MatrixXcd& X) {
  const Index n = X.rows(), T = X.cols();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, T);
  for (Index t = 0; t < T; ++t)
    for (Index k = 0; k < T; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((t * k) % T) / static_cast<double>(T);
      out.col(t) += X.col(k) * std::polar(1.0, angle);
    }
  return out / static_cast<double>(T);
}

// Periodogram of one epoch at every bin, I(k) = (1/T) z(k) z(k)^H.
inline std::vector<Eigen::MatrixXcd> periodogram(const Eigen::MatrixXd& epoch) {
  const Eigen::MatrixXcd Z = naive_dft(epoch);
  const Index T = epoch.cols();
  std::vector<Eigen::MatrixXcd> out;
  for (Index k = 0; k < T; ++k) out.push_back(Z.col(k) * Z.col(k).adjoint() / static_cast<double>(T));
  return out;
}

// Smoothing written out literally: extend I to -m..T-1+m with the conjugate
// padding rules, average 2m+1 neighbours per bin, then average over epochs.
inline std::vector<Eigen::MatrixXcd> smoothed_spectrum(const tsfactor::EpochSet& es, Index m) {
  const Index n = es.channels(), T = es.samples();
  std::vector<Eigen::MatrixXcd> total(static_cast<std::size_t>(T), Eigen::MatrixXcd::Zero(n, n));
  for (const auto& ep : es.epochs()) {
    const auto I = periodogram(ep);
    auto padded = [&](Index j) -> Eigen::MatrixXcd {
      if (j < 0) return I[static_cast<std::size_t>(-j)].conjugate();
      if (j == T) return I[0];
      if (j > T) return I[static_cast<std::size_t>(T - (j - T))].conjugate();
      return I[static_cast<std::size_t>(j)];
    };
    for (Index k = 0; k < T; ++k) {
      Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(n, n);
      for (Index l = -m; l <= m; ++l) s += padded(k + l);
      total[static_cast<std::size_t>(k)] += s / static_cast<double>(2 * m + 1);
    }
  }
  for (auto& s : total) s /= static_cast<double>(es.num_epochs());
  return total;
}

// sum_t ||z(t) - zhat(t)||^2 computed sample by sample.
inline double residual_energy(const Eigen::MatrixXd& z, const Eigen::MatrixXd& zhat) {
  double s = 0.0;
  for (Index t = 0; t < z.cols(); ++t)
    for (Index i = 0; i < z.rows(); ++i) s += (z(i, t) - zhat(i, t)) * (z(i, t) - zhat(i, t));
  return s;
}

// Spectral density of f(t) = phi f(t-1) + e(t), Var e = 1, in the
// (1/T)|DFT|^2 normalization: 1 / |1 - phi exp(-i w)|^2.
inline double ar1_spectrum(double phi, double omega) {
  return 1.0 / (1.0 + phi * phi - 2.0 * phi * std::cos(omega));
}

// Cross-correlation by explicit loops over t, means removed, normalized by
// sqrt(sum a^2 sum b^2).
inline std::vector<double> brute_ccf(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, Index L) {
  const Index T = a.size();
  const double ma = a.mean(), mb = b.mean();
  double saa = 0.0, sbb = 0.0;
  for (Index t = 0; t < T; ++t) {
    saa += (a(t) - ma) * (a(t) - ma);
    sbb += (b(t) - mb) * (b(t) - mb);
  }
  std::vector<double> out;
  for (Index l = -L; l <= L; ++l) {
    double s = 0.0;
    for (Index t = 0; t < T; ++t)
      if (t + l >= 0 && t + l < T) s += (a(t) - ma) * (b(t + l) - mb);
    out.push_back(s / std::sqrt(saa * sbb));
  }
  return out;
}

// Random test inputs.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  Index uniform(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

  Eigen::MatrixXd gaussian(Index rows, Index cols) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    return m;
  }

  tsfactor::EpochSet epochs(Index n, Index T, Index E, double rate = 1.0) {
    std::vector<Eigen::MatrixXd> eps;
    for (Index e = 0; e < E; ++e) eps.push_back(gaussian(n, T));
    return tsfactor::EpochSet(std::move(eps), rate, {});
  }

  // Channels driven by a few filtered sources, so spectra are not flat.
  tsfactor::EpochSet coloured(Index n, Index T, Index E, Index sources) {
    const Eigen::MatrixXd mix = gaussian(n, sources);
    std::vector<Eigen::MatrixXd> eps;
    for (Index e = 0; e < E; ++e) {
      Eigen::MatrixXd u = gaussian(sources, T);
      for (Index t = 1; t < T; ++t) u.col(t) += 0.7 * u.col(t - 1);
      eps.push_back(mix * u + 0.1 * gaussian(n, T));
    }
    return tsfactor::EpochSet(std::move(eps), 1.0, {});
  }
};

inline double rel_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace oracle
