#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"

namespace tsfactor {

using Complex = std::complex<double>;

/// Unnormalized forward DFT of every channel of an epoch. values(i, k) is
/// sum_t z_i(t) exp(-2 pi i t k / T).
struct DftSeries {
  Eigen::MatrixXcd values;  // n x T

  Index channels() const { return values.rows(); }
  Index length() const { return values.cols(); }
};

inline DftSeries dft_epoch(const Eigen::MatrixXd& epoch) {
  const Index n = epoch.rows(), T = epoch.cols();
  if (T < 2) throw ShapeError("dft_epoch: need at least two samples");
  detail::require_finite(epoch, "dft_epoch");
  Eigen::FFT<double> fft;
  Eigen::VectorXd row(T);
  Eigen::VectorXcd out(T);
  DftSeries result{Eigen::MatrixXcd(n, T)};
  for (Index i = 0; i < n; ++i) {
    row = epoch.row(i).transpose();
    fft.fwd(out.data(), row.data(), T);
    result.values.row(i) = out.transpose();
  }
  return result;
}

/// Inverse DFT (with the 1/T factor) of each row.
inline Eigen::MatrixXcd idft(const Eigen::MatrixXcd& spectrum) {
  const Index n = spectrum.rows(), T = spectrum.cols();
  Eigen::FFT<double> fft;
  Eigen::VectorXcd in(T), out(T);
  Eigen::MatrixXcd result(n, T);
  for (Index i = 0; i < n; ++i) {
    in = spectrum.row(i).transpose();
    fft.inv(out.data(), in.data(), T);
    result.row(i) = out.transpose();
  }
  return result;
}

/// max |imag| / max |real| of a complex series; 0 when both vanish.
inline double imaginary_residue(const Eigen::MatrixXcd& values) {
  const double re = values.real().cwiseAbs().maxCoeff();
  const double im = values.imag().cwiseAbs().maxCoeff();
  if (im == 0.0) return 0.0;
  return re > 0.0 ? im / re : std::numeric_limits<double>::infinity();
}

/// Real part of the inverse DFT after checking the imaginary residue is
/// below `tolerance` relative to the real part.
inline Eigen::MatrixXd idft_real(const Eigen::MatrixXcd& spectrum, double tolerance = 1e-8) {
  Eigen::MatrixXcd time = idft(spectrum);
  const double residue = imaginary_residue(time);
  if (residue > tolerance)
    throw NumericError("inverse DFT is not real: imaginary residue " + std::to_string(residue));
  return time.real();
}

/// floor(sqrt(T)) computed exactly in integers.
inline Index default_bandwidth(Index T) {
  Index m = static_cast<Index>(std::sqrt(static_cast<double>(T)));
  while (m * m > T) --m;
  while ((m + 1) * (m + 1) <= T) ++m;
  return m;
}

/// Default smoothing half-width: floor(sqrt(T)), capped so that 2m+1 <= T.
inline Index default_smoothing(Index T) { return std::min(default_bandwidth(T), (T - 1) / 2); }

/// Smoothed cross power spectrum: one Hermitian n x n matrix per frequency bin
/// k = 0..T-1. Only bins 0..floor(T/2) are stored; the rest follow from
/// S(T-k) = conj(S(k)).
class SpectralMatrix {
 public:
  SpectralMatrix(std::vector<Eigen::MatrixXcd> half, Index length, Index bandwidth, std::size_t epochs,
                 std::vector<std::string> warnings = {})
      : half_(std::move(half)), length_(length), bandwidth_(bandwidth), epochs_(epochs),
        warnings_(std::move(warnings)) {
    if (static_cast<Index>(half_.size()) != length_ / 2 + 1)
      throw ShapeError("SpectralMatrix: expected floor(T/2)+1 stored bins");
  }

  Index length() const { return length_; }
  Index channels() const { return half_.front().rows(); }
  Index bandwidth() const { return bandwidth_; }
  std::size_t epochs() const { return epochs_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Stored bin, k in 0..floor(T/2).
  const Eigen::MatrixXcd& half_bin(Index k) const { return half_.at(static_cast<std::size_t>(k)); }

  /// Any bin k in 0..T-1.
  Eigen::MatrixXcd at(Index k) const {
    if (k < 0 || k >= length_) throw ArgumentError("SpectralMatrix: bin out of range");
    if (k <= length_ / 2) return half_[static_cast<std::size_t>(k)];
    return half_[static_cast<std::size_t>(length_ - k)].conjugate();
  }

 private:
  std::vector<Eigen::MatrixXcd> half_;
  Index length_;
  Index bandwidth_;
  std::size_t epochs_;
  std::vector<std::string> warnings_;
};

namespace detail {

// Copies the lower triangle onto the upper one as its conjugate and zeroes the
// imaginary part of the diagonal.
inline void hermitian_from_lower(Eigen::MatrixXcd& m) {
  const Index n = m.rows();
  for (Index j = 0; j < n; ++j) {
    m(j, j) = Complex(m(j, j).real(), 0.0);
    for (Index i = j + 1; i < n; ++i) m(j, i) = std::conj(m(i, j));
  }
}

constexpr std::size_t kEpochBatch = 32;

}  // namespace detail

/// Raw periodogram averaged over epochs, I(k) = (1/T) z(k) z(k)^H, for bins
/// k = 0..last_bin.
inline std::vector<Eigen::MatrixXcd> averaged_periodogram(const EpochSet& es, Index last_bin) {
  const Index n = es.channels(), T = es.samples();
  const std::size_t E = es.num_epochs();
  const double scale = 1.0 / (static_cast<double>(T) * static_cast<double>(E));
  std::vector<Eigen::MatrixXcd> P(static_cast<std::size_t>(last_bin + 1), Eigen::MatrixXcd::Zero(n, n));
  std::vector<Eigen::MatrixXcd> dfts;
  Eigen::MatrixXcd batch;
  for (std::size_t start = 0; start < E; start += detail::kEpochBatch) {
    const std::size_t stop = std::min(E, start + detail::kEpochBatch);
    dfts.clear();
    for (std::size_t e = start; e < stop; ++e) dfts.push_back(dft_epoch(es.epoch(e)).values);
    batch.resize(n, static_cast<Index>(stop - start));
    for (Index k = 0; k <= last_bin; ++k) {
      for (std::size_t b = 0; b < dfts.size(); ++b) batch.col(static_cast<Index>(b)) = dfts[b].col(k);
      P[static_cast<std::size_t>(k)].selfadjointView<Eigen::Lower>().rankUpdate(batch, scale);
    }
  }
  for (auto& m : P) detail::hermitian_from_lower(m);
  return P;
}

/// Smoothed cross power spectrum with flat weights 1/(2m+1) over bins
/// k-m..k+m. Out-of-range bins are filled by I(-j) = conj(I(j)) and
/// I(T+j) = conj(I(T-j)). With several epochs the smoothed estimates are
/// averaged (equivalently, the periodograms are averaged before smoothing).
inline SpectralMatrix cross_power_spectrum(const EpochSet& es, std::optional<Index> bandwidth = std::nullopt) {
  const Index n = es.channels(), T = es.samples();
  const std::size_t E = es.num_epochs();
  const Index m = bandwidth.value_or(default_smoothing(T));
  if (m < 0) throw ArgumentError("cross_power_spectrum: bandwidth must be non-negative");
  if (2 * m + 1 > T)
    throw ArgumentError("cross_power_spectrum: bandwidth " + std::to_string(m) + " needs 2m+1 <= T = " +
                        std::to_string(T));
  std::vector<std::string> warnings;
  if (static_cast<double>(n) > 2.0 * static_cast<double>(m) * static_cast<double>(E) + static_cast<double>(E))
    warnings.push_back("spectral estimate cannot be full rank: n = " + std::to_string(n) +
                       " exceeds (2m+1)E = " + std::to_string((2 * m + 1) * static_cast<Index>(E)));

  const Index half = T / 2;
  const Index last = half + m;  // never reaches T because 2m+1 <= T
  std::vector<Eigen::MatrixXcd> P = averaged_periodogram(es, last);

  std::vector<Eigen::MatrixXcd> S(static_cast<std::size_t>(half + 1));
  if (m == 0) {
    for (Index k = 0; k <= half; ++k) S[static_cast<std::size_t>(k)] = P[static_cast<std::size_t>(k)];
  } else {
    auto add = [&](Eigen::MatrixXcd& acc, Index j, double sign) {
      if (j < 0)
        acc += sign * P[static_cast<std::size_t>(-j)].conjugate();
      else if (j >= T)
        acc += sign * P[static_cast<std::size_t>(2 * T - j)].conjugate();
      else
        acc += sign * P[static_cast<std::size_t>(j)];
    };
    const double h = 1.0 / static_cast<double>(2 * m + 1);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    for (Index l = -m; l <= m; ++l) add(acc, l, 1.0);
    S[0] = h * acc;
    for (Index k = 1; k <= half; ++k) {
      add(acc, k + m, 1.0);
      add(acc, k - m - 1, -1.0);
      S[static_cast<std::size_t>(k)] = h * acc;
    }
  }
  // DC and (even T) Nyquist bins are real for real input.
  S[0] = S[0].real().cast<Complex>();
  if (T % 2 == 0) S[static_cast<std::size_t>(half)] = S[static_cast<std::size_t>(half)].real().cast<Complex>();
  return SpectralMatrix(std::move(S), T, m, E, std::move(warnings));
}

/// Debug dump: one line per (bin, row, col) with real and imaginary parts.
inline void write_spectral_csv(const SpectralMatrix& s, std::ostream& os) {
  os << "bin,row,col,re,im\n";
  os.precision(17);
  for (Index k = 0; k < s.length(); ++k) {
    const Eigen::MatrixXcd m = s.at(k);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        os << k << ',' << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
  }
}

}  // namespace tsfactor
