#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/fit_options.hpp"
#include "tsfactor/instant_pca.hpp"
#include "tsfactor/spectral.hpp"

namespace tsfactor {

/// Frequency-domain factor model. Loadings C(k) (n x m_f, orthonormal
/// columns) act as transfer functions: f(k) = C(k)^H z(k) and
/// z_hat(k) = C(k) f(k). Bins above floor(T/2) use C(k) = conj(C(T-k)), so the
/// filters are real in the time domain. The filters are circular
/// convolutions on the fit-time length T.
class DynamicFactorModel {
 public:
  DynamicFactorModel(std::vector<Eigen::MatrixXcd> half_loadings, Eigen::MatrixXd eigenvalues, Index length,
                     Index bandwidth)
      : half_(std::move(half_loadings)), eigenvalues_(std::move(eigenvalues)), length_(length),
        bandwidth_(bandwidth) {
    if (length_ < 2) throw ShapeError("DynamicFactorModel: T must be at least 2");
    if (static_cast<Index>(half_.size()) != length_ / 2 + 1)
      throw ShapeError("DynamicFactorModel: expected floor(T/2)+1 loading matrices");
    const Index n = half_.front().rows(), m = half_.front().cols();
    if (m < 1 || m > n) throw ShapeError("DynamicFactorModel: need 1 <= m_f <= n");
    if (eigenvalues_.rows() != n || eigenvalues_.cols() != length_)
      throw ShapeError("DynamicFactorModel: eigenvalues must be n x T");
    if (!eigenvalues_.allFinite()) throw ValidationError("DynamicFactorModel: non-finite eigenvalues");
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(m, m);
    for (std::size_t k = 0; k < half_.size(); ++k) {
      const auto& c = half_[k];
      if (c.rows() != n || c.cols() != m) throw ShapeError("DynamicFactorModel: ragged loadings");
      if (!c.allFinite()) throw ValidationError("DynamicFactorModel: non-finite loadings");
      if ((c.adjoint() * c - eye).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("DynamicFactorModel: loadings at bin " + std::to_string(k) + " are not orthonormal");
    }
  }

  Index channels() const { return half_.front().rows(); }
  Index factors() const { return half_.front().cols(); }
  Index length() const { return length_; }
  Index bandwidth() const { return bandwidth_; }

  /// Stored loadings, k in 0..floor(T/2).
  const Eigen::MatrixXcd& half_loadings(Index k) const { return half_.at(static_cast<std::size_t>(k)); }
  const std::vector<Eigen::MatrixXcd>& half_loadings() const { return half_; }

  /// C(k) for any k in 0..T-1.
  Eigen::MatrixXcd loadings(Index k) const {
    if (k < 0 || k >= length_) throw ArgumentError("DynamicFactorModel: bin out of range");
    if (k <= length_ / 2) return half_[static_cast<std::size_t>(k)];
    return half_[static_cast<std::size_t>(length_ - k)].conjugate();
  }

  /// Column k holds all n eigenvalues of S(k), descending.
  const Eigen::MatrixXd& eigenvalues() const { return eigenvalues_; }

 private:
  std::vector<Eigen::MatrixXcd> half_;
  Eigen::MatrixXd eigenvalues_;
  Index length_;
  Index bandwidth_;
};

namespace detail {

// Rotates v so that its largest-magnitude entry is real and positive; ties go
// to the lowest index.
inline void fix_phase(Eigen::Ref<Eigen::VectorXcd> v) {
  Index best = 0;
  double best_abs = std::abs(v(0));
  for (Index i = 1; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best_abs) {
      best = i;
      best_abs = a;
    }
  }
  if (best_abs == 0.0) return;
  const Complex rot = std::conj(v(best)) / best_abs;
  v *= rot;
  v(best) = Complex(best_abs, 0.0);
}

}  // namespace detail

/// Per-bin Hermitian eigendecomposition of a smoothed spectral matrix.
inline DynamicFactorModel fit_dynamic(const SpectralMatrix& spectrum, Index factors) {
  const Index n = spectrum.channels(), T = spectrum.length(), half = T / 2;
  if (factors < 1 || factors > n)
    throw ArgumentError("fit_dynamic: m_f = " + std::to_string(factors) + " outside 1.." + std::to_string(n));
  std::vector<Eigen::MatrixXcd> loadings(static_cast<std::size_t>(half + 1));
  Eigen::MatrixXd eigenvalues(n, T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> complex_solver(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> real_solver(n);
  for (Index k = 0; k <= half; ++k) {
    const Eigen::MatrixXcd& s = spectrum.half_bin(k);
    if (!s.allFinite()) throw NumericError("fit_dynamic: spectral matrix at bin " + std::to_string(k) + " is not finite");
    Eigen::MatrixXcd c(n, factors);
    const bool real_bin = (k == 0) || (T % 2 == 0 && k == half);
    if (real_bin) {
      real_solver.compute(s.real());
      if (real_solver.info() != Eigen::Success)
        throw NumericError("fit_dynamic: eigensolver failed at bin " + std::to_string(k));
      eigenvalues.col(k) = real_solver.eigenvalues().reverse();
      for (Index j = 0; j < factors; ++j) {
        Eigen::VectorXd v = real_solver.eigenvectors().col(n - 1 - j);
        detail::fix_sign(v);
        c.col(j) = v.cast<Complex>();
      }
    } else {
      complex_solver.compute(s);
      if (complex_solver.info() != Eigen::Success)
        throw NumericError("fit_dynamic: eigensolver failed at bin " + std::to_string(k));
      eigenvalues.col(k) = complex_solver.eigenvalues().reverse();
      for (Index j = 0; j < factors; ++j) {
        c.col(j) = complex_solver.eigenvectors().col(n - 1 - j);
        detail::fix_phase(c.col(j));
      }
    }
    loadings[static_cast<std::size_t>(k)] = std::move(c);
  }
  for (Index k = half + 1; k < T; ++k) eigenvalues.col(k) = eigenvalues.col(T - k);
  return DynamicFactorModel(std::move(loadings), std::move(eigenvalues), T, spectrum.bandwidth());
}

inline DynamicFactorModel fit_dynamic(const EpochSet& es, Index factors, const FitOptions& opts = {}) {
  if (factors < 1 || factors > es.channels())
    throw ArgumentError("fit_dynamic: m_f = " + std::to_string(factors) + " outside 1.." +
                        std::to_string(es.channels()));
  return fit_dynamic(cross_power_spectrum(prepare(es, opts), opts.bandwidth), factors);
}

/// Factor series per epoch before the imaginary part is dropped.
inline std::vector<Eigen::MatrixXcd> encode_dynamic_complex(const DynamicFactorModel& model, const EpochSet& es) {
  if (es.channels() != model.channels())
    throw ShapeError("encode_dynamic: data has " + std::to_string(es.channels()) + " channels, model expects " +
                     std::to_string(model.channels()));
  if (es.samples() != model.length())
    throw ShapeError("encode_dynamic: data has T = " + std::to_string(es.samples()) +
                     ", model was fit with T = " + std::to_string(model.length()));
  const Index T = model.length(), m = model.factors(), half = T / 2;
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(es.num_epochs());
  Eigen::MatrixXcd f(m, T);
  for (const auto& ep : es.epochs()) {
    const Eigen::MatrixXcd z = dft_epoch(ep).values;
    for (Index k = 0; k < T; ++k) {
      if (k <= half)
        f.col(k).noalias() = model.half_loadings(k).adjoint() * z.col(k);
      else
        f.col(k).noalias() = model.half_loadings(T - k).transpose() * z.col(k);
    }
    out.push_back(idft(f));
  }
  return out;
}

inline FactorSeries encode_dynamic(const DynamicFactorModel& model, const EpochSet& es) {
  std::vector<Eigen::MatrixXcd> raw = encode_dynamic_complex(model, es);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(raw.size());
  for (std::size_t e = 0; e < raw.size(); ++e) {
    const double residue = imaginary_residue(raw[e]);
    if (residue > 1e-8)
      throw NumericError("encode_dynamic: factors of epoch " + std::to_string(e) +
                         " are not real (imaginary residue " + std::to_string(residue) + ")");
    out.emplace_back(raw[e].real());
  }
  return FactorSeries(std::move(out), es.sampling_rate());
}

/// Reconstruction per epoch before the imaginary part is dropped.
inline std::vector<Eigen::MatrixXcd> decode_dynamic_complex(const DynamicFactorModel& model, const FactorSeries& fs) {
  if (fs.factors() != model.factors())
    throw ShapeError("decode_dynamic: series has " + std::to_string(fs.factors()) + " factors, model expects " +
                     std::to_string(model.factors()));
  if (fs.samples() != model.length())
    throw ShapeError("decode_dynamic: series has T = " + std::to_string(fs.samples()) +
                     ", model was fit with T = " + std::to_string(model.length()));
  const Index T = model.length(), n = model.channels(), half = T / 2;
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(fs.num_epochs());
  Eigen::MatrixXcd z(n, T);
  for (const auto& f : fs.epochs()) {
    const Eigen::MatrixXcd fw = dft_epoch(f).values;
    for (Index k = 0; k < T; ++k) {
      if (k <= half)
        z.col(k).noalias() = model.half_loadings(k) * fw.col(k);
      else
        z.col(k).noalias() = model.half_loadings(T - k).conjugate() * fw.col(k);
    }
    out.push_back(idft(z));
  }
  return out;
}

inline EpochSet decode_dynamic(const DynamicFactorModel& model, const FactorSeries& fs,
                               std::vector<std::string> labels = {}) {
  std::vector<Eigen::MatrixXcd> raw = decode_dynamic_complex(model, fs);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(raw.size());
  for (std::size_t e = 0; e < raw.size(); ++e) {
    const double residue = imaginary_residue(raw[e]);
    if (residue > 1e-8)
      throw NumericError("decode_dynamic: reconstruction of epoch " + std::to_string(e) +
                         " is not real (imaginary residue " + std::to_string(residue) + ")");
    out.emplace_back(raw[e].real());
  }
  return EpochSet(std::move(out), fs.sampling_rate(), std::move(labels));
}

}  // namespace tsfactor
