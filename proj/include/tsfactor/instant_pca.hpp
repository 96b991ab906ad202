#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/fit_options.hpp"

namespace tsfactor {

/// Instantaneous-mixing factor model: f(t) = A^T z(t), z_hat(t) = A f(t),
/// with A the leading eigenvectors of the zero-lag covariance.
class InstantFactorModel {
 public:
  InstantFactorModel(Eigen::MatrixXd loadings, Eigen::VectorXd eigenvalues)
      : loadings_(std::move(loadings)), eigenvalues_(std::move(eigenvalues)) {
    const Index n = loadings_.rows(), m = loadings_.cols();
    if (m < 1 || m > n) throw ShapeError("InstantFactorModel: need 1 <= m_f <= n");
    if (eigenvalues_.size() != n) throw ShapeError("InstantFactorModel: expected n eigenvalues");
    if (!loadings_.allFinite() || !eigenvalues_.allFinite())
      throw ValidationError("InstantFactorModel: non-finite parameters");
    const double off = (loadings_.transpose() * loadings_ - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    if (off > 1e-8) throw ValidationError("InstantFactorModel: loadings are not orthonormal");
  }

  Index channels() const { return loadings_.rows(); }
  Index factors() const { return loadings_.cols(); }
  const Eigen::MatrixXd& loadings() const { return loadings_; }
  /// All n eigenvalues of the zero-lag covariance, descending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  Eigen::MatrixXd loadings_;
  Eigen::VectorXd eigenvalues_;
};

namespace detail {

// Largest-magnitude entry made positive; ties go to the lowest index.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  if (v(best) < 0.0) v = -v;
}

}  // namespace detail

/// Zero-lag covariance (1/T) sum_t z(t) z(t)^T averaged over epochs. No centering.
inline Eigen::MatrixXd zero_lag_covariance(const EpochSet& es) {
  const Index n = es.channels();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& ep : es.epochs()) cov.selfadjointView<Eigen::Lower>().rankUpdate(ep, 1.0);
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(es.samples()) * static_cast<double>(es.num_epochs());
  return cov;
}

inline InstantFactorModel fit_instant(const EpochSet& es, Index factors, const FitOptions& opts = {}) {
  const Index n = es.channels();
  if (factors < 1 || factors > n)
    throw ArgumentError("fit_instant: m_f = " + std::to_string(factors) + " outside 1.." + std::to_string(n));
  const Eigen::MatrixXd cov = zero_lag_covariance(prepare(es, opts));
  if (!cov.allFinite()) throw ValidationError("fit_instant: covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("fit_instant: eigendecomposition failed");
  // Eigen returns ascending order.
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd loadings(n, factors);
  for (Index j = 0; j < factors; ++j) {
    loadings.col(j) = solver.eigenvectors().col(n - 1 - j);
    detail::fix_sign(loadings.col(j));
  }
  return InstantFactorModel(std::move(loadings), std::move(values));
}

inline FactorSeries encode_instant(const InstantFactorModel& model, const EpochSet& es) {
  if (es.channels() != model.channels())
    throw ShapeError("encode_instant: data has " + std::to_string(es.channels()) + " channels, model expects " +
                     std::to_string(model.channels()));
  std::vector<Eigen::MatrixXd> out;
  out.reserve(es.num_epochs());
  for (const auto& ep : es.epochs()) out.emplace_back(model.loadings().transpose() * ep);
  return FactorSeries(std::move(out), es.sampling_rate());
}

inline EpochSet decode_instant(const InstantFactorModel& model, const FactorSeries& fs,
                               std::vector<std::string> labels = {}) {
  if (fs.factors() != model.factors())
    throw ShapeError("decode_instant: series has " + std::to_string(fs.factors()) + " factors, model expects " +
                     std::to_string(model.factors()));
  std::vector<Eigen::MatrixXd> out;
  out.reserve(fs.num_epochs());
  for (const auto& f : fs.epochs()) out.emplace_back(model.loadings() * f);
  return EpochSet(std::move(out), fs.sampling_rate(), std::move(labels));
}

}  // namespace tsfactor
