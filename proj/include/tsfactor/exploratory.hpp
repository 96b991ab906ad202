#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/factor_model.hpp"
#include "tsfactor/spectral.hpp"

namespace tsfactor {

/// cumulative[j] is the fraction of total variance carried by factors 1..j+1.
struct VarianceAccounted {
  std::vector<double> cumulative;
};

namespace detail {

inline VarianceAccounted cumulative_fraction(const Eigen::VectorXd& power) {
  // Tiny negative eigenvalues from round-off count as zero power.
  const Eigen::VectorXd p = power.cwiseMax(0.0);
  const double total = p.sum();
  VarianceAccounted va;
  double running = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    running += p(j);
    va.cumulative.push_back(total > 0.0 ? running / total : 1.0);
  }
  if (!va.cumulative.empty()) va.cumulative.back() = 1.0;
  return va;
}

}  // namespace detail

inline VarianceAccounted variance_accounted(const InstantFactorModel& model) {
  return detail::cumulative_fraction(model.eigenvalues());
}

/// Uses the frequency-summed eigenvalues sum_k lambda_j(k).
inline VarianceAccounted variance_accounted(const DynamicFactorModel& model) {
  return detail::cumulative_fraction(model.eigenvalues().cwiseMax(0.0).rowwise().sum());
}

inline VarianceAccounted variance_accounted(const FactorModel& model) {
  return std::visit([](const auto& m) { return variance_accounted(m); }, model);
}

/// One-sided power spectral density per epoch and factor over bins
/// 0..floor(T/2), in power per Hz. Interior bins are doubled so that
/// sum_k density[k] * fs / T equals the mean square of the series.
struct FactorPsd {
  std::vector<double> frequencies_hz;
  // density[epoch][factor] has floor(T/2)+1 entries
  std::vector<std::vector<std::vector<double>>> density;
};

inline FactorPsd factor_psd(const FactorSeries& fs, double sampling_rate, std::optional<Index> bandwidth = std::nullopt) {
  if (!(sampling_rate > 0.0)) throw ArgumentError("factor_psd: sampling rate must be positive");
  const Index T = fs.samples();
  if (T < 2) throw ShapeError("factor_psd: need at least two samples");
  const Index half = T / 2;
  FactorPsd out;
  for (Index k = 0; k <= half; ++k) out.frequencies_hz.push_back(static_cast<double>(k) * sampling_rate / static_cast<double>(T));
  out.density.resize(fs.num_epochs());
  for (std::size_t e = 0; e < fs.num_epochs(); ++e) {
    for (Index j = 0; j < fs.factors(); ++j) {
      Eigen::MatrixXd series = fs.epoch(e).row(j);
      const SpectralMatrix s = cross_power_spectrum(EpochSet({std::move(series)}, sampling_rate, {}), bandwidth);
      std::vector<double> d(static_cast<std::size_t>(half + 1));
      for (Index k = 0; k <= half; ++k) {
        const bool edge = k == 0 || (T % 2 == 0 && k == half);
        d[static_cast<std::size_t>(k)] = std::max(0.0, s.half_bin(k)(0, 0).real()) / sampling_rate * (edge ? 1.0 : 2.0);
      }
      out.density[e].push_back(std::move(d));
    }
  }
  return out;
}

/// values[epoch][l + L] is the correlation between a(t) and b(t + l) for
/// lags l = -L..L. Positive lags mean `a` leads `b`.
struct CrossCorrelation {
  Index max_lag{0};
  std::vector<std::vector<double>> values;
  std::vector<std::string> warnings;

  std::vector<Index> lags() const {
    std::vector<Index> out;
    for (Index l = -max_lag; l <= max_lag; ++l) out.push_back(l);
    return out;
  }
};

/// Pearson cross-correlation of two real series: means removed, sums over the
/// overlapping samples only, normalized by T times both full-series standard
/// deviations. Zero-variance input yields NaN and a warning.
inline std::vector<double> cross_correlation_series(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                                    const Eigen::Ref<const Eigen::RowVectorXd>& b, Index max_lag,
                                                    bool* degenerate = nullptr) {
  const Index T = a.size();
  const Eigen::RowVectorXd ac = a.array() - a.mean();
  const Eigen::RowVectorXd bc = b.array() - b.mean();
  const double norm = std::sqrt(ac.dot(ac) * bc.dot(bc));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * max_lag + 1));
  if (degenerate) *degenerate = !(norm > 0.0);
  for (Index l = -max_lag; l <= max_lag; ++l) {
    if (!(norm > 0.0)) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    // sum_t a(t) b(t + l) over t with both indices in range
    const Index start = std::max<Index>(0, -l), stop = std::min<Index>(T, T - l);
    const Index len = stop - start;
    out.push_back(len > 0 ? ac.segment(start, len).dot(bc.segment(start + l, len)) / norm : 0.0);
  }
  return out;
}

/// Factor `factor_a` of `a` against factor `factor_b` of `b` (0-based), per epoch.
inline CrossCorrelation cross_correlation(const FactorSeries& a, Index factor_a, const FactorSeries& b, Index factor_b,
                                          Index max_lag) {
  if (a.num_epochs() != b.num_epochs() || a.samples() != b.samples())
    throw ShapeError("cross_correlation: series differ in epochs or length");
  if (factor_a < 0 || factor_a >= a.factors() || factor_b < 0 || factor_b >= b.factors())
    throw ArgumentError("cross_correlation: factor index out of range");
  if (max_lag < 0 || max_lag >= a.samples()) throw ArgumentError("cross_correlation: need 0 <= max_lag < T");
  CrossCorrelation out;
  out.max_lag = max_lag;
  for (std::size_t e = 0; e < a.num_epochs(); ++e) {
    bool degenerate = false;
    out.values.push_back(cross_correlation_series(a.epoch(e).row(factor_a), b.epoch(e).row(factor_b), max_lag, &degenerate));
    if (degenerate) out.warnings.push_back("epoch " + std::to_string(e) + ": zero-variance series, values set to NaN");
  }
  return out;
}

}  // namespace tsfactor
