#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/factor_model.hpp"
#include "tsfactor/simulate.hpp"

namespace tsfactor {

/// ||Z - Z_hat||_F^2 / ||Z||_F^2, both sums taken over all epochs.
inline double normalized_error(const EpochSet& z, const EpochSet& z_hat) {
  if (z.num_epochs() != z_hat.num_epochs() || z.channels() != z_hat.channels() || z.samples() != z_hat.samples())
    throw ShapeError("normalized_error: shapes differ");
  double residual = 0.0, reference = 0.0;
  for (std::size_t e = 0; e < z.num_epochs(); ++e) {
    residual += (z.epoch(e) - z_hat.epoch(e)).squaredNorm();
    reference += z.epoch(e).squaredNorm();
  }
  if (reference == 0.0) throw ArgumentError("normalized_error: reference has zero norm");
  return residual / reference;
}

struct EvalCell {
  Method method{Method::kInstant};
  Index factors{0};
  double train_error{0.0};
  double test_mean{0.0};
  double test_std{0.0};
  double fit_seconds{0.0};
  bool operator==(const EvalCell&) const = default;
};

struct EvalReport {
  std::string source;  // dataset identifier or simulation kind
  SimSpec spec;
  Index test_sets{0};
  std::vector<Index> sweep;
  std::vector<Method> methods;
  std::optional<Index> bandwidth;
  std::vector<EvalCell> cells;

  bool operator==(const EvalReport&) const = default;

  const EvalCell& cell(Method method, Index factors) const {
    for (const auto& c : cells)
      if (c.method == method && c.factors == factors) return c;
    throw LookupError("EvalReport: no cell for " + std::string(to_string(method)) + " m_f=" + std::to_string(factors));
  }

  std::vector<double> test_means(Method method) const {
    std::vector<double> out;
    for (Index m : sweep) out.push_back(cell(method, m).test_mean);
    return out;
  }

  std::vector<double> train_errors(Method method) const {
    std::vector<double> out;
    for (Index m : sweep) out.push_back(cell(method, m).train_error);
    return out;
  }

  /// mean(m_f[i]) - mean(m_f[i+1]) along the sweep; the drop in this rate
  /// is what hints at the number of synchronized clusters.
  std::vector<double> first_differences(Method method) const {
    const auto means = test_means(method);
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < means.size(); ++i) out.push_back(means[i] - means[i + 1]);
    return out;
  }
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace detail

/// Train/test protocol: fit each method and factor count on one training
/// realization (stream 0) and score the normalized reconstruction error on
/// K independent test realizations (streams 1..K). Test data are centered the
/// same way as the training data before encoding.
inline EvalReport run_benchmark(const SimSpec& spec, std::span<const Index> sweep, Index test_sets,
                                std::span<const Method> methods, const FitOptions& opts = {},
                                std::size_t epochs = 1) {
  spec.validate();
  if (test_sets < 1) throw ArgumentError("run_benchmark: K must be at least 1");
  if (sweep.empty()) throw ArgumentError("run_benchmark: empty factor sweep");
  for (Index m : sweep)
    if (m < 1 || m > spec.channels)
      throw ArgumentError("run_benchmark: sweep value " + std::to_string(m) + " outside 1.." +
                          std::to_string(spec.channels));
  if (methods.empty()) throw ArgumentError("run_benchmark: no methods selected");

  EvalReport report;
  report.source = std::string(to_string(spec.kind));
  report.spec = spec;
  report.test_sets = test_sets;
  report.sweep.assign(sweep.begin(), sweep.end());
  report.methods.assign(methods.begin(), methods.end());
  report.bandwidth = opts.bandwidth;

  const EpochSet train = prepare(generate(spec, epochs, 0), opts);
  std::vector<EpochSet> tests;
  tests.reserve(static_cast<std::size_t>(test_sets));
  for (Index k = 0; k < test_sets; ++k)
    tests.push_back(prepare(generate(spec, epochs, static_cast<std::uint64_t>(k + 1)), opts));

  FitOptions fit_opts = opts;
  fit_opts.center = false;  // already applied above
  for (Method method : methods) {
    for (Index m : sweep) {
      EvalCell cell;
      cell.method = method;
      cell.factors = m;
      try {
        const auto start = std::chrono::steady_clock::now();
        const FactorModel model = fit(method, train, m, fit_opts);
        cell.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        cell.train_error = normalized_error(train, reconstruct(model, train));
        std::vector<double> errors;
        errors.reserve(tests.size());
        for (const auto& test : tests) errors.push_back(normalized_error(test, reconstruct(model, test)));
        detail::mean_std(errors, cell.test_mean, cell.test_std);
      } catch (const Error& e) {
        rethrow_with_context(e, std::string(to_string(method)) + " m_f=" + std::to_string(m));
      }
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace tsfactor
