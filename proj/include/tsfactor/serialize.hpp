#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsfactor/epoch_io.hpp"
#include "tsfactor/evaluation.hpp"
#include "tsfactor/exploratory.hpp"
#include "tsfactor/factor_model.hpp"
#include "tsfactor/simulate.hpp"

namespace tsfactor {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Models
//
// instant: {"method": "instant", "n", "m_f", "loadings": row-major n*m_f,
//           "eigenvalues": [n]}
// dynamic: {"method": "dynamic", "T", "n", "m_f", "m_bw",
//           "loadings": [floor(T/2)+1][row-major n*m_f*2 interleaved re, im],
//           "eigenvalues": [T][n]}

inline json to_json(const InstantFactorModel& model) {
  const auto& L = model.loadings();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(L.size()));
  for (Index i = 0; i < L.rows(); ++i)
    for (Index j = 0; j < L.cols(); ++j) flat.push_back(L(i, j));
  json j;
  j["method"] = "instant";
  j["n"] = model.channels();
  j["m_f"] = model.factors();
  j["loadings"] = flat;
  j["eigenvalues"] = std::vector<double>(model.eigenvalues().data(), model.eigenvalues().data() + model.eigenvalues().size());
  return j;
}

inline json to_json(const DynamicFactorModel& model) {
  const Index n = model.channels(), m = model.factors(), T = model.length();
  json loadings = json::array();
  for (const auto& c : model.half_loadings()) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(2 * n * m));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) {
        flat.push_back(c(i, j).real());
        flat.push_back(c(i, j).imag());
      }
    loadings.push_back(std::move(flat));
  }
  json eigen = json::array();
  for (Index k = 0; k < T; ++k) {
    const Eigen::VectorXd col = model.eigenvalues().col(k);
    eigen.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  json j;
  j["method"] = "dynamic";
  j["T"] = T;
  j["n"] = n;
  j["m_f"] = m;
  j["m_bw"] = model.bandwidth();
  j["loadings"] = std::move(loadings);
  j["eigenvalues"] = std::move(eigen);
  return j;
}

inline json to_json(const FactorModel& model) {
  return std::visit([](const auto& m) { return to_json(m); }, model);
}

/// Canonical text form; the CLI and the service both emit exactly this.
inline std::string model_to_string(const FactorModel& model) { return to_json(model).dump() + "\n"; }

inline FactorModel model_from_json(const json& j) {
  try {
    const std::string method = j.at("method").get<std::string>();
    const Index n = j.at("n").get<Index>(), m = j.at("m_f").get<Index>();
    if (n < 1 || m < 1 || m > n) throw ParseError("model: invalid dimensions");
    if (method == "instant") {
      const auto flat = j.at("loadings").get<std::vector<double>>();
      const auto ev = j.at("eigenvalues").get<std::vector<double>>();
      if (static_cast<Index>(flat.size()) != n * m) throw ParseError("model: loadings must have n*m_f entries");
      if (static_cast<Index>(ev.size()) != n) throw ParseError("model: eigenvalues must have n entries");
      Eigen::MatrixXd L(n, m);
      for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < m; ++c) L(i, c) = flat[static_cast<std::size_t>(i * m + c)];
      return InstantFactorModel(std::move(L), Eigen::Map<const Eigen::VectorXd>(ev.data(), n));
    }
    if (method == "dynamic") {
      const Index T = j.at("T").get<Index>();
      if (T < 2) throw ParseError("model: T must be at least 2");
      const auto& lj = j.at("loadings");
      if (static_cast<Index>(lj.size()) != T / 2 + 1) throw ParseError("model: expected floor(T/2)+1 loading bins");
      std::vector<Eigen::MatrixXcd> half;
      for (const auto& bin : lj) {
        const auto flat = bin.get<std::vector<double>>();
        if (static_cast<Index>(flat.size()) != 2 * n * m) throw ParseError("model: loading bin must have 2*n*m_f entries");
        Eigen::MatrixXcd c(n, m);
        for (Index i = 0; i < n; ++i)
          for (Index q = 0; q < m; ++q) {
            const std::size_t at = static_cast<std::size_t>(2 * (i * m + q));
            c(i, q) = Complex(flat[at], flat[at + 1]);
          }
        half.push_back(std::move(c));
      }
      const auto& ej = j.at("eigenvalues");
      if (static_cast<Index>(ej.size()) != T) throw ParseError("model: expected T eigenvalue rows");
      Eigen::MatrixXd ev(n, T);
      for (Index k = 0; k < T; ++k) {
        const auto col = ej[static_cast<std::size_t>(k)].get<std::vector<double>>();
        if (static_cast<Index>(col.size()) != n) throw ParseError("model: eigenvalue row must have n entries");
        ev.col(k) = Eigen::Map<const Eigen::VectorXd>(col.data(), n);
      }
      return DynamicFactorModel(std::move(half), std::move(ev), T, j.at("m_bw").get<Index>());
    }
    throw ParseError("model: unknown method '" + method + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

inline FactorModel load_model(const fs::path& path) {
  try {
    return model_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// SimSpec. Shift channel ranges are 1-based and inclusive in JSON.

inline json to_json(const SimSpec& s) {
  json shifts = json::array();
  for (const auto& sh : s.shifts) shifts.push_back({{"channels", {sh.first + 1, sh.last + 1}}, {"shift", sh.shift}});
  return {{"kind", to_string(s.kind)},
          {"n", s.channels},
          {"T", s.length},
          {"seed", s.seed},
          {"sampling_rate", s.sampling_rate},
          {"rank", s.rank},
          {"phi", s.phi},
          {"noise_std", s.noise_std},
          {"loading", to_string(s.loading)},
          {"shifts", shifts},
          {"coupling_lag", s.coupling_lag},
          {"noise_fraction", s.noise_fraction},
          {"oscillation_hz", s.oscillation_hz}};
}

inline SimSpec sim_spec_from_json(const json& j) {
  SimSpec s;
  try {
    s.kind = parse_sim_kind(j.at("kind").get<std::string>());
    s.channels = j.value("n", s.channels);
    s.length = j.value("T", s.length);
    s.seed = j.value("seed", s.seed);
    s.sampling_rate = j.value("sampling_rate", s.sampling_rate);
    s.rank = j.value("rank", s.rank);
    s.phi = j.value("phi", s.phi);
    s.noise_std = j.value("noise_std", s.noise_std);
    if (j.contains("loading")) s.loading = parse_loading_policy(j["loading"].get<std::string>());
    if (j.contains("shifts"))
      for (const auto& sh : j["shifts"]) {
        const auto range = sh.at("channels").get<std::vector<Index>>();
        if (range.size() != 2) throw ParseError("SimSpec: shift channels must be [first, last]");
        s.shifts.push_back({range[0] - 1, range[1] - 1, sh.at("shift").get<Index>()});
      }
    s.coupling_lag = j.value("coupling_lag", s.coupling_lag);
    s.noise_fraction = j.value("noise_fraction", s.noise_fraction);
    s.oscillation_hz = j.value("oscillation_hz", s.oscillation_hz);
  } catch (const json::exception& e) {
    throw ParseError(std::string("SimSpec: ") + e.what());
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// EvalReport

inline json to_json(const EvalReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"method", to_string(c.method)},
                     {"m_f", c.factors},
                     {"train_error", c.train_error},
                     {"test_mean", c.test_mean},
                     {"test_std", c.test_std},
                     {"fit_seconds", c.fit_seconds}});
  json methods = json::array();
  json diffs = json::object();
  for (Method m : r.methods) {
    methods.push_back(to_string(m));
    diffs[std::string(to_string(m))] = r.first_differences(m);
  }
  json j{{"source", r.source}, {"spec", to_json(r.spec)}, {"K", r.test_sets}, {"sweep", r.sweep},
         {"methods", methods}, {"cells", cells}, {"first_differences", diffs}};
  j["m_bw"] = r.bandwidth ? json(*r.bandwidth) : json(nullptr);
  return j;
}

inline EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    r.source = j.at("source").get<std::string>();
    r.spec = sim_spec_from_json(j.at("spec"));
    r.test_sets = j.at("K").get<Index>();
    r.sweep = j.at("sweep").get<std::vector<Index>>();
    for (const auto& m : j.at("methods")) r.methods.push_back(parse_method(m.get<std::string>()));
    if (j.contains("m_bw") && !j["m_bw"].is_null()) r.bandwidth = j["m_bw"].get<Index>();
    for (const auto& c : j.at("cells"))
      r.cells.push_back({parse_method(c.at("method").get<std::string>()), c.at("m_f").get<Index>(),
                         c.at("train_error").get<double>(), c.at("test_mean").get<double>(),
                         c.at("test_std").get<double>(), c.at("fit_seconds").get<double>()});
  } catch (const json::exception& e) {
    throw ParseError(std::string("EvalReport: ") + e.what());
  }
  return r;
}

/// method,m_f,train_error,test_mean,test_std,fit_seconds
inline std::string report_csv(const EvalReport& r) {
  std::string out = "method,m_f,train_error,test_mean,test_std,fit_seconds\n";
  for (const auto& c : r.cells)
    out += std::string(to_string(c.method)) + "," + std::to_string(c.factors) + "," + format_double(c.train_error) +
           "," + format_double(c.test_mean) + "," + format_double(c.test_std) + "," + format_double(c.fit_seconds) +
           "\n";
  return out;
}

/// Reconstruction-error curve: one row per m_f, mean and std per method.
inline std::string figure_csv(const EvalReport& r) {
  std::string out = "m_f";
  for (Method m : r.methods) {
    const std::string name(to_string(m));
    out += "," + name + "_test_mean," + name + "_test_std," + name + "_train";
  }
  out += "\n";
  for (Index mf : r.sweep) {
    out += std::to_string(mf);
    for (Method m : r.methods) {
      const auto& c = r.cell(m, mf);
      out += "," + format_double(c.test_mean) + "," + format_double(c.test_std) + "," + format_double(c.train_error);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exploratory tables

inline std::string variance_csv(const VarianceAccounted& va) {
  std::string out = "m_f,cumulative_fraction\n";
  for (std::size_t j = 0; j < va.cumulative.size(); ++j)
    out += std::to_string(j + 1) + "," + format_double(va.cumulative[j]) + "\n";
  return out;
}

/// Rows = epochs, columns = frequency bins (header row holds Hz) for one factor.
inline std::string psd_csv(const FactorPsd& psd, std::size_t factor) {
  std::string out = "epoch";
  for (double f : psd.frequencies_hz) out += "," + format_double(f);
  out += "\n";
  for (std::size_t e = 0; e < psd.density.size(); ++e) {
    out += std::to_string(e);
    for (double v : psd.density[e].at(factor)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

/// Rows = epochs, columns = lags.
inline std::string ccf_csv(const CrossCorrelation& ccf) {
  std::string out = "epoch";
  for (Index l : ccf.lags()) out += "," + std::to_string(l);
  out += "\n";
  for (std::size_t e = 0; e < ccf.values.size(); ++e) {
    out += std::to_string(e);
    for (double v : ccf.values[e]) out += "," + (std::isnan(v) ? std::string("nan") : format_double(v));
    out += "\n";
  }
  return out;
}

}  // namespace tsfactor
