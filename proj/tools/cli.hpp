#pragma once

#include <algorithm>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsfactor/epoch_io.hpp"
#include "tsfactor/evaluation.hpp"
#include "tsfactor/exploratory.hpp"
#include "tsfactor/factor_model.hpp"
#include "tsfactor/serialize.hpp"
#include "tsfactor/service.hpp"
#include "tsfactor/simulate.hpp"

namespace tsfactor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "1..20", "1,2,5" or a mix such as "1..3,8".
inline std::vector<Index> parse_sweep(const std::string& text) {
  std::vector<Index> out;
  auto number = [&](const std::string& s) {
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("bad sweep value '" + s + "'");
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string part = text.substr(start, comma - start);
    const std::size_t dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(number(part));
    } else {
      const Index lo = number(part.substr(0, dots)), hi = number(part.substr(dots + 2));
      if (hi < lo) throw UsageError("empty sweep range '" + part + "'");
      for (Index v = lo; v <= hi; ++v) out.push_back(v);
    }
    start = comma + 1;
  }
  return out;
}

inline std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    try {
      out.push_back(parse_method(text.substr(start, comma - start)));
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    start = comma + 1;
  }
  return out;
}

inline DataFormat format_for(const std::string& name, const fs::path& path) {
  if (name == "csv-dir") return DataFormat::kCsvDir;
  if (name == "packed") return DataFormat::kPackedBinary;
  if (name != "auto") throw UsageError("unknown format '" + name + "' (csv-dir, packed, auto)");
  return path.has_extension() ? DataFormat::kPackedBinary : DataFormat::kCsvDir;
}

/// Path with its extension replaced by `suffix` (e.g. "report.json" -> "report_figure.csv").
inline fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + suffix);
  return out;
}

struct DataArgs {
  std::string input;
  std::string region;
  bool no_center = false;
  std::string center_mode = "epoch";

  void add(CLI::App* app) {
    app->add_option("--in", input, "Dataset directory (csv-dir) or packed file")->required();
    app->add_option("--region", region, "Region name; all channels when omitted");
    app->add_flag("--no-center", no_center, "Use the data without removing channel means");
    app->add_option("--center", center_mode, "Centering: epoch or pooled")->check(CLI::IsMember({"epoch", "pooled"}));
  }

  FitOptions options() const {
    FitOptions o;
    o.center = !no_center;
    o.center_mode = center_mode == "pooled" ? CenterMode::kPooled : CenterMode::kPerEpoch;
    return o;
  }

  EpochSet load() const {
    Dataset ds = load_dataset(input);
    if (region.empty()) return ds.data;
    return extract_region(ds.data, ds.regions, region);
  }

  EpochSet load_prepared() const { return prepare(load(), options()); }
};

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args);
  }

  int run(std::vector<std::string> args) {
    CLI::App app{"Factor models for multichannel epoched time series"};
    app.require_subcommand(1);
    std::function<void()> action;
    add_simulate(app, action);
    add_fit(app, action);
    add_encode(app, action);
    add_reconstruct(app, action);
    add_benchmark(app, action);
    add_explore_psd(app, action);
    add_explore_ccf(app, action);
    add_variance(app, action);
    add_serve(app, action);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp& e) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n" << "run with --help for usage\n";
      return kExitUsage;
    }
    try {
      action();
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const Error& e) {
      err_ << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
      return kExitData;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitData;
    }
    return kExitOk;
  }

 private:
  std::ostream& out_;
  std::ostream& err_;

  struct {
    std::string kind = "iid-gaussian", preset, spec_file, loading = "random", format = "auto", out;
    Index n = 20, T = 1000, rank = 2, lag = 5;
    std::uint64_t seed = 0, stream = 0;
    std::size_t epochs = 1;
    double fs = 1000.0, phi = 0.9, noise_std = 1.0;
  } sim_;

  struct {
    DataArgs data;
    std::string method, out;
    Index factors = 1;
    std::optional<Index> bandwidth;
  } fit_;

  struct {
    DataArgs data;
    std::string model, out, format = "auto";
    bool report_error = false;
  } enc_;

  struct {
    std::string spec_file, preset, sweep = "1..20", methods = "instant,dynamic", out;
    std::uint64_t seed = 0;
    Index K = 20;
    std::size_t epochs = 1;
    std::optional<Index> bandwidth;
  } bench_;

  struct {
    DataArgs data;
    std::string model, out;
    Index factor = 1;
    std::optional<Index> bandwidth;
  } psd_;

  struct {
    std::string input, model_a, model_b, region_a, region_b, out;
    Index factor_a = 1, factor_b = 1, max_lag = 20;
    bool no_center = false;
  } ccf_;

  struct {
    std::string model, out;
  } var_;

  struct {
    std::vector<std::string> datasets;
    std::string host = "127.0.0.1", ui;
    int port = 8080;
  } serve_;

  void emit(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-")
      out_ << contents;
    else
      write_file_atomic(path, contents);
  }

  void add_simulate(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
    auto& o = sim_;
    cmd->add_option("--kind", o.kind, "iid-gaussian, lowrank-white, ar-latent, shifted-clusters, coupled-regions");
    cmd->add_option("--preset", o.preset, "iid, lowrank, ar, shift2, shift3, coupled (overrides --kind)");
    cmd->add_option("--spec", o.spec_file, "SimSpec JSON file (overrides --kind and --preset)");
    cmd->add_option("--n", o.n, "Channels");
    cmd->add_option("--T", o.T, "Samples per epoch");
    cmd->add_option("--seed", o.seed, "Seed");
    cmd->add_option("--stream", o.stream, "Realization index (0 = training set)");
    cmd->add_option("--epochs", o.epochs, "Epochs");
    cmd->add_option("--fs", o.fs, "Sampling rate in Hz");
    cmd->add_option("--rank", o.rank, "Rank for lowrank-white");
    cmd->add_option("--phi", o.phi, "AR coefficient of the latent");
    cmd->add_option("--noise-std", o.noise_std, "Observation noise std");
    cmd->add_option("--loading", o.loading, "random or uniform");
    cmd->add_option("--lag", o.lag, "Coupling lag for coupled-regions");
    cmd->add_option("--format", o.format, "csv-dir, packed, or auto (by extension)");
    cmd->add_option("--out", o.out, "Output directory or file")->required();
    cmd->callback([this, &action, cmd] {
      action = [this, cmd] {
        auto& o = sim_;
        SimSpec spec;
        if (!o.spec_file.empty()) {
          spec = sim_spec_from_json(json::parse(read_file(o.spec_file)));
        } else {
          if (!o.preset.empty()) {
            try {
              spec = preset(o.preset, o.seed);
            } catch (const ArgumentError& e) {
              throw UsageError(e.what());
            }
          } else {
            try {
              spec.kind = parse_sim_kind(o.kind);
            } catch (const ArgumentError& e) {
              throw UsageError(e.what());
            }
          }
          spec.seed = o.seed;
          if (cmd->count("--n")) spec.channels = o.n;
          if (cmd->count("--T")) spec.length = o.T;
          if (cmd->count("--fs")) spec.sampling_rate = o.fs;
          if (cmd->count("--rank")) spec.rank = o.rank;
          if (cmd->count("--phi")) spec.phi = o.phi;
          if (cmd->count("--noise-std")) spec.noise_std = o.noise_std;
          if (cmd->count("--lag")) spec.coupling_lag = o.lag;
          if (cmd->count("--loading")) spec.loading = parse_loading_policy(o.loading);
        }
        const EpochSet es = generate(spec, o.epochs, o.stream);
        save_epochs(es, o.out, format_for(o.format, o.out), generated_regions(spec));
      };
    });
  }

  void add_fit(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("fit", "Fit a factor model and write it as JSON");
    auto& o = fit_;
    o.data.add(cmd);
    cmd->add_option("--method", o.method, "instant or dynamic")->required()->check(CLI::IsMember({"instant", "dynamic"}));
    cmd->add_option("--m-f", o.factors, "Number of factors")->required();
    cmd->add_option("--m-bw", o.bandwidth, "Spectral smoothing half-width (dynamic; default floor(sqrt(T)), at most (T-1)/2)");
    cmd->add_option("--out", o.out, "Model JSON path ('-' for stdout)")->required();
    cmd->callback([this, &action] {
      action = [this] {
        auto& o = fit_;
        FitOptions opts = o.data.options();
        opts.bandwidth = o.bandwidth;
        const FactorModel model = fit(parse_method(o.method), o.data.load(), o.factors, opts);
        emit(o.out, model_to_string(model));
      };
    });
  }

  void add_encode(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("encode", "Compute factor series for a dataset");
    auto& o = enc_;
    o.data.add(cmd);
    cmd->add_option("--model", o.model, "Model JSON")->required();
    cmd->add_option("--format", o.format, "csv-dir, packed, or auto");
    cmd->add_option("--out", o.out, "Output directory or file")->required();
    cmd->callback([this, &action] {
      action = [this] {
        const FactorModel model = load_model(enc_.model);
        const EpochSet es = enc_.data.load_prepared();
        const FactorSeries f = encode(model, es);
        const EpochSet out(f.epochs(), es.sampling_rate(), detail::default_labels(f.factors(), "f"));
        save_epochs(out, enc_.out, format_for(enc_.format, enc_.out));
      };
    });
  }

  void add_reconstruct(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("reconstruct", "Decode the factors of a dataset back to channel space");
    auto& o = enc_;
    cmd->add_option("--in", o.data.input, "Dataset directory or packed file")->required();
    cmd->add_option("--region", o.data.region, "Region name");
    cmd->add_flag("--no-center", o.data.no_center, "Use the data without removing channel means");
    cmd->add_option("--model", o.model, "Model JSON")->required();
    cmd->add_option("--format", o.format, "csv-dir, packed, or auto");
    cmd->add_option("--out", o.out, "Output directory or file")->required();
    cmd->add_flag("--error", o.report_error, "Print the normalized reconstruction error");
    cmd->callback([this, &action] {
      action = [this] {
        const FactorModel model = load_model(enc_.model);
        const EpochSet es = enc_.data.load_prepared();
        const EpochSet rec = reconstruct(model, es);
        save_epochs(rec, enc_.out, format_for(enc_.format, enc_.out));
        if (enc_.report_error) out_ << "normalized_error " << format_double(normalized_error(es, rec)) << "\n";
      };
    });
  }

  void add_benchmark(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("benchmark", "Train/test reconstruction-error sweep on simulated data");
    auto& o = bench_;
    auto* spec = cmd->add_option("--spec", o.spec_file, "SimSpec JSON file");
    auto* pre = cmd->add_option("--preset", o.preset, "iid, lowrank, ar, shift2, shift3, coupled");
    spec->excludes(pre);
    cmd->add_option("--seed", o.seed, "Seed for --preset");
    cmd->add_option("--sweep", o.sweep, "Factor counts, e.g. 1..20 or 1,2,4");
    cmd->add_option("--K", o.K, "Number of test realizations");
    cmd->add_option("--methods", o.methods, "Comma-separated: instant,dynamic");
    cmd->add_option("--m-bw", o.bandwidth, "Spectral smoothing half-width for dynamic");
    cmd->add_option("--epochs", o.epochs, "Epochs per realization");
    cmd->add_option("--out", o.out, "Report JSON path; CSVs are written beside it")->required();
    cmd->callback([this, &action, spec, pre] {
      if (!spec->count() && !pre->count()) throw CLI::RequiredError("--spec or --preset");
      action = [this] {
        auto& o = bench_;
        SimSpec s;
        if (!o.spec_file.empty()) {
          s = sim_spec_from_json(json::parse(read_file(o.spec_file)));
        } else {
          try {
            s = preset(o.preset, o.seed);
          } catch (const ArgumentError& e) {
            throw UsageError(e.what());
          }
        }
        const auto sweep = parse_sweep(o.sweep);
        const auto methods = parse_methods(o.methods);
        FitOptions opts;
        opts.bandwidth = o.bandwidth;
        const EvalReport report = run_benchmark(s, sweep, o.K, methods, opts, o.epochs);
        const fs::path out = o.out;
        write_file_atomic(out, to_json(report).dump(2) + "\n");
        write_file_atomic(sibling(out, ".csv"), report_csv(report));
        write_file_atomic(sibling(out, "_figure.csv"), figure_csv(report));
        for (Method m : methods) {
          out_ << to_string(m) << ":";
          for (double v : report.test_means(m)) out_ << " " << format_double(v);
          out_ << "\n";
        }
      };
    });
  }

  void add_explore_psd(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("explore-psd", "Per-epoch power spectral density of one factor");
    auto& o = psd_;
    o.data.add(cmd);
    cmd->add_option("--model", o.model, "Model JSON")->required();
    cmd->add_option("--factor", o.factor, "Factor index (1-based)");
    cmd->add_option("--m-bw", o.bandwidth, "Smoothing half-width (default floor(sqrt(T)), at most (T-1)/2)");
    cmd->add_option("--out", o.out, "CSV path ('-' for stdout)");
    cmd->callback([this, &action] {
      action = [this] {
        auto& o = psd_;
        const FactorModel model = load_model(o.model);
        const EpochSet es = o.data.load_prepared();
        if (o.factor < 1 || o.factor > factors_of(model))
          throw ArgumentError("--factor must be in 1.." + std::to_string(factors_of(model)));
        const FactorPsd p = factor_psd(encode(model, es), es.sampling_rate(), o.bandwidth);
        emit(o.out, psd_csv(p, static_cast<std::size_t>(o.factor - 1)));
      };
    });
  }

  void add_explore_ccf(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("explore-ccf", "Per-epoch cross-correlation between two factors");
    auto& o = ccf_;
    cmd->add_option("--in", o.input, "Dataset directory or packed file")->required();
    cmd->add_option("--model-a", o.model_a, "Model JSON for the first region")->required();
    cmd->add_option("--model-b", o.model_b, "Model JSON for the second region")->required();
    cmd->add_option("--region-a", o.region_a, "First region (all channels when omitted)");
    cmd->add_option("--region-b", o.region_b, "Second region (all channels when omitted)");
    cmd->add_option("--factor-a", o.factor_a, "Factor of model A (1-based)");
    cmd->add_option("--factor-b", o.factor_b, "Factor of model B (1-based)");
    cmd->add_option("--max-lag", o.max_lag, "Largest lag in samples");
    cmd->add_flag("--no-center", o.no_center, "Use the data without removing channel means");
    cmd->add_option("--out", o.out, "CSV path ('-' for stdout)");
    cmd->callback([this, &action] {
      action = [this] {
        auto& o = ccf_;
        const Dataset ds = load_dataset(o.input);
        FitOptions opts;
        opts.center = !o.no_center;
        auto region = [&](const std::string& name) {
          return prepare(name.empty() ? ds.data : extract_region(ds.data, ds.regions, name), opts);
        };
        const FactorSeries fa = encode(load_model(o.model_a), region(o.region_a));
        const FactorSeries fb = encode(load_model(o.model_b), region(o.region_b));
        const CrossCorrelation c = cross_correlation(fa, o.factor_a - 1, fb, o.factor_b - 1, o.max_lag);
        for (const auto& w : c.warnings) err_ << "warning: " << w << "\n";
        emit(o.out, ccf_csv(c));
      };
    });
  }

  void add_variance(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("variance", "Cumulative variance accounted by the factors of a model");
    cmd->add_option("--model", var_.model, "Model JSON")->required();
    cmd->add_option("--out", var_.out, "CSV path ('-' for stdout)");
    cmd->callback([this, &action] {
      action = [this] { emit(var_.out, variance_csv(variance_accounted(load_model(var_.model)))); };
    });
  }

  void add_serve(CLI::App& app, std::function<void()>& action) {
    auto* cmd = app.add_subcommand("serve", "Serve the exploration JSON API");
    auto& o = serve_;
    cmd->add_option("--dataset", o.datasets, "id=path, repeatable");
    cmd->add_option("--host", o.host, "Bind address");
    cmd->add_option("--port", o.port, "Port");
    cmd->add_option("--ui", o.ui, "Directory of static UI files served at /");
    cmd->callback([this, &action] {
      action = [this] {
        auto& o = serve_;
        auto catalog = std::make_shared<Catalog>();
        for (const auto& d : o.datasets) {
          const auto eq = d.find('=');
          if (eq == std::string::npos || eq == 0 || eq + 1 == d.size())
            throw UsageError("--dataset expects id=path, got '" + d + "'");
          const fs::path path = d.substr(eq + 1);
          if (!fs::exists(path)) throw IoError("dataset path does not exist: " + path.string());
          catalog->add_dataset(d.substr(0, eq), path);
        }
        Api api(catalog);
        std::optional<fs::path> ui;
        if (!o.ui.empty()) ui = fs::path(o.ui);
        err_ << "listening on http://" << o.host << ":" << o.port << "\n";
        if (!serve(api, o.host, o.port, ui)) throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
      };
    });
  }
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Cli cli(out, err);
  return cli.run(argc, argv);
}

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Cli cli(out, err);
  return cli.run(std::move(args));
}

}  // namespace tsfactor::cli
