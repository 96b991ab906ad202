#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "tsfactor/epoch_io.hpp"
#include "tsfactor/exploratory.hpp"
#include "tsfactor/factor_model.hpp"
#include "tsfactor/serialize.hpp"

namespace tsfactor {

/// Region name used when a request names no region: every channel, in order.
inline constexpr std::string_view kAllChannels = "all";

struct ModelKey {
  std::string dataset;
  std::string region;
  Method method{Method::kInstant};
  Index factors{0};
  Index bandwidth{-1};  // resolved value; -1 for instant models

  std::string canonical() const {
    return dataset + '\x1f' + region + '\x1f' + std::string(to_string(method)) + '\x1f' + std::to_string(factors) +
           '\x1f' + std::to_string(bandwidth);
  }
};

/// 16 hex digits of the 64-bit FNV-1a hash of the key.
inline std::string model_id(const ModelKey& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

struct ModelEntry {
  ModelEntry(std::string id_, ModelKey key_, FactorModel model_, EpochSet data_, FactorSeries factors_,
             VarianceAccounted variance_)
      : id(std::move(id_)),
        key(std::move(key_)),
        model(std::move(model_)),
        data(std::move(data_)),
        factors(std::move(factors_)),
        variance(std::move(variance_)) {}

  std::string id;
  ModelKey key;
  FactorModel model;
  EpochSet data;  // region channels after centering, as fed to the fit
  FactorSeries factors;
  VarianceAccounted variance;

  const FactorPsd& psd() const {
    std::call_once(psd_once_, [this] { psd_ = factor_psd(factors, data.sampling_rate()); });
    return *psd_;
  }

 private:
  mutable std::once_flag psd_once_;
  mutable std::optional<FactorPsd> psd_;
};

/// Map of lazily computed values in which concurrent requests for one key
/// share a single computation. A failed computation is not cached.
template <class V>
class SingleFlight {
 public:
  using Ptr = std::shared_ptr<const V>;

  template <class Make>
  Ptr get(const std::string& key, Make&& make) {
    std::promise<Ptr> promise;
    std::shared_future<Ptr> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it != entries_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        owner = true;
      }
    }
    if (!owner) return future.get();
    try {
      Ptr value = make();
      ++computations_;
      promise.set_value(value);
      return value;
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mutex_);
      entries_.erase(key);
      throw;
    }
  }

  /// Completed or in-flight value for `key`, without computing.
  std::optional<std::shared_future<Ptr>> find(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t computations() const { return computations_.load(); }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  void clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<Ptr>> entries_;
  std::atomic<std::size_t> computations_{0};
};

class Catalog {
 public:
  /// Registers a dataset file or directory, loaded on first use.
  void add_dataset(const std::string& id, const fs::path& path) {
    std::lock_guard lock(mutex_);
    if (sources_.count(id)) throw ArgumentError("dataset '" + id + "' already registered");
    sources_.emplace(id, Source{path, nullptr});
  }

  void add_dataset(const std::string& id, Dataset dataset) {
    std::lock_guard lock(mutex_);
    if (sources_.count(id)) throw ArgumentError("dataset '" + id + "' already registered");
    sources_.emplace(id, Source{{}, std::make_shared<const Dataset>(std::move(dataset))});
  }

  std::vector<std::string> dataset_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sources_) out.push_back(id);
    return out;
  }

  std::shared_ptr<const Dataset> dataset(const std::string& id) {
    Source source;
    {
      std::lock_guard lock(mutex_);
      auto it = sources_.find(id);
      if (it == sources_.end()) throw LookupError("unknown dataset '" + id + "'");
      source = it->second;
    }
    if (source.preloaded) return source.preloaded;
    return datasets_.get(id, [&] { return std::make_shared<const Dataset>(load_dataset(source.path)); });
  }

  /// Region channels of a dataset; "" or "all" selects every channel unless
  /// the dataset defines a region with that name.
  EpochSet region_data(const std::string& id, const std::string& region) {
    const auto ds = dataset(id);
    if (ds->regions.contains(region)) return extract_region(ds->data, ds->regions, region);
    if (region.empty() || region == kAllChannels) return ds->data;
    throw LookupError("dataset '" + id + "' has no region '" + region + "'");
  }

  std::shared_ptr<const ModelEntry> fit(const std::string& dataset_id, const std::string& region, Method method,
                                        Index factors, std::optional<Index> bandwidth) {
    const EpochSet raw = region_data(dataset_id, region);
    ModelKey key{dataset_id, region.empty() ? std::string(kAllChannels) : region, method, factors, -1};
    if (factors < 1 || factors > raw.channels())
      throw ArgumentError("m_f must be in 1.." + std::to_string(raw.channels()) + " for region '" + key.region +
                          "', got " + std::to_string(factors));
    if (method == Method::kDynamic) key.bandwidth = bandwidth.value_or(default_smoothing(raw.samples()));
    {
      std::lock_guard lock(mutex_);
      keys_.emplace(model_id(key), key);
    }
    return compute(key);
  }

  /// A model id stays valid after eviction; the model is refit on demand.
  std::shared_ptr<const ModelEntry> model(const std::string& id) {
    ModelKey key;
    {
      std::lock_guard lock(mutex_);
      auto it = keys_.find(id);
      if (it == keys_.end()) throw LookupError("unknown model '" + id + "'");
      key = it->second;
    }
    return compute(key);
  }

  std::size_t model_computations() const { return models_.computations(); }
  std::size_t cached_models() const { return models_.size(); }
  void evict_models() { models_.clear(); }

 private:
  struct Source {
    fs::path path;
    std::shared_ptr<const Dataset> preloaded;
  };

  mutable std::mutex mutex_;
  std::map<std::string, Source> sources_;
  SingleFlight<Dataset> datasets_;
  std::map<std::string, ModelKey> keys_;
  SingleFlight<ModelEntry> models_;

  std::shared_ptr<const ModelEntry> compute(const ModelKey& key) {
    const std::string id = model_id(key);
    return models_.get(id, [&] {
      const EpochSet raw = region_data(key.dataset, key.region);
      FitOptions opts;
      if (key.method == Method::kDynamic) opts.bandwidth = key.bandwidth;
      const EpochSet data = prepare(raw, opts);
      opts.center = false;
      FactorModel model = tsfactor::fit(key.method, data, key.factors, opts);
      FactorSeries series = encode(model, data);
      VarianceAccounted va = variance_accounted(model);
      return std::make_shared<const ModelEntry>(id, key, std::move(model), data, std::move(series), std::move(va));
    });
  }
};

struct Request {
  std::string method;  // "GET" or "POST"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status{200};
  json body;

  std::string text() const { return body.dump() + "\n"; }
};

/// Invalid request field; reported with the field name.
class FieldError : public ArgumentError {
 public:
  FieldError(std::string field, const std::string& what) : ArgumentError(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

namespace detail {

inline json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const Eigen::RowVectorXd r = m.row(i);
    rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  }
  return rows;
}

inline Index parse_index_field(const std::string& field, const std::string& text) {
  Index v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FieldError(field, field + " must be an integer, got '" + text + "'");
  return v;
}

inline Index json_index(const json& body, const std::string& field, std::optional<Index> fallback = std::nullopt) {
  if (!body.contains(field) || body[field].is_null()) {
    if (fallback) return *fallback;
    throw FieldError(field, "missing field '" + field + "'");
  }
  if (!body[field].is_number_integer()) throw FieldError(field, field + " must be an integer");
  return body[field].get<Index>();
}

inline std::string json_string(const json& body, const std::string& field, std::optional<std::string> fallback = {}) {
  if (!body.contains(field) || body[field].is_null()) {
    if (fallback) return *fallback;
    throw FieldError(field, "missing field '" + field + "'");
  }
  if (!body[field].is_string()) throw FieldError(field, field + " must be a string");
  return body[field].get<std::string>();
}

inline std::size_t epoch_param(const Request& req, std::size_t num_epochs) {
  auto it = req.query.find("epoch");
  const Index e = it == req.query.end() || it->second.empty() ? 0 : parse_index_field("epoch", it->second);
  if (e < 0 || static_cast<std::size_t>(e) >= num_epochs)
    throw FieldError("epoch", "epoch must be in 0.." + std::to_string(num_epochs - 1));
  return static_cast<std::size_t>(e);
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kLookup: return 404;
    case ErrorCode::kArgument:
    case ErrorCode::kShape:
    case ErrorCode::kValidation:
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNumeric: return 422;
    case ErrorCode::kIo: return 500;
  }
  return 500;
}

inline Response error_response(int status, std::string_view code, const std::string& message,
                               const std::string& field = {}) {
  json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return {status, json{{"error", err}}};
}

}  // namespace detail

/// Transport-independent request handler for the JSON API.
class Api {
 public:
  explicit Api(std::shared_ptr<Catalog> catalog) : catalog_(std::move(catalog)) {}

  Catalog& catalog() { return *catalog_; }

  Response handle(const Request& req) const {
    try {
      return route(req);
    } catch (const FieldError& e) {
      return detail::error_response(400, to_string(e.code()), e.what(), e.field());
    } catch (const Error& e) {
      return detail::error_response(detail::http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      return detail::error_response(400, "parse_error", e.what());
    } catch (const std::exception& e) {
      return detail::error_response(500, "internal_error", e.what());
    }
  }

 private:
  Response route(const Request& req) const {
    static const std::regex kDataset(R"(^/api/datasets/([^/]+)$)");
    static const std::regex kSignals(R"(^/api/datasets/([^/]+)/signals$)");
    static const std::regex kModel(R"(^/api/models/([^/]+)$)");
    static const std::regex kModelPart(R"(^/api/models/([^/]+)/(factors|reconstruction|psd)$)");
    std::smatch m;
    const bool get = req.method == "GET", post = req.method == "POST";
    if (req.path == "/api/health") return only(get, [&] { return Response{200, {{"status", "ok"}}}; });
    if (req.path == "/api/datasets") return only(get, [&] { return list_datasets(); });
    if (req.path == "/api/fit") return only(post, [&] { return fit(parse_body(req)); });
    if (req.path == "/api/ccf") return only(post, [&] { return ccf(parse_body(req)); });
    if (std::regex_match(req.path, m, kDataset)) return only(get, [&] { return dataset(m[1]); });
    if (std::regex_match(req.path, m, kSignals)) return only(get, [&] { return signals(m[1], req); });
    if (std::regex_match(req.path, m, kModel)) return only(get, [&] { return model(m[1]); });
    if (std::regex_match(req.path, m, kModelPart)) {
      return only(get, [&] {
        const auto entry = catalog_->model(m[1]);
        if (m[2] == "factors") return factors(*entry, req);
        if (m[2] == "reconstruction") return reconstruction(*entry, req);
        return psd(*entry);
      });
    }
    return detail::error_response(404, "not_found", "no endpoint " + req.method + " " + req.path);
  }

  template <class F>
  static Response only(bool allowed, F&& f) {
    if (!allowed) return detail::error_response(405, "method_not_allowed", "method not allowed");
    return f();
  }

  static json parse_body(const Request& req) {
    json body = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!body.is_object()) throw ParseError("request body must be a JSON object");
    return body;
  }

  Response list_datasets() const {
    json out = json::array();
    for (const auto& id : catalog_->dataset_ids()) out.push_back({{"id", id}});
    return {200, out};
  }

  Response dataset(const std::string& id) const {
    const auto ds = catalog_->dataset(id);
    const EpochSet& es = ds->data;
    json positions = nullptr;
    if (es.channel_positions()) {
      positions = json::array();
      for (const auto& p : *es.channel_positions()) positions.push_back({p.x, p.y});
    }
    json regions = json::array();
    for (const auto& r : ds->regions.regions()) {
      json labels = json::array();
      for (Index c : r.channels) labels.push_back(es.channel_labels()[static_cast<std::size_t>(c)]);
      regions.push_back({{"name", r.name}, {"channels", labels}});
    }
    return {200,
            {{"id", id},
             {"epochs", es.num_epochs()},
             {"channels", es.channels()},
             {"samples", es.samples()},
             {"sampling_rate", es.sampling_rate()},
             {"labels", es.channel_labels()},
             {"positions", positions},
             {"regions", regions}}};
  }

  Response signals(const std::string& id, const Request& req) const {
    auto q = [&](const char* k) {
      auto it = req.query.find(k);
      return it == req.query.end() ? std::string() : it->second;
    };
    const EpochSet es = catalog_->region_data(id, q("region"));
    const std::size_t e = detail::epoch_param(req, es.num_epochs());
    std::vector<Index> rows;
    const std::string channels = q("channels");
    if (channels.empty()) {
      for (Index i = 0; i < es.channels(); ++i) rows.push_back(i);
    } else {
      std::size_t start = 0;
      while (start <= channels.size()) {
        const std::size_t comma = std::min(channels.find(',', start), channels.size());
        const std::string label = channels.substr(start, comma - start);
        const auto idx = es.channel_index(label);
        if (!idx) throw FieldError("channels", "unknown channel '" + label + "'");
        rows.push_back(*idx);
        start = comma + 1;
      }
    }
    std::vector<std::string> labels;
    for (Index r : rows) labels.push_back(es.channel_labels()[static_cast<std::size_t>(r)]);
    return {200,
            {{"dataset", id},
             {"epoch", e},
             {"sampling_rate", es.sampling_rate()},
             {"labels", labels},
             {"values", detail::matrix_rows(es.epoch(e)(rows, Eigen::all))}}};
  }

  Response fit(const json& body) const {
    const std::string dataset = detail::json_string(body, "dataset");
    const std::string region = detail::json_string(body, "region", std::string(kAllChannels));
    Method method;
    try {
      method = parse_method(detail::json_string(body, "method"));
    } catch (const ArgumentError& e) {
      if (dynamic_cast<const FieldError*>(&e)) throw;
      throw FieldError("method", e.what());
    }
    const Index factors = detail::json_index(body, "m_f");
    std::optional<Index> bandwidth;
    if (body.contains("m_bw") && !body["m_bw"].is_null()) bandwidth = detail::json_index(body, "m_bw");
    std::shared_ptr<const ModelEntry> entry;
    try {
      entry = catalog_->fit(dataset, region, method, factors, bandwidth);
    } catch (const ArgumentError& e) {
      const std::string what = e.what();
      if (what.rfind("m_f", 0) == 0) throw FieldError("m_f", what);
      if (what.find("bandwidth") != std::string::npos) throw FieldError("m_bw", what);
      throw;
    }
    json out = summary(*entry);
    out["variance_accounted"] = entry->variance.cumulative;
    return {200, out};
  }

  Response model(const std::string& id) const { return {200, to_json(catalog_->model(id)->model)}; }

  Response factors(const ModelEntry& entry, const Request& req) const {
    const std::size_t e = detail::epoch_param(req, entry.factors.num_epochs());
    json out = summary(entry);
    out["epoch"] = e;
    out["sampling_rate"] = entry.data.sampling_rate();
    out["values"] = detail::matrix_rows(entry.factors.epoch(e));
    return {200, out};
  }

  Response reconstruction(const ModelEntry& entry, const Request& req) const {
    const std::size_t e = detail::epoch_param(req, entry.factors.num_epochs());
    const FactorSeries one({entry.factors.epoch(e)}, entry.factors.sampling_rate());
    const Eigen::MatrixXd rec = decode(entry.model, one).epoch(0);
    json out = summary(entry);
    out["epoch"] = e;
    out["sampling_rate"] = entry.data.sampling_rate();
    out["labels"] = entry.data.channel_labels();
    out["original"] = detail::matrix_rows(entry.data.epoch(e));
    out["reconstructed"] = detail::matrix_rows(rec);
    out["residual"] = detail::matrix_rows(entry.data.epoch(e) - rec);
    return {200, out};
  }

  Response psd(const ModelEntry& entry) const {
    const FactorPsd& p = entry.psd();
    json out = summary(entry);
    out["frequencies_hz"] = p.frequencies_hz;
    out["density"] = p.density;
    return {200, out};
  }

  Response ccf(const json& body) const {
    const auto a = catalog_->model(detail::json_string(body, "model_a"));
    const auto b = catalog_->model(detail::json_string(body, "model_b"));
    const Index fa = detail::json_index(body, "factor_a"), fb = detail::json_index(body, "factor_b");
    const Index lag = detail::json_index(body, "max_lag");
    if (fa < 1 || fa > a->factors.factors())
      throw FieldError("factor_a", "factor_a must be in 1.." + std::to_string(a->factors.factors()));
    if (fb < 1 || fb > b->factors.factors())
      throw FieldError("factor_b", "factor_b must be in 1.." + std::to_string(b->factors.factors()));
    if (lag < 0 || lag >= a->factors.samples())
      throw FieldError("max_lag", "max_lag must be in 0.." + std::to_string(a->factors.samples() - 1));
    const CrossCorrelation c = cross_correlation(a->factors, fa - 1, b->factors, fb - 1, lag);
    return {200,
            {{"model_a", a->id},
             {"model_b", b->id},
             {"factor_a", fa},
             {"factor_b", fb},
             {"lags", c.lags()},
             {"values", c.values},
             {"warnings", c.warnings}}};
  }

  static json summary(const ModelEntry& entry) {
    const ModelKey& k = entry.key;
    return {{"model", entry.id},
            {"dataset", k.dataset},
            {"region", k.region},
            {"method", to_string(k.method)},
            {"m_f", k.factors},
            {"m_bw", k.method == Method::kDynamic ? json(k.bandwidth) : json(nullptr)},
            {"n", entry.data.channels()},
            {"T", entry.data.samples()}};
  }

  std::shared_ptr<Catalog> catalog_;
};

/// Routes /api/* to `api`; optionally serves static files from `ui_dir` at /.
inline void install_routes(httplib::Server& server, const Api& api, const std::optional<fs::path>& ui_dir = {}) {
  auto handler = [&api](const httplib::Request& hreq, httplib::Response& hres) {
    Request req{hreq.method, hreq.path, {}, hreq.body};
    for (const auto& [k, v] : hreq.params) req.query.emplace(k, v);
    const Response res = api.handle(req);
    hres.status = res.status;
    hres.set_content(res.text(), "application/json");
  };
  server.Get(R"(/api/.*)", handler);
  server.Post(R"(/api/.*)", handler);
  if (ui_dir && !server.set_mount_point("/", ui_dir->string()))
    throw IoError("cannot serve UI directory " + ui_dir->string());
}

/// Blocks until the server stops. Returns false if binding fails.
inline bool serve(const Api& api, const std::string& host = "127.0.0.1", int port = 8080,
                  const std::optional<fs::path>& ui_dir = {}) {
  httplib::Server server;
  install_routes(server, api, ui_dir);
  return server.listen(host, port);
}

}  // namespace tsfactor
