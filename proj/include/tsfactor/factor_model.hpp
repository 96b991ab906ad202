#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "tsfactor/dynamic_pca.hpp"
#include "tsfactor/instant_pca.hpp"

namespace tsfactor {

enum class Method { kInstant, kDynamic };

inline std::string_view to_string(Method m) { return m == Method::kInstant ? "instant" : "dynamic"; }

inline Method parse_method(std::string_view s) {
  if (s == "instant") return Method::kInstant;
  if (s == "dynamic") return Method::kDynamic;
  throw ArgumentError("unknown method '" + std::string(s) + "' (expected instant or dynamic)");
}

using FactorModel = std::variant<InstantFactorModel, DynamicFactorModel>;

inline Method method_of(const FactorModel& model) {
  return std::holds_alternative<InstantFactorModel>(model) ? Method::kInstant : Method::kDynamic;
}

inline Index factors_of(const FactorModel& model) {
  return std::visit([](const auto& m) { return m.factors(); }, model);
}

inline Index channels_of(const FactorModel& model) {
  return std::visit([](const auto& m) { return m.channels(); }, model);
}

inline FactorModel fit(Method method, const EpochSet& es, Index factors, const FitOptions& opts = {}) {
  if (method == Method::kInstant) return fit_instant(es, factors, opts);
  return fit_dynamic(es, factors, opts);
}

inline FactorSeries encode(const FactorModel& model, const EpochSet& es) {
  if (const auto* m = std::get_if<InstantFactorModel>(&model)) return encode_instant(*m, es);
  return encode_dynamic(std::get<DynamicFactorModel>(model), es);
}

inline EpochSet decode(const FactorModel& model, const FactorSeries& fs, std::vector<std::string> labels = {}) {
  if (const auto* m = std::get_if<InstantFactorModel>(&model)) return decode_instant(*m, fs, std::move(labels));
  return decode_dynamic(std::get<DynamicFactorModel>(model), fs, std::move(labels));
}

/// decode(encode(es)) carrying over the metadata of `es`.
inline EpochSet reconstruct(const FactorModel& model, const EpochSet& es) {
  EpochSet z = decode(model, encode(model, es), es.channel_labels());
  return es.with_data(z.epochs());
}

}  // namespace tsfactor
