#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tsfactor/errors.hpp"

namespace tsfactor {

using Index = Eigen::Index;

struct Position {
  double x{0.0};
  double y{0.0};
  bool operator==(const Position&) const = default;
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const std::string& what) {
  if (!m.allFinite()) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index t = 0; t < m.cols(); ++t)
        if (!std::isfinite(m(i, t)))
          throw ValidationError(what + ": non-finite value at row " + std::to_string(i) +
                                ", column " + std::to_string(t));
  }
}

inline std::vector<std::string> default_labels(Index n, const std::string& prefix) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i + 1));
  return labels;
}

}  // namespace detail

/// Equally shaped real multichannel epochs. Each epoch is an n x T matrix with
/// one row per channel. Immutable once built; copies share the sample buffer.
class EpochSet {
 public:
  EpochSet(std::vector<Eigen::MatrixXd> epochs, double sampling_rate,
           std::vector<std::string> channel_labels,
           std::optional<std::vector<Position>> channel_positions = std::nullopt)
      : sampling_rate_(sampling_rate),
        labels_(std::move(channel_labels)),
        positions_(std::move(channel_positions)) {
    if (epochs.empty()) throw ShapeError("EpochSet: at least one epoch is required");
    const Index n = epochs.front().rows();
    const Index T = epochs.front().cols();
    if (n < 1) throw ShapeError("EpochSet: at least one channel is required");
    if (T < 2) throw ShapeError("EpochSet: at least two samples per epoch are required");
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      if (epochs[e].rows() != n || epochs[e].cols() != T)
        throw ShapeError("EpochSet: epoch " + std::to_string(e) + " has shape " +
                         std::to_string(epochs[e].rows()) + "x" + std::to_string(epochs[e].cols()) +
                         ", expected " + std::to_string(n) + "x" + std::to_string(T));
      detail::require_finite(epochs[e], "EpochSet epoch " + std::to_string(e));
    }
    if (!(sampling_rate_ > 0.0) || !std::isfinite(sampling_rate_))
      throw ValidationError("EpochSet: sampling rate must be positive and finite");
    if (labels_.empty()) labels_ = detail::default_labels(n, "ch");
    if (static_cast<Index>(labels_.size()) != n)
      throw ShapeError("EpochSet: " + std::to_string(labels_.size()) + " labels for " +
                       std::to_string(n) + " channels");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_)
      if (!seen.insert(l).second) throw ValidationError("EpochSet: duplicate channel label '" + l + "'");
    if (positions_ && static_cast<Index>(positions_->size()) != n)
      throw ShapeError("EpochSet: " + std::to_string(positions_->size()) + " positions for " +
                       std::to_string(n) + " channels");
    data_ = std::make_shared<const std::vector<Eigen::MatrixXd>>(std::move(epochs));
  }

  std::size_t num_epochs() const { return data_->size(); }
  Index channels() const { return data_->front().rows(); }
  Index samples() const { return data_->front().cols(); }
  double sampling_rate() const { return sampling_rate_; }

  const Eigen::MatrixXd& epoch(std::size_t e) const { return data_->at(e); }
  const std::vector<Eigen::MatrixXd>& epochs() const { return *data_; }
  const std::vector<std::string>& channel_labels() const { return labels_; }
  const std::optional<std::vector<Position>>& channel_positions() const { return positions_; }

  std::optional<Index> channel_index(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return static_cast<Index>(i);
    return std::nullopt;
  }

  /// Same metadata, new sample buffer (must keep the shape).
  EpochSet with_data(std::vector<Eigen::MatrixXd> epochs) const {
    return EpochSet(std::move(epochs), sampling_rate_, labels_, positions_);
  }

 private:
  std::shared_ptr<const std::vector<Eigen::MatrixXd>> data_;
  double sampling_rate_;
  std::vector<std::string> labels_;
  std::optional<std::vector<Position>> positions_;
};

struct Region {
  std::string name;
  std::vector<Index> channels;
};

/// Named, disjoint, nonempty channel groups. Channels may stay unassigned.
class RegionMap {
 public:
  RegionMap() = default;

  RegionMap(std::vector<Region> regions, Index num_channels) : regions_(std::move(regions)) {
    std::set<std::string> names;
    std::map<Index, std::string> owner;
    for (const auto& r : regions_) {
      if (r.name.empty()) throw ValidationError("RegionMap: empty region name");
      if (!names.insert(r.name).second) throw ValidationError("RegionMap: duplicate region '" + r.name + "'");
      if (r.channels.empty()) throw ValidationError("RegionMap: region '" + r.name + "' has no channels");
      for (Index c : r.channels) {
        if (c < 0 || c >= num_channels)
          throw ValidationError("RegionMap: region '" + r.name + "' references channel index " +
                                std::to_string(c) + " outside 0.." + std::to_string(num_channels - 1));
        auto [it, inserted] = owner.emplace(c, r.name);
        if (!inserted)
          throw ValidationError("RegionMap: channel " + std::to_string(c) + " belongs to both '" +
                                it->second + "' and '" + r.name + "'");
      }
    }
  }

  /// Builds from region name -> channel labels, resolving labels against `labels`.
  static RegionMap from_labels(const std::vector<std::pair<std::string, std::vector<std::string>>>& groups,
                               const std::vector<std::string>& labels) {
    std::vector<Region> regions;
    for (const auto& [name, members] : groups) {
      Region r{name, {}};
      for (const auto& m : members) {
        auto it = std::find(labels.begin(), labels.end(), m);
        if (it == labels.end())
          throw LookupError("RegionMap: region '" + name + "' references unknown channel '" + m + "'");
        r.channels.push_back(static_cast<Index>(it - labels.begin()));
      }
      regions.push_back(std::move(r));
    }
    return RegionMap(std::move(regions), static_cast<Index>(labels.size()));
  }

  const std::vector<Region>& regions() const { return regions_; }
  bool empty() const { return regions_.empty(); }

  const Region& at(const std::string& name) const {
    for (const auto& r : regions_)
      if (r.name == name) return r;
    throw LookupError("unknown region '" + name + "'");
  }
  bool contains(const std::string& name) const {
    for (const auto& r : regions_)
      if (r.name == name) return true;
    return false;
  }

 private:
  std::vector<Region> regions_;
};

/// Factor time series: one m_f x T matrix per epoch.
class FactorSeries {
 public:
  FactorSeries(std::vector<Eigen::MatrixXd> values, double sampling_rate = 1.0)
      : values_(std::move(values)), sampling_rate_(sampling_rate) {
    if (values_.empty()) throw ShapeError("FactorSeries: at least one epoch is required");
    const Index m = values_.front().rows(), T = values_.front().cols();
    if (m < 1 || T < 1) throw ShapeError("FactorSeries: empty factor matrix");
    for (std::size_t e = 0; e < values_.size(); ++e) {
      if (values_[e].rows() != m || values_[e].cols() != T)
        throw ShapeError("FactorSeries: ragged epoch " + std::to_string(e));
      detail::require_finite(values_[e], "FactorSeries epoch " + std::to_string(e));
    }
  }

  std::size_t num_epochs() const { return values_.size(); }
  Index factors() const { return values_.front().rows(); }
  Index samples() const { return values_.front().cols(); }
  double sampling_rate() const { return sampling_rate_; }
  const Eigen::MatrixXd& epoch(std::size_t e) const { return values_.at(e); }
  const std::vector<Eigen::MatrixXd>& epochs() const { return values_; }

 private:
  std::vector<Eigen::MatrixXd> values_;
  double sampling_rate_;
};

/// Channels of one region, in the order listed by the region map.
inline EpochSet extract_region(const EpochSet& es, const RegionMap& rm, const std::string& region) {
  const Region& r = rm.at(region);
  for (Index c : r.channels)
    if (c >= es.channels())
      throw ShapeError("region '" + region + "' references channel " + std::to_string(c) +
                       " beyond the dataset's " + std::to_string(es.channels()) + " channels");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(es.num_epochs());
  for (const auto& ep : es.epochs()) out.emplace_back(ep(r.channels, Eigen::all));
  std::vector<std::string> labels;
  std::optional<std::vector<Position>> positions;
  if (es.channel_positions()) positions.emplace();
  for (Index c : r.channels) {
    labels.push_back(es.channel_labels()[static_cast<std::size_t>(c)]);
    if (positions) positions->push_back((*es.channel_positions())[static_cast<std::size_t>(c)]);
  }
  return EpochSet(std::move(out), es.sampling_rate(), std::move(labels), std::move(positions));
}

enum class CenterMode {
  kPerEpoch,  // subtract each epoch's own channel means
  kPooled,    // subtract channel means taken over all epochs
};

inline EpochSet center(const EpochSet& es, CenterMode mode = CenterMode::kPerEpoch) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(es.num_epochs());
  if (mode == CenterMode::kPerEpoch) {
    for (const auto& ep : es.epochs()) {
      Eigen::VectorXd mean = ep.rowwise().mean();
      out.emplace_back(ep.colwise() - mean);
    }
  } else {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(es.channels());
    for (const auto& ep : es.epochs()) mean += ep.rowwise().sum();
    mean /= static_cast<double>(es.samples()) * static_cast<double>(es.num_epochs());
    for (const auto& ep : es.epochs()) out.emplace_back(ep.colwise() - mean);
  }
  return es.with_data(std::move(out));
}

}  // namespace tsfactor
