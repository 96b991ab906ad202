#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tsfactor/epoch_set.hpp"
#include "tsfactor/errors.hpp"

namespace tsfactor {

enum class SimKind {
  kIidGaussian,      // z(t) ~ N(0, I_n), iid over t
  kLowRankWhite,     // z(t) = M u(t), M n x rank orthonormal, u(t) ~ N(0, I_rank)
  kArLatent,         // z(t) = b f(t) + noise, f(t) = phi f(t-1) + e(t)
  kShiftedClusters,  // kArLatent with circular per-channel-range shifts
  kCoupledRegions,   // two collinear regions sharing a delayed oscillatory source
};

enum class LoadingPolicy {
  kRandom,   // seeded Gaussian direction, unit norm, scaled by sqrt(n)
  kUniform,  // every channel loads 1
};

/// z_i(t) <- z_i(t + shift) (circular) for channels first..last (0-based, inclusive).
struct ChannelShift {
  Index first{0};
  Index last{0};
  Index shift{0};
  bool operator==(const ChannelShift&) const = default;
};

struct SimSpec {
  SimKind kind = SimKind::kIidGaussian;
  Index channels = 20;
  Index length = 1000;
  std::uint64_t seed = 0;
  double sampling_rate = 1000.0;
  Index rank = 2;
  double phi = 0.9;
  double noise_std = 1.0;
  LoadingPolicy loading = LoadingPolicy::kRandom;
  std::vector<ChannelShift> shifts;
  // kCoupledRegions
  Index coupling_lag = 5;
  double noise_fraction = 0.05;
  double oscillation_hz = 10.0;

  bool operator==(const SimSpec&) const = default;

  void validate() const {
    if (channels < 1) throw ArgumentError("SimSpec: n must be at least 1");
    if (length < 2) throw ArgumentError("SimSpec: T must be at least 2");
    if (!(sampling_rate > 0.0)) throw ArgumentError("SimSpec: sampling_rate must be positive");
    if (kind == SimKind::kLowRankWhite && (rank < 1 || rank > channels))
      throw ArgumentError("SimSpec: rank must lie in 1..n");
    if ((kind == SimKind::kArLatent || kind == SimKind::kShiftedClusters) && !(std::abs(phi) < 1.0))
      throw ArgumentError("SimSpec: |phi| must be below 1 for a stationary latent");
    if (!(noise_std >= 0.0)) throw ArgumentError("SimSpec: noise_std must be non-negative");
    for (const auto& s : shifts)
      if (s.first < 0 || s.last < s.first || s.last >= channels)
        throw ArgumentError("SimSpec: shift channel range " + std::to_string(s.first + 1) + ".." +
                            std::to_string(s.last + 1) + " is outside 1..n");
    if (kind == SimKind::kCoupledRegions) {
      if (channels < 4) throw ArgumentError("SimSpec: coupled-regions needs at least 4 channels");
      if (coupling_lag < 0 || coupling_lag >= length) throw ArgumentError("SimSpec: coupling_lag must lie in 0..T-1");
      if (!(noise_fraction >= 0.0 && noise_fraction < 1.0))
        throw ArgumentError("SimSpec: noise_fraction must lie in [0, 1)");
      if (!(oscillation_hz > 0.0 && oscillation_hz < sampling_rate / 2))
        throw ArgumentError("SimSpec: oscillation_hz must lie below the Nyquist frequency");
    }
  }
};

inline std::string_view to_string(SimKind k) {
  switch (k) {
    case SimKind::kIidGaussian: return "iid-gaussian";
    case SimKind::kLowRankWhite: return "lowrank-white";
    case SimKind::kArLatent: return "ar-latent";
    case SimKind::kShiftedClusters: return "shifted-clusters";
    case SimKind::kCoupledRegions: return "coupled-regions";
  }
  return "";
}

inline SimKind parse_sim_kind(std::string_view s) {
  for (SimKind k : {SimKind::kIidGaussian, SimKind::kLowRankWhite, SimKind::kArLatent, SimKind::kShiftedClusters,
                    SimKind::kCoupledRegions})
    if (to_string(k) == s) return k;
  throw ArgumentError("unknown simulation kind '" + std::string(s) + "'");
}

inline std::string_view to_string(LoadingPolicy p) { return p == LoadingPolicy::kRandom ? "random" : "uniform"; }

inline LoadingPolicy parse_loading_policy(std::string_view s) {
  if (s == "random") return LoadingPolicy::kRandom;
  if (s == "uniform") return LoadingPolicy::kUniform;
  throw ArgumentError("unknown loading policy '" + std::string(s) + "'");
}

namespace detail {

constexpr std::uint64_t kStructureStream = 0xffffffffffffffffULL;
constexpr Index kBurnIn = 500;

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t epoch) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(epoch), hi(epoch)};
  return std::mt19937_64(seq);
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Eigen::VectorXd unit_direction(std::mt19937_64& rng, Index n) {
  Eigen::VectorXd v = gaussian_matrix(rng, n, 1).col(0);
  return v / v.norm();
}

// AR(1) with unit innovations; returns `length` samples after the burn-in.
inline Eigen::VectorXd ar1(std::mt19937_64& rng, double phi, Index length) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(length);
  double f = 0.0;
  for (Index t = -kBurnIn; t < length; ++t) {
    f = phi * f + normal(rng);
    if (t >= 0) out(t) = f;
  }
  return out;
}

// AR(2) resonator x(t) = 2 r cos(w) x(t-1) - r^2 x(t-2) + e(t), scaled to unit variance.
inline Eigen::VectorXd resonator(std::mt19937_64& rng, double radius, double omega, Index length) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a1 = 2.0 * radius * std::cos(omega), a2 = -radius * radius;
  const double variance = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
  Eigen::VectorXd out(length);
  double x1 = 0.0, x2 = 0.0;
  for (Index t = -kBurnIn; t < length; ++t) {
    const double x = a1 * x1 + a2 * x2 + normal(rng);
    x2 = x1;
    x1 = x;
    if (t >= 0) out(t) = x;
  }
  return out / std::sqrt(variance);
}

inline void circular_shift_rows(Eigen::MatrixXd& z, const ChannelShift& s) {
  const Index T = z.cols();
  const Index offset = ((s.shift % T) + T) % T;
  for (Index i = s.first; i <= s.last; ++i) {
    Eigen::RowVectorXd row = z.row(i);
    for (Index t = 0; t < T; ++t) z(i, t) = row((t + offset) % T);
  }
}

// Parameters drawn once per spec and shared by every epoch and stream.
struct SimStructure {
  Eigen::MatrixXd mixing;   // kLowRankWhite: n x rank orthonormal
  Eigen::VectorXd loading;  // kArLatent / kShiftedClusters
  Eigen::MatrixXd region_a;  // kCoupledRegions: n_a x 2
  Eigen::MatrixXd region_b;  // kCoupledRegions: n_b x 2
  double region_noise_std{0.0};
};

inline Index coupled_region_split(const SimSpec& spec) { return (spec.channels + 1) / 2; }

inline SimStructure draw_structure(const SimSpec& spec) {
  SimStructure s;
  auto rng = substream(spec.seed, kStructureStream, 0);
  const Index n = spec.channels;
  switch (spec.kind) {
    case SimKind::kIidGaussian: break;
    case SimKind::kLowRankWhite: {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rng, n, spec.rank));
      s.mixing = qr.householderQ() * Eigen::MatrixXd::Identity(n, spec.rank);
      break;
    }
    case SimKind::kArLatent:
    case SimKind::kShiftedClusters:
      s.loading = spec.loading == LoadingPolicy::kUniform ? Eigen::VectorXd::Ones(n)
                                                          : Eigen::VectorXd(unit_direction(rng, n) *
                                                                            std::sqrt(static_cast<double>(n)));
      break;
    case SimKind::kCoupledRegions: {
      const Index na = coupled_region_split(spec), nb = n - na;
      // Source 1 (oscillatory, shared) carries twice the amplitude of source 2.
      s.region_a.resize(na, 2);
      s.region_b.resize(nb, 2);
      s.region_a.col(0) = 2.0 * unit_direction(rng, na) * std::sqrt(static_cast<double>(na));
      s.region_a.col(1) = unit_direction(rng, na) * std::sqrt(static_cast<double>(na));
      s.region_b.col(0) = 2.0 * unit_direction(rng, nb) * std::sqrt(static_cast<double>(nb));
      s.region_b.col(1) = unit_direction(rng, nb) * std::sqrt(static_cast<double>(nb));
      // Mean per-channel signal variance is 5 in both regions.
      s.region_noise_std = std::sqrt(spec.noise_fraction / (1.0 - spec.noise_fraction) * 5.0);
      break;
    }
  }
  return s;
}

inline Eigen::MatrixXd generate_epoch(const SimSpec& spec, const SimStructure& s, std::mt19937_64& rng) {
  const Index n = spec.channels, T = spec.length;
  switch (spec.kind) {
    case SimKind::kIidGaussian: return gaussian_matrix(rng, n, T);
    case SimKind::kLowRankWhite: return s.mixing * gaussian_matrix(rng, spec.rank, T);
    case SimKind::kArLatent:
    case SimKind::kShiftedClusters: {
      const Eigen::VectorXd f = ar1(rng, spec.phi, T);
      Eigen::MatrixXd z = s.loading * f.transpose() + spec.noise_std * gaussian_matrix(rng, n, T);
      if (spec.kind == SimKind::kShiftedClusters)
        for (const auto& shift : spec.shifts) circular_shift_rows(z, shift);
      return z;
    }
    case SimKind::kCoupledRegions: {
      const Index na = s.region_a.rows(), nb = s.region_b.rows(), lag = spec.coupling_lag;
      const double omega = 2.0 * std::numbers::pi * spec.oscillation_hz / spec.sampling_rate;
      const Eigen::VectorXd shared = resonator(rng, 0.95, omega, T + lag);
      const double slow_scale = std::sqrt(1.0 - spec.phi * spec.phi);
      const Eigen::VectorXd slow_a = ar1(rng, spec.phi, T) * slow_scale;
      const Eigen::VectorXd slow_b = ar1(rng, spec.phi, T) * slow_scale;
      Eigen::MatrixXd z(n, T);
      // Region B sees the shared source `lag` samples later than region A.
      z.topRows(na) = s.region_a.col(0) * shared.tail(T).transpose() + s.region_a.col(1) * slow_a.transpose();
      z.bottomRows(nb) = s.region_b.col(0) * shared.head(T).transpose() + s.region_b.col(1) * slow_b.transpose();
      z += s.region_noise_std * gaussian_matrix(rng, n, T);
      return z;
    }
  }
  throw ArgumentError("unhandled simulation kind");
}

}  // namespace detail

/// Draws `epochs` epochs from substream `stream`. Each epoch has its own RNG
/// seeded from (seed, stream, epoch index), so the output does not depend on
/// generation order.
inline EpochSet generate(const SimSpec& spec, std::size_t epochs, std::uint64_t stream = 0) {
  spec.validate();
  if (epochs < 1) throw ArgumentError("generate: need at least one epoch");
  const detail::SimStructure structure = detail::draw_structure(spec);
  std::vector<Eigen::MatrixXd> data;
  data.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    auto rng = detail::substream(spec.seed, stream, e);
    data.push_back(detail::generate_epoch(spec, structure, rng));
  }
  return EpochSet(std::move(data), spec.sampling_rate, detail::default_labels(spec.channels, "ch"));
}

/// Regions implied by a spec: "A"/"B" for coupled regions, otherwise one
/// region "all" covering every channel.
inline RegionMap generated_regions(const SimSpec& spec) {
  std::vector<Region> regions;
  if (spec.kind == SimKind::kCoupledRegions) {
    const Index na = detail::coupled_region_split(spec);
    Region a{"A", {}}, b{"B", {}};
    for (Index i = 0; i < spec.channels; ++i) (i < na ? a : b).channels.push_back(i);
    regions = {a, b};
  } else {
    Region all{"all", {}};
    for (Index i = 0; i < spec.channels; ++i) all.channels.push_back(i);
    regions = {all};
  }
  return RegionMap(std::move(regions), spec.channels);
}

/// Benchmark designs: "iid" (n=20), "lowrank" (rank 2), "ar" (phi=0.9),
/// "shift2" (channels 1-10 shifted by 40), "shift3" (1-6 by 40, 7-12 by 80),
/// "coupled" (two 16-channel regions at 250 Hz, region B lagging by 5 samples).
/// The shifted designs use uniform loadings so the clusters carry equal power.
inline SimSpec preset(std::string_view name, std::uint64_t seed = 0) {
  SimSpec s;
  s.seed = seed;
  if (name == "iid") {
    s.kind = SimKind::kIidGaussian;
  } else if (name == "lowrank") {
    s.kind = SimKind::kLowRankWhite;
    s.rank = 2;
  } else if (name == "ar") {
    s.kind = SimKind::kArLatent;
  } else if (name == "shift2") {
    s.kind = SimKind::kShiftedClusters;
    s.loading = LoadingPolicy::kUniform;
    s.shifts = {{0, 9, 40}};
  } else if (name == "shift3") {
    s.kind = SimKind::kShiftedClusters;
    s.loading = LoadingPolicy::kUniform;
    s.shifts = {{0, 5, 40}, {6, 11, 80}};
  } else if (name == "coupled") {
    s.kind = SimKind::kCoupledRegions;
    s.channels = 32;
    s.sampling_rate = 250.0;
  } else {
    throw ArgumentError("unknown preset '" + std::string(name) + "' (iid, lowrank, ar, shift2, shift3, coupled)");
  }
  return s;
}

}  // namespace tsfactor
