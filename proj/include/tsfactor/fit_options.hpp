#pragma once

#include <optional>

#include "tsfactor/epoch_set.hpp"

namespace tsfactor {

/// Options shared by the model fitting entry points.
struct FitOptions {
  bool center = true;
  CenterMode center_mode = CenterMode::kPerEpoch;
  std::optional<Index> bandwidth;  // dynamic fits only; default_smoothing(T) when unset
};

/// Applies the centering requested by `opts` (identity when disabled).
inline EpochSet prepare(const EpochSet& es, const FitOptions& opts) {
  return opts.center ? center(es, opts.center_mode) : es;
}

}  // namespace tsfactor
