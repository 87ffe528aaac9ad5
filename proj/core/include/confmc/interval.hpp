#pragma once

#include <limits>
#include <optional>

#include "confmc/matrix.hpp"

namespace confmc {

/// Per-entry intervals [lower, upper] over `target`. Entries outside the
/// target hold NaN. An infinite threshold yields (-inf, +inf) and is counted
/// in `infinite_count`.
struct IntervalMatrix {
  Matrix lower;
  Matrix upper;
  Mask target;
  Matrix q_hat;                         // per-entry threshold, NaN off target
  std::optional<double> shared_q_hat;   // set when one threshold serves every entry
  Index infinite_count = 0;

  static IntervalMatrix empty_like(const Mask& target);

  /// Fill entry (i, j) with center +- q * scale.
  void set(Index i, Index j, double center, double q, double scale);

  bool contains(Index i, Index j, double value) const {
    return lower(i, j) <= value && value <= upper(i, j);
  }
};

}  // namespace confmc
