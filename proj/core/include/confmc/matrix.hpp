#pragma once

#include <compare>
#include <vector>

#include <Eigen/Dense>

#include "confmc/random.hpp"

namespace confmc {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Cell {
  Index row = 0;
  Index col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Number of true entries.
Index count(const Mask& mask);

/// Locations of true entries in row-major order.
std::vector<Cell> cells_of(const Mask& mask);

/// A dense matrix together with its observation mask. Values outside the
/// mask are stored as zero and never read.
class ObservedMatrix {
 public:
  ObservedMatrix(Matrix values, Mask mask);

  static ObservedMatrix fully_observed(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  const Mask& mask() const noexcept { return mask_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  Index observed_count() const noexcept { return observed_; }
  bool observed(Index i, Index j) const { return mask_(i, j); }

  /// Unobserved locations, S^c.
  Mask unobserved() const { return !mask_; }

  /// Same values restricted to `sub`, which must be contained in mask().
  ObservedMatrix restrict_to(const Mask& sub) const;

  /// Copy with one extra observed entry. The location must be unobserved.
  ObservedMatrix augmented(Cell cell, double value) const;

 private:
  Matrix values_;
  Mask mask_;
  Index observed_ = 0;
};

/// Training/calibration partition of an observation mask.
struct MaskSplit {
  Mask train;
  Mask calibration;
  double split_prob = 0.5;
};

/// Draw Z_ij ~ Bern(P_ij) independently (row-major, one uniform per entry)
/// and copy the observed values.
ObservedMatrix observe(const Matrix& full, const Matrix& probabilities, RandomSource& rng);

/// Send each observed location to training with probability q, else to
/// calibration.
MaskSplit split_observed(const ObservedMatrix& obs, double q, RandomSource& rng);

}  // namespace confmc
