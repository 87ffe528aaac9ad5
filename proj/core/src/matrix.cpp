#include "confmc/matrix.hpp"

#include "confmc/error.hpp"

namespace confmc {

Index count(const Mask& mask) { return mask.count(); }

std::vector<Cell> cells_of(const Mask& mask) {
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(mask.count()));
  for (Index i = 0; i < mask.rows(); ++i)
    for (Index j = 0; j < mask.cols(); ++j)
      if (mask(i, j)) cells.push_back({i, j});
  return cells;
}

ObservedMatrix::ObservedMatrix(Matrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols())
    throw ContractViolation("ObservedMatrix: values and mask dimensions differ");
  if (values_.rows() == 0 || values_.cols() == 0)
    throw ContractViolation("ObservedMatrix: dimensions must be positive");
  values_ = mask_.select(values_, 0.0);
  observed_ = mask_.count();
}

ObservedMatrix ObservedMatrix::fully_observed(Matrix values) {
  Mask all = Mask::Constant(values.rows(), values.cols(), true);
  return ObservedMatrix(std::move(values), std::move(all));
}

ObservedMatrix ObservedMatrix::restrict_to(const Mask& sub) const {
  if (sub.rows() != rows() || sub.cols() != cols())
    throw ContractViolation("restrict_to: mask dimensions differ");
  if ((sub && !mask_).any()) throw ContractViolation("restrict_to: mask is not a subset of the observed set");
  return ObservedMatrix(values_, sub);
}

ObservedMatrix ObservedMatrix::augmented(Cell cell, double value) const {
  if (cell.row < 0 || cell.row >= rows() || cell.col < 0 || cell.col >= cols())
    throw ContractViolation("augmented: location out of range");
  if (mask_(cell.row, cell.col)) throw ContractViolation("augmented: location is already observed");
  Matrix values = values_;
  Mask mask = mask_;
  values(cell.row, cell.col) = value;
  mask(cell.row, cell.col) = true;
  return ObservedMatrix(std::move(values), std::move(mask));
}

ObservedMatrix observe(const Matrix& full, const Matrix& probabilities, RandomSource& rng) {
  if (full.rows() != probabilities.rows() || full.cols() != probabilities.cols())
    throw ContractViolation("observe: matrix and probability dimensions differ");
  if ((probabilities.array() < 0.0).any() || (probabilities.array() > 1.0).any() ||
      probabilities.hasNaN())
    throw ContractViolation("observe: probabilities must lie in [0, 1]");
  Mask mask(full.rows(), full.cols());
  for (Index i = 0; i < full.rows(); ++i)
    for (Index j = 0; j < full.cols(); ++j) mask(i, j) = rng.bernoulli(probabilities(i, j));
  return ObservedMatrix(full, std::move(mask));
}

MaskSplit split_observed(const ObservedMatrix& obs, double q, RandomSource& rng) {
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("split_observed: q must lie in (0, 1)");
  MaskSplit split{Mask::Constant(obs.rows(), obs.cols(), false),
                  Mask::Constant(obs.rows(), obs.cols(), false), q};
  for (Index i = 0; i < obs.rows(); ++i) {
    for (Index j = 0; j < obs.cols(); ++j) {
      if (!obs.observed(i, j)) continue;
      if (rng.bernoulli(q))
        split.train(i, j) = true;
      else
        split.calibration(i, j) = true;
    }
  }
  return split;
}

}  // namespace confmc
