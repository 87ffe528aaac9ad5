#pragma once

#include "confmc/matrix.hpp"

namespace confmc {

struct ThinSvd {
  Matrix u;                // m x k, orthonormal columns
  Vector singular_values;  // k, descending, nonnegative
  Matrix v;                // n x k, orthonormal columns

  Matrix reconstruct() const;
};

/// Leading-k singular triplets of `a`. Signs are fixed so that the largest
/// magnitude entry of each left singular vector is positive.
ThinSvd thin_svd(const Matrix& a, Index k);

/// SVD of left * right^T without forming the product (QR of both factors,
/// then an r x r SVD). Equivalent to thin_svd(left * right^T, r).
ThinSvd factor_svd(const Matrix& left, const Matrix& right);

double nuclear_norm(const Matrix& a);

}  // namespace confmc
