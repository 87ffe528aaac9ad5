#include "confmc/svd.hpp"

#include <string>

#include <Eigen/SVD>

#include "confmc/error.hpp"

namespace confmc {
namespace {

using ColMatrix = Eigen::MatrixXd;

void fix_signs(Matrix& u, Matrix& v) {
  for (Index l = 0; l < u.cols(); ++l) {
    Index arg = 0;
    u.col(l).cwiseAbs().maxCoeff(&arg);
    if (u(arg, l) < 0.0) {
      u.col(l) = -u.col(l);
      v.col(l) = -v.col(l);
    }
  }
}

}  // namespace

Matrix ThinSvd::reconstruct() const { return u * singular_values.asDiagonal() * v.transpose(); }

ThinSvd thin_svd(const Matrix& a, Index k) {
  const Index kmax = std::min(a.rows(), a.cols());
  if (k < 1 || k > kmax)
    throw ContractViolation("thin_svd: rank " + std::to_string(k) + " outside [1, " +
                            std::to_string(kmax) + "]");
  const ColMatrix dense = a;
  Eigen::BDCSVD<ColMatrix> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("thin_svd: decomposition failed");
  ThinSvd out{svd.matrixU().leftCols(k), svd.singularValues().head(k), svd.matrixV().leftCols(k)};
  fix_signs(out.u, out.v);
  return out;
}

ThinSvd factor_svd(const Matrix& left, const Matrix& right) {
  if (left.cols() != right.cols() || left.cols() < 1)
    throw ContractViolation("factor_svd: factor ranks differ or are zero");
  const Index r = left.cols();
  if (r > left.rows() || r > right.rows())
    throw ContractViolation("factor_svd: rank exceeds a factor's row count");
  const ColMatrix l = left;
  const ColMatrix rt = right;
  Eigen::HouseholderQR<ColMatrix> ql(l);
  Eigen::HouseholderQR<ColMatrix> qr(rt);
  const ColMatrix rl = ql.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const ColMatrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const ColMatrix core = rl * rr.transpose();
  Eigen::JacobiSVD<ColMatrix> small(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ColMatrix qlt = ql.householderQ() * ColMatrix::Identity(left.rows(), r);
  const ColMatrix qrt = qr.householderQ() * ColMatrix::Identity(right.rows(), r);
  ThinSvd out{qlt * small.matrixU(), small.singularValues(), qrt * small.matrixV()};
  fix_signs(out.u, out.v);
  return out;
}

double nuclear_norm(const Matrix& a) {
  const ColMatrix dense = a;
  Eigen::BDCSVD<ColMatrix> svd(dense);
  return svd.singularValues().sum();
}

}  // namespace confmc
