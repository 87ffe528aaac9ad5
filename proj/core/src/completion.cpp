#include "confmc/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>

#include "confmc/error.hpp"
#include "confmc/svd.hpp"

namespace confmc {
namespace {

using ColMatrix = Eigen::MatrixXd;
using IndexLists = std::vector<std::vector<Index>>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Ridge least-squares update of every row of `target` with `fixed` held.
// lists[i] holds the indices k of fixed rows observed together with row i;
// value(i, k) is the matching observation.
template <class ValueFn>
void solve_block(Matrix& target, const Matrix& fixed, const IndexLists& lists, double ridge,
                 const char* what, ValueFn value) {
  const Index r = target.cols();
  ColMatrix gathered;
  Vector rhs;
  for (Index i = 0; i < target.rows(); ++i) {
    const auto& idx = lists[static_cast<std::size_t>(i)];
    const Index n = static_cast<Index>(idx.size());
    if (n == 0 && ridge == 0.0)
      throw NumericalError(std::string("als_fit: singular normal equations for ") + what + " " +
                           std::to_string(i) + " (no observed entries)");
    gathered.resize(n, r);
    rhs.resize(n);
    for (Index t = 0; t < n; ++t) {
      const Index k = idx[static_cast<std::size_t>(t)];
      gathered.row(t) = fixed.row(k);
      rhs(t) = value(i, k);
    }
    ColMatrix gram = ColMatrix::Zero(r, r);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(gathered.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += ridge;
    Eigen::LLT<ColMatrix> llt(gram);
    bool singular = llt.info() != Eigen::Success;
    if (!singular && ridge == 0.0) {
      const auto diag = llt.matrixLLT().diagonal().cwiseAbs();
      singular = diag.minCoeff() <= 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    }
    if (singular)
      throw NumericalError(std::string("als_fit: singular normal equations for ") + what + " " +
                           std::to_string(i));
    target.row(i) = llt.solve(gathered.transpose() * rhs).transpose();
  }
}

}  // namespace

IntervalMatrix IntervalMatrix::empty_like(const Mask& target) {
  IntervalMatrix out;
  out.lower = Matrix::Constant(target.rows(), target.cols(), kNaN);
  out.upper = out.lower;
  out.q_hat = out.lower;
  out.target = target;
  return out;
}

void IntervalMatrix::set(Index i, Index j, double center, double q, double scale) {
  q_hat(i, j) = q;
  if (std::isinf(q)) {
    lower(i, j) = -std::numeric_limits<double>::infinity();
    upper(i, j) = std::numeric_limits<double>::infinity();
    ++infinite_count;
    return;
  }
  lower(i, j) = center - q * scale;
  upper(i, j) = center + q * scale;
}

double als_objective(const ObservedMatrix& train, const FactorModel& factors, double ridge) {
  double loss = 0.0;
  for (Index i = 0; i < train.rows(); ++i) {
    for (Index j = 0; j < train.cols(); ++j) {
      if (!train.observed(i, j)) continue;
      const double resid = train.values()(i, j) - factors.u.row(i).dot(factors.v.row(j));
      loss += resid * resid;
    }
  }
  return loss + ridge * (factors.u.squaredNorm() + factors.v.squaredNorm());
}

AlsFit als_fit(const ObservedMatrix& train, const AlsOptions& options) {
  const Index d1 = train.rows();
  const Index d2 = train.cols();
  const Index r = options.rank;
  if (r < 1 || r > std::min(d1, d2))
    throw ContractViolation("als_fit: rank " + std::to_string(r) + " out of range");
  if (train.observed_count() == 0) throw ContractViolation("als_fit: empty training set");
  if (options.ridge && *options.ridge < 0.0) throw ContractViolation("als_fit: negative ridge");

  const double fraction = static_cast<double>(train.observed_count()) / static_cast<double>(d1 * d2);
  const ThinSvd init = thin_svd(train.values() / fraction, r);
  const Vector root = init.singular_values.cwiseSqrt();

  AlsFit fit;
  fit.factors.u = init.u * root.asDiagonal();
  fit.factors.v = init.v * root.asDiagonal();
  const double sigma1 = init.singular_values(0);
  fit.ridge = options.ridge.value_or(std::max(1e-6 * sigma1 * sigma1, 1e-12));

  IndexLists by_row(static_cast<std::size_t>(d1));
  IndexLists by_col(static_cast<std::size_t>(d2));
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j)
      if (train.observed(i, j)) {
        by_row[static_cast<std::size_t>(i)].push_back(j);
        by_col[static_cast<std::size_t>(j)].push_back(i);
      }

  const Matrix& m = train.values();
  fit.objective.push_back(als_objective(train, fit.factors, fit.ridge));
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    solve_block(fit.factors.u, fit.factors.v, by_row, fit.ridge, "row",
                [&](Index i, Index j) { return m(i, j); });
    solve_block(fit.factors.v, fit.factors.u, by_col, fit.ridge, "column",
                [&](Index j, Index i) { return m(i, j); });
    const double previous = fit.objective.back();
    const double current = als_objective(train, fit.factors, fit.ridge);
    if (!std::isfinite(current)) throw NumericalError("als_fit: objective became non-finite");
    fit.objective.push_back(current);
    fit.sweeps = sweep + 1;
    if (std::abs(previous - current) <= options.tolerance * std::max(previous, 1e-300)) break;
  }
  return fit;
}

double prox_objective(const ObservedMatrix& train, const Matrix& z, double lambda) {
  const double loss = 0.5 * (train.mask().select(z - train.values(), 0.0)).squaredNorm();
  return loss + lambda * nuclear_norm(z);
}

ProxFit prox_nuclear_fit(const ObservedMatrix& train, const ProxOptions& options) {
  if (!(options.lambda > 0.0)) throw ContractViolation("prox_nuclear_fit: lambda must be positive");
  const Index kmax = std::min(train.rows(), train.cols());
  ProxFit fit;
  fit.estimate = Matrix::Zero(train.rows(), train.cols());
  fit.objective.push_back(prox_objective(train, fit.estimate, options.lambda));
  for (int it = 0; it < options.max_iters; ++it) {
    const Matrix filled = train.mask().select(train.values(), fit.estimate);
    ThinSvd svd = thin_svd(filled, kmax);
    Index keep = 0;
    for (Index l = 0; l < kmax; ++l) {
      svd.singular_values(l) = std::max(svd.singular_values(l) - options.lambda, 0.0);
      if (svd.singular_values(l) > 0.0) keep = l + 1;
    }
    Matrix next = svd.u.leftCols(keep) * svd.singular_values.head(keep).asDiagonal() *
                  svd.v.leftCols(keep).transpose();
    if (!next.allFinite()) throw NumericalError("prox_nuclear_fit: iterate became non-finite");
    const double change = (next - fit.estimate).norm() / std::max(fit.estimate.norm(), 1.0);
    fit.estimate = std::move(next);
    // Singular values are already known, so the penalty needs no second SVD.
    const double loss =
        0.5 * (train.mask().select(fit.estimate - train.values(), 0.0)).squaredNorm();
    fit.objective.push_back(loss + options.lambda * svd.singular_values.sum());
    fit.iterations = it + 1;
    if (change < options.tolerance) break;
  }
  return fit;
}

FactorModel truncate_to_rank(const Matrix& estimate, Index rank) {
  const ThinSvd svd = thin_svd(estimate, rank);
  return {svd.u * svd.singular_values.asDiagonal(), svd.v};
}

double estimate_noise(const ObservedMatrix& train, const Matrix& m_hat) {
  if (train.observed_count() == 0) throw ContractViolation("estimate_noise: empty training set");
  if (m_hat.rows() != train.rows() || m_hat.cols() != train.cols())
    throw ContractViolation("estimate_noise: dimension mismatch");
  double sum = 0.0;
  for (Index i = 0; i < train.rows(); ++i)
    for (Index j = 0; j < train.cols(); ++j)
      if (train.observed(i, j)) {
        const double resid = train.values()(i, j) - m_hat(i, j);
        sum += resid * resid;
      }
  return sum / static_cast<double>(train.observed_count());
}

LocalScale estimate_local_scale(const FactorModel& factors, double sigma2, double p_hat) {
  if (!(p_hat > 0.0 && p_hat <= 1.0))
    throw ContractViolation("estimate_local_scale: p_hat must lie in (0, 1]");
  if (!(sigma2 >= 0.0)) throw ContractViolation("estimate_local_scale: sigma2 must be nonnegative");
  const ThinSvd svd = factor_svd(factors.u, factors.v);
  const Vector row_u = svd.u.rowwise().squaredNorm();
  const Vector row_v = svd.v.rowwise().squaredNorm();
  LocalScale out;
  const double scale = sigma2 / p_hat;
  out.theta2 = scale * (row_u.replicate(1, row_v.size()) + row_v.transpose().replicate(row_u.size(), 1));
  out.s_hat = (out.theta2.array() + sigma2).sqrt().max(kScaleFloor).matrix();
  out.degenerate = sigma2 == 0.0;
  return out;
}

CompletionEstimate make_estimate(const ObservedMatrix& train, const FactorModel& factors,
                                 double p_hat, bool local_scale) {
  CompletionEstimate est;
  est.m_hat = factors.product();
  est.sigma2_hat = estimate_noise(train, est.m_hat);
  if (local_scale) {
    LocalScale scale = estimate_local_scale(factors, est.sigma2_hat, p_hat);
    est.theta2_hat = std::move(scale.theta2);
    est.s_hat = std::move(scale.s_hat);
  } else {
    est.theta2_hat = Matrix::Zero(train.rows(), train.cols());
    est.s_hat = Matrix::Ones(train.rows(), train.cols());
  }
  return est;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("normal_quantile: p must lie in (0, 1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

IntervalMatrix model_based_intervals(const Matrix& m_hat, const Matrix& s_hat, double alpha,
                                     const Mask& target) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ContractViolation("model_based_intervals: alpha must lie in (0, 1)");
  if (m_hat.rows() != target.rows() || m_hat.cols() != target.cols() ||
      s_hat.rows() != target.rows() || s_hat.cols() != target.cols())
    throw ContractViolation("model_based_intervals: dimension mismatch");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  IntervalMatrix out = IntervalMatrix::empty_like(target);
  out.shared_q_hat = z;
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      if (target(i, j)) out.set(i, j, m_hat(i, j), z, s_hat(i, j));
  return out;
}

}  // namespace confmc
