#pragma once

#include <optional>
#include <vector>

#include "confmc/interval.hpp"
#include "confmc/matrix.hpp"

namespace confmc {

/// Low-rank factors; the completed matrix is u * v^T.
struct FactorModel {
  Matrix u;  // d1 x r
  Matrix v;  // d2 x r

  Index rank() const noexcept { return u.cols(); }
  Matrix product() const { return u * v.transpose(); }
};

struct AlsOptions {
  Index rank = 1;
  int max_sweeps = 50;
  /// Stop when the relative objective change drops below this.
  double tolerance = 1e-8;
  /// Ridge penalty; when unset, 1e-6 * sigma_1^2 of the spectral initializer.
  std::optional<double> ridge;
};

struct AlsFit {
  FactorModel factors;
  double ridge = 0.0;
  /// Objective after initialization, then after every sweep.
  std::vector<double> objective;
  int sweeps = 0;
};

/// Alternating ridge least squares over the observed entries of `train`,
/// started from the rescaled zero-fill SVD.
AlsFit als_fit(const ObservedMatrix& train, const AlsOptions& options);

/// sum_{observed} (M - U V^T)^2 + ridge (|U|_F^2 + |V|_F^2)
double als_objective(const ObservedMatrix& train, const FactorModel& factors, double ridge);

struct ProxOptions {
  double lambda = 1.0;
  int max_iters = 500;
  double tolerance = 1e-7;
};

struct ProxFit {
  Matrix estimate;
  std::vector<double> objective;
  int iterations = 0;
};

/// Soft-impute: Z <- SVT_lambda(P_S(M) + P_S^c(Z)), starting from zero.
/// Each step is a unit-step proximal gradient step on
/// 1/2 |P_S(Z - M)|_F^2 + lambda |Z|_*.
ProxFit prox_nuclear_fit(const ObservedMatrix& train, const ProxOptions& options);

double prox_objective(const ObservedMatrix& train, const Matrix& z, double lambda);

/// Rank-r factors of a dense estimate (used to get local scales for cvx).
FactorModel truncate_to_rank(const Matrix& estimate, Index rank);

/// Mean squared training residual.
double estimate_noise(const ObservedMatrix& train, const Matrix& m_hat);

inline constexpr double kScaleFloor = 1e-12;

struct LocalScale {
  Matrix theta2;
  Matrix s_hat;
  /// True when sigma2 == 0 and every scale sits at the floor.
  bool degenerate = false;
};

/// theta2_ij = (sigma2 / p_hat) (|U_i|^2 + |V_j|^2) with U, V the singular
/// vectors of factors.product(); s_hat = max(sqrt(theta2 + sigma2), floor).
LocalScale estimate_local_scale(const FactorModel& factors, double sigma2, double p_hat);

struct CompletionEstimate {
  Matrix m_hat;
  Matrix s_hat;
  double sigma2_hat = 0.0;
  Matrix theta2_hat;
};

/// Assemble M-hat, sigma2-hat and local scales from a fitted base model.
/// With `local_scale` off, s_hat is identically one.
CompletionEstimate make_estimate(const ObservedMatrix& train, const FactorModel& factors,
                                 double p_hat, bool local_scale = true);

/// Standard normal quantile.
double normal_quantile(double p);

/// Model-based baseline: m_hat +- z_{1 - alpha/2} s_hat on `target`.
IntervalMatrix model_based_intervals(const Matrix& m_hat, const Matrix& s_hat, double alpha,
                                     const Mask& target);

}  // namespace confmc
