#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "confmc/matrix.hpp"

namespace confmc {

enum class PropensityKind { homogeneous, logistic_rowcol, one_bit, oracle };

std::string_view to_string(PropensityKind kind);

inline constexpr double kDefaultClipEps = 1e-3;

/// Entrywise observation probabilities, clipped into [eps, 1 - eps].
class PropensityModel {
 public:
  PropensityModel(const Matrix& probabilities, PropensityKind kind,
                  double clip_eps = kDefaultClipEps);

  const Matrix& probabilities() const noexcept { return p_hat_; }
  double clip_eps() const noexcept { return clip_eps_; }
  PropensityKind kind() const noexcept { return kind_; }
  Index rows() const noexcept { return p_hat_.rows(); }
  Index cols() const noexcept { return p_hat_.cols(); }

 private:
  Matrix p_hat_;
  double clip_eps_;
  PropensityKind kind_;
};

/// h_ij = (1 - p_ij) / p_ij on the clipped probabilities.
Matrix odds(const PropensityModel& model);

/// Same formula on raw probabilities, which must lie in (0, 1).
Matrix odds_from_probabilities(const Matrix& probabilities);

/// p_hat = |train| / (d1 d2 q), constant. q may be 1 when the whole observed
/// set is used as training data.
PropensityModel fit_homogeneous(const Mask& train, double q, double clip_eps = kDefaultClipEps);
PropensityModel fit_homogeneous(const MaskSplit& split, double clip_eps = kDefaultClipEps);

// ---------------------------------------------------------------------------
// Row/column logistic model: logit(p_ij) = u_i + v_j with sum(u) = 0.

struct LogisticRowColParams {
  Vector u;
  Vector v;
};

struct LogisticGradient {
  Vector u;
  Vector v;
};

/// sum_ij { -log(1 + e^{-u_i - v_j}) + 1[(i,j) not in train] log(1 - q + e^{-u_i - v_j}) }
double logistic_loglik(const LogisticRowColParams& params, const Mask& train, double q);
LogisticGradient logistic_gradient(const LogisticRowColParams& params, const Mask& train, double q);

struct LogisticOptions {
  int max_iters = 500;
  /// Stationarity tolerance on the infinity norm of the projected gradient.
  double tolerance = 1e-6;
  double clip_eps = kDefaultClipEps;
};

struct LogisticFit {
  LogisticRowColParams params;
  PropensityModel model;
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Maximum likelihood by alternating Fisher-scaled ascent steps on u and v
/// with Armijo backtracking; u is re-centered (and v shifted to compensate)
/// after every step. Non-convergence is reported through `converged`.
LogisticFit fit_logistic_rowcol(const Mask& train, double q, const LogisticOptions& options = {});

// ---------------------------------------------------------------------------
// One-bit model: logit(p_ij) = phi(A_ij), A low rank and bounded.

struct LinkFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static LinkFunction identity();
};

struct OneBitConfig {
  LinkFunction link = LinkFunction::identity();
  double tau = 3.0;
  Index k_star = 1;
  /// Initial entrywise ascent step (the inverse of the 1/4 curvature bound);
  /// halved on any non-ascent.
  double step = 4.0;
  int iters = 100;
  int projection_sweeps = 2;
  /// Stop when the relative objective gain falls below this.
  double tolerance = 1e-9;
  double clip_eps = kDefaultClipEps;

  void validate() const;
};

/// sum_{train} log psi(B_ij) + sum_{not train} log(1 - psi(B_ij)),
/// psi(t) = q / (1 + e^{-phi(t)}).
double onebit_loglik(const Matrix& b, const Mask& train, double q, const LinkFunction& link);
Matrix onebit_gradient(const Matrix& b, const Mask& train, double q, const LinkFunction& link);

struct OneBitFit {
  Matrix a_hat;
  PropensityModel model;
  /// Objective at every accepted iterate, starting from the initializer.
  std::vector<double> objective;
  int iterations = 0;
  int halvings = 0;
};

/// Projected gradient ascent on the one-bit likelihood over
/// { |B|_* <= tau sqrt(k* d1 d2) } intersected with { |B|_inf <= tau }.
OneBitFit fit_onebit(const Mask& train, double q, const OneBitConfig& config = {});

/// Euclidean projection of a nonnegative vector onto { x >= 0, sum x <= radius }.
Vector project_l1_ball_nonneg(const Vector& values, double radius);

/// Projection onto the nuclear-norm ball of the given radius.
Matrix project_nuclear_ball(const Matrix& b, double radius);

/// Alternating projections between the nuclear ball and the infinity-norm
/// box. The result always satisfies both constraints: after the sweeps a
/// final rescale restores the nuclear bound if the last clamp broke it.
Matrix project_nuclear_infty(const Matrix& b, double radius, double tau, int sweeps = 2);

}  // namespace confmc
