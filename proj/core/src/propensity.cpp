#include "confmc/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "confmc/error.hpp"
#include "confmc/svd.hpp"

namespace confmc {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logaddexp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// log(1 - q + e^{-eta}); q in (0, 1].
double log_one_minus_q_plus_exp(double eta, double q) {
  if (q >= 1.0) return -eta;
  return logaddexp(std::log1p(-q), -eta);
}

void check_q(double q, const char* who) {
  if (!(q > 0.0 && q <= 1.0)) throw ContractViolation(std::string(who) + ": q must lie in (0, 1]");
}

void check_mask(const Mask& train, const char* who) {
  if (train.rows() == 0 || train.cols() == 0)
    throw ContractViolation(std::string(who) + ": empty dimensions");
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

constexpr double kParamBound = 50.0;

}  // namespace

std::string_view to_string(PropensityKind kind) {
  switch (kind) {
    case PropensityKind::homogeneous: return "homogeneous";
    case PropensityKind::logistic_rowcol: return "logistic_rowcol";
    case PropensityKind::one_bit: return "one_bit";
    case PropensityKind::oracle: return "oracle";
  }
  return "unknown";
}

PropensityModel::PropensityModel(const Matrix& probabilities, PropensityKind kind, double clip_eps)
    : clip_eps_(clip_eps), kind_(kind) {
  if (!(clip_eps > 0.0 && clip_eps < 0.5))
    throw ContractViolation("PropensityModel: clip_eps must lie in (0, 0.5)");
  if (probabilities.hasNaN()) throw ContractViolation("PropensityModel: NaN probability");
  p_hat_ = probabilities.array().max(clip_eps).min(1.0 - clip_eps).matrix();
}

Matrix odds(const PropensityModel& model) {
  return ((1.0 - model.probabilities().array()) / model.probabilities().array()).matrix();
}

Matrix odds_from_probabilities(const Matrix& probabilities) {
  if ((probabilities.array() <= 0.0).any() || (probabilities.array() >= 1.0).any() ||
      probabilities.hasNaN())
    throw ContractViolation("odds_from_probabilities: probabilities must lie in (0, 1)");
  return ((1.0 - probabilities.array()) / probabilities.array()).matrix();
}

PropensityModel fit_homogeneous(const Mask& train, double q, double clip_eps) {
  check_q(q, "fit_homogeneous");
  check_mask(train, "fit_homogeneous");
  const double cells = static_cast<double>(train.rows() * train.cols());
  const double p = static_cast<double>(train.count()) / (cells * q);
  return PropensityModel(Matrix::Constant(train.rows(), train.cols(), p),
                         PropensityKind::homogeneous, clip_eps);
}

PropensityModel fit_homogeneous(const MaskSplit& split, double clip_eps) {
  return fit_homogeneous(split.train, split.split_prob, clip_eps);
}

// ---------------------------------------------------------------------------

double logistic_loglik(const LogisticRowColParams& params, const Mask& train, double q) {
  double total = 0.0;
  for (Index i = 0; i < train.rows(); ++i) {
    for (Index j = 0; j < train.cols(); ++j) {
      const double eta = params.u(i) + params.v(j);
      total -= softplus(-eta);
      if (!train(i, j)) total += log_one_minus_q_plus_exp(eta, q);
    }
  }
  return total;
}

namespace {

// d/d eta of the per-entry log-likelihood.
double logistic_entry_score(double eta, bool in_train, double q) {
  double g = sigmoid(-eta);
  if (!in_train) g -= q >= 1.0 ? 1.0 : sigmoid(-eta - std::log1p(-q));
  return g;
}

// Fisher information of the Bern(q sigmoid(eta)) indicator with respect to eta.
double logistic_entry_information(double eta, double q) {
  const double s = sigmoid(eta);
  const double one_minus = sigmoid(-eta);
  const double denom = std::max(1.0 - q * s, 1e-300);
  return q * s * one_minus * one_minus / denom;
}

}  // namespace

LogisticGradient logistic_gradient(const LogisticRowColParams& params, const Mask& train, double q) {
  LogisticGradient g{Vector::Zero(train.rows()), Vector::Zero(train.cols())};
  for (Index i = 0; i < train.rows(); ++i) {
    for (Index j = 0; j < train.cols(); ++j) {
      const double score = logistic_entry_score(params.u(i) + params.v(j), train(i, j), q);
      g.u(i) += score;
      g.v(j) += score;
    }
  }
  return g;
}

LogisticFit fit_logistic_rowcol(const Mask& train, double q, const LogisticOptions& options) {
  check_q(q, "fit_logistic_rowcol");
  check_mask(train, "fit_logistic_rowcol");
  const Index d1 = train.rows();
  const Index d2 = train.cols();
  const double rate = static_cast<double>(train.count()) / static_cast<double>(d1 * d2) / q;

  LogisticRowColParams params{Vector::Zero(d1), Vector::Constant(d2, logit(std::clamp(rate, 1e-6, 1.0 - 1e-6)))};
  double loglik = logistic_loglik(params, train, q);

  auto projected_norm = [](const LogisticGradient& g) {
    const double mean_u = g.u.mean();
    return std::max((g.u.array() - mean_u).abs().maxCoeff(), g.v.cwiseAbs().maxCoeff());
  };

  // One Armijo-backtracked step along `direction` for the block `block`.
  auto block_step = [&](Vector& block, const Vector& gradient, const Vector& direction) {
    const double slope = gradient.dot(direction);
    if (!(slope > 0.0)) return;
    const Vector start = block;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      block = (start + t * direction).cwiseMax(-kParamBound).cwiseMin(kParamBound);
      const double trial = logistic_loglik(params, train, q);
      if (std::isfinite(trial) && trial >= loglik + 1e-4 * t * slope) {
        loglik = trial;
        return;
      }
    }
    block = start;
  };

  LogisticFit fit{params, PropensityModel(Matrix::Constant(d1, d2, 0.5), PropensityKind::logistic_rowcol,
                                          options.clip_eps)};
  LogisticGradient grad = logistic_gradient(params, train, q);
  fit.gradient_norm = projected_norm(grad);
  int it = 0;
  for (; it < options.max_iters && fit.gradient_norm > options.tolerance; ++it) {
    Vector info_u = Vector::Zero(d1);
    Vector info_v = Vector::Zero(d2);
    for (Index i = 0; i < d1; ++i)
      for (Index j = 0; j < d2; ++j) {
        const double info = logistic_entry_information(params.u(i) + params.v(j), q);
        info_u(i) += info;
        info_v(j) += info;
      }
    block_step(params.u, grad.u, (grad.u.array() / info_u.array().max(1e-12)).matrix());
    grad = logistic_gradient(params, train, q);
    block_step(params.v, grad.v, (grad.v.array() / info_v.array().max(1e-12)).matrix());

    const double shift = params.u.mean();
    params.u.array() -= shift;
    params.v.array() += shift;
    loglik = logistic_loglik(params, train, q);
    grad = logistic_gradient(params, train, q);
    fit.gradient_norm = projected_norm(grad);
  }
  fit.iterations = it;
  fit.converged = fit.gradient_norm <= options.tolerance;

  Matrix p(d1, d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) p(i, j) = sigmoid(params.u(i) + params.v(j));
  fit.params = std::move(params);
  fit.model = PropensityModel(p, PropensityKind::logistic_rowcol, options.clip_eps);
  return fit;
}

// ---------------------------------------------------------------------------

LinkFunction LinkFunction::identity() {
  return {[](double t) { return t; }, [](double) { return 1.0; }};
}

void OneBitConfig::validate() const {
  if (!link.value || !link.derivative) throw ContractViolation("OneBitConfig: link function is unset");
  if (!(tau > 0.0)) throw ContractViolation("OneBitConfig: tau must be positive");
  if (k_star < 1) throw ContractViolation("OneBitConfig: k_star must be positive");
  if (!(step > 0.0)) throw ContractViolation("OneBitConfig: step must be positive");
  if (iters < 0) throw ContractViolation("OneBitConfig: iters must be nonnegative");
  if (projection_sweeps < 1) throw ContractViolation("OneBitConfig: projection_sweeps must be positive");
  constexpr int kProbes = 41;
  double previous = link.value(-tau);
  for (int k = 1; k < kProbes; ++k) {
    const double t = -tau + 2.0 * tau * k / (kProbes - 1);
    const double value = link.value(t);
    if (!(value > previous) || !(link.derivative(t) > 0.0))
      throw ContractViolation("OneBitConfig: link must be strictly increasing on [-tau, tau]");
    previous = value;
  }
}

double onebit_loglik(const Matrix& b, const Mask& train, double q, const LinkFunction& link) {
  const double log_q = std::log(q);
  double total = 0.0;
  for (Index i = 0; i < b.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      const double t = link.value(b(i, j));
      if (train(i, j))
        total += log_q - softplus(-t);
      else
        total += log_one_minus_q_plus_exp(t, q) - softplus(-t);
    }
  }
  return total;
}

Matrix onebit_gradient(const Matrix& b, const Mask& train, double q, const LinkFunction& link) {
  Matrix g(b.rows(), b.cols());
  for (Index i = 0; i < b.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      const double t = link.value(b(i, j));
      const double s = sigmoid(t);
      const double one_minus = sigmoid(-t);
      const double dt = train(i, j) ? one_minus : -q * s * one_minus / (1.0 - q * s);
      g(i, j) = dt * link.derivative(b(i, j));
    }
  }
  return g;
}

Vector project_l1_ball_nonneg(const Vector& values, double radius) {
  if (!(radius >= 0.0)) throw ContractViolation("project_l1_ball_nonneg: negative radius");
  const Vector clipped = values.cwiseMax(0.0);
  if (clipped.sum() <= radius) return clipped;
  std::vector<double> sorted(clipped.data(), clipped.data() + clipped.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  return (clipped.array() - theta).max(0.0).matrix();
}

Matrix project_nuclear_ball(const Matrix& b, double radius) {
  const Index k = std::min(b.rows(), b.cols());
  const ThinSvd svd = thin_svd(b, k);
  if (svd.singular_values.sum() <= radius) return b;
  const Vector shrunk = project_l1_ball_nonneg(svd.singular_values, radius);
  return svd.u * shrunk.asDiagonal() * svd.v.transpose();
}

Matrix project_nuclear_infty(const Matrix& b, double radius, double tau, int sweeps) {
  if (!(radius > 0.0) || !(tau > 0.0))
    throw ContractViolation("project_nuclear_infty: radius and tau must be positive");
  Matrix x = b;
  for (int s = 0; s < std::max(sweeps, 1); ++s) {
    x = project_nuclear_ball(x, radius);
    x = x.cwiseMax(-tau).cwiseMin(tau);
  }
  const double norm = nuclear_norm(x);
  if (norm > radius) x *= radius / norm;
  return x;
}

OneBitFit fit_onebit(const Mask& train, double q, const OneBitConfig& config) {
  check_q(q, "fit_onebit");
  check_mask(train, "fit_onebit");
  config.validate();
  const Index d1 = train.rows();
  const Index d2 = train.cols();
  const double radius = config.tau * std::sqrt(static_cast<double>(config.k_star * d1 * d2));

  // Constant start matching the empirical training rate.
  const double rate = static_cast<double>(train.count()) / static_cast<double>(d1 * d2) / q;
  const double target = logit(std::clamp(rate, 1e-6, 1.0 - 1e-6));
  double lo = -config.tau;
  double hi = config.tau;
  double start = 0.0;
  if (target <= config.link.value(lo)) {
    start = lo;
  } else if (target >= config.link.value(hi)) {
    start = hi;
  } else {
    for (int k = 0; k < 100; ++k) {
      start = 0.5 * (lo + hi);
      (config.link.value(start) < target ? lo : hi) = start;
    }
  }

  OneBitFit fit{Matrix::Constant(d1, d2, start),
                PropensityModel(Matrix::Constant(d1, d2, 0.5), PropensityKind::one_bit, config.clip_eps)};
  double objective = onebit_loglik(fit.a_hat, train, q, config.link);
  if (!std::isfinite(objective)) throw NumericalError("fit_onebit: initial objective is not finite");
  fit.objective.push_back(objective);

  double step = config.step;
  const double min_step = config.step * 1e-10;
  for (int it = 0; it < config.iters; ++it) {
    const Matrix grad = onebit_gradient(fit.a_hat, train, q, config.link);
    bool accepted = false;
    bool saw_finite = false;
    Matrix candidate;
    double value = 0.0;
    while (step >= min_step) {
      candidate = project_nuclear_infty(fit.a_hat + step * grad, radius, config.tau,
                                        config.projection_sweeps);
      value = onebit_loglik(candidate, train, q, config.link);
      if (std::isfinite(value)) {
        saw_finite = true;
        if (value >= objective) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
      ++fit.halvings;
    }
    if (!accepted) {
      if (!saw_finite) throw NumericalError("fit_onebit: likelihood not finite at any step size");
      break;
    }
    const double gain = value - objective;
    fit.a_hat = std::move(candidate);
    objective = value;
    fit.objective.push_back(objective);
    fit.iterations = it + 1;
    step = std::min(2.0 * step, config.step);
    if (gain <= config.tolerance * std::abs(objective)) break;
  }

  Matrix p(d1, d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) p(i, j) = sigmoid(config.link.value(fit.a_hat(i, j)));
  fit.model = PropensityModel(p, PropensityKind::one_bit, config.clip_eps);
  return fit;
}

}  // namespace confmc
