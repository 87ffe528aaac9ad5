#include <cmath>
#include <string>

#include <Eigen/QR>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"

namespace confmc {

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::gaussian: return "gaussian";
    case FactorKind::student_t: return "student_t";
  }
  return "?";
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::scaled_t: return "scaled_t";
    case NoiseKind::adversarial_het: return "adversarial_het";
    case NoiseKind::random_het: return "random_het";
  }
  return "?";
}

std::string_view to_string(MissingnessKind kind) {
  switch (kind) {
    case MissingnessKind::homogeneous: return "homogeneous";
    case MissingnessKind::logistic_lowrank: return "logistic_lowrank";
  }
  return "?";
}

std::string_view to_string(BaseKind kind) {
  switch (kind) {
    case BaseKind::als: return "als";
    case BaseKind::cvx: return "cvx";
  }
  return "?";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::cmc_oneshot: return "cmc_oneshot";
    case Method::cmc_exact: return "cmc_exact";
    case Method::cmc_full: return "cmc_full";
    case Method::model_based: return "model_based";
  }
  return "?";
}

void PipelineSettings::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation("alpha must lie in (0, 1)");
  if (!(split_prob > 0.0 && split_prob < 1.0))
    throw ContractViolation("split_prob must lie in (0, 1)");
  if (base.ranks.empty()) throw ContractViolation("at least one hypothesized rank is required");
  for (Index r : base.ranks)
    if (r < 1) throw ContractViolation("hypothesized ranks must be positive");
  if (base.kind == BaseKind::cvx && !(base.lambda >= 0.0))
    throw ContractViolation("cvx lambda must be nonnegative");
  if (base.sweeps < 1 || base.prox_iters < 1)
    throw ContractViolation("iteration counts must be positive");
  if (methods.empty()) throw ContractViolation("at least one method is required");
  bool needs_propensity = false;
  for (Method m : methods) needs_propensity |= m != Method::model_based;
  if (needs_propensity && propensity_fit.empty())
    throw ContractViolation("conformal methods need at least one propensity_fit");
  if (!(one_bit.tau > 0.0)) throw ContractViolation("one_bit.tau must be positive");
  if (one_bit.k_star && *one_bit.k_star < 1) throw ContractViolation("one_bit.k_star must be positive");
  if (one_bit.iters < 0) throw ContractViolation("one_bit.iters must be nonnegative");
  if (full_conformal.targets == 0 || full_conformal.grid_points < 2 || full_conformal.refit_sweeps < 1)
    throw ContractViolation("full_conformal settings out of range");
}

void SyntheticConfig::validate() const {
  if (rows < 1 || cols < 1) throw ContractViolation("dims must be positive");
  if (true_rank < 1 || true_rank > std::min(rows, cols))
    throw ContractViolation("true_rank must lie in [1, min(d1, d2)]");
  if (!(kappa_target_magnitude > 0.0))
    throw ContractViolation("kappa_target_magnitude must be positive");
  if (factor_dist.kind == FactorKind::student_t && !(factor_dist.df > 0.0))
    throw ContractViolation("factor_dist.df must be positive");
  if (noise.kind == NoiseKind::gaussian && !(noise.sigma >= 0.0))
    throw ContractViolation("noise.sigma must be nonnegative");
  if (noise.kind == NoiseKind::scaled_t && !(noise.scale >= 0.0 && noise.df > 0.0))
    throw ContractViolation("noise.scale must be nonnegative and noise.df positive");
  if (missingness.kind == MissingnessKind::homogeneous &&
      !(missingness.p >= 0.0 && missingness.p <= 1.0))
    throw ContractViolation("missingness.p must lie in [0, 1]");
  if (missingness.kind == MissingnessKind::logistic_lowrank && missingness.k_star < 1)
    throw ContractViolation("missingness.k_star must be positive");
  if (trials < 1) throw ContractViolation("trials must be positive");
  pipeline.validate();
  for (Index r : pipeline.base.ranks)
    if (r > std::min(rows, cols)) throw ContractViolation("hypothesized rank exceeds min(d1, d2)");
}

namespace {

double draw_factor(const FactorDistribution& dist, RandomSource& rng) {
  return dist.kind == FactorKind::gaussian ? rng.normal() : rng.student_t(dist.df);
}

Matrix orthonormal_basis(Index d, Index r, const FactorDistribution& dist, RandomSource& rng) {
  constexpr int kAttempts = 5;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Matrix raw(d, r);
    for (Index i = 0; i < d; ++i)
      for (Index k = 0; k < r; ++k) raw(i, k) = draw_factor(dist, rng);
    if (!raw.allFinite()) continue;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(raw);
    qr.setThreshold(1e-10);
    if (qr.rank() < r) continue;
    Eigen::HouseholderQR<Eigen::MatrixXd> hqr(raw);
    return hqr.householderQ() * Eigen::MatrixXd::Identity(d, r);
  }
  throw NumericalError("gen_lowrank: factor draw rank-deficient after 5 attempts");
}

}  // namespace

Matrix gen_lowrank(const SyntheticConfig& config, RandomSource& rng) {
  const Matrix u = orthonormal_basis(config.rows, config.true_rank, config.factor_dist, rng);
  const Matrix v = orthonormal_basis(config.cols, config.true_rank, config.factor_dist, rng);
  Matrix m = u * v.transpose();
  const double mean_abs = m.cwiseAbs().mean();
  if (!(mean_abs > 0.0)) throw NumericalError("gen_lowrank: zero signal");
  m *= config.kappa_target_magnitude / mean_abs;
  return m;
}

Matrix gen_hetero_propensity(Index rows, Index cols, Index k_star, RandomSource& rng) {
  if (rows < 1 || cols < 1) throw ContractViolation("gen_hetero_propensity: empty dims");
  if (k_star < 1) throw ContractViolation("gen_hetero_propensity: k* must be positive");
  Matrix a(rows, k_star);
  for (Index i = 0; i < rows; ++i)
    for (Index l = 0; l < k_star; ++l) a(i, l) = rng.uniform(0.0, 1.0);
  Matrix b(k_star, cols);
  for (Index l = 0; l < k_star; ++l)
    for (Index j = 0; j < cols; ++j) b(l, j) = rng.uniform(-0.5, 0.5);
  const Matrix logit = a * b;
  return logit.unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
}

Matrix gen_propensity(const SyntheticConfig& config, RandomSource& rng) {
  if (config.missingness.kind == MissingnessKind::homogeneous)
    return Matrix::Constant(config.rows, config.cols, config.missingness.p);
  return gen_hetero_propensity(config.rows, config.cols, config.missingness.k_star, rng);
}

Matrix gen_noise(const SyntheticConfig& config, const Matrix& probabilities, RandomSource& rng) {
  const Index d1 = config.rows, d2 = config.cols;
  Matrix e(d1, d2);
  switch (config.noise.kind) {
    case NoiseKind::gaussian:
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j) e(i, j) = config.noise.sigma * rng.normal();
      return e;
    case NoiseKind::scaled_t:
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j) e(i, j) = config.noise.scale * rng.student_t(config.noise.df);
      return e;
    case NoiseKind::adversarial_het:
    case NoiseKind::random_het: {
      Matrix p;
      if (config.noise.kind == NoiseKind::adversarial_het) {
        if (probabilities.rows() != d1 || probabilities.cols() != d2)
          throw ContractViolation("gen_noise: probability matrix has wrong shape");
        p = probabilities;
      } else {
        p = gen_propensity(config, rng);
      }
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d2; ++j) {
          if (!(p(i, j) > 0.0)) throw ContractViolation("gen_noise: heterogeneous noise needs p > 0");
          e(i, j) = rng.normal() / (2.0 * p(i, j));
        }
      return e;
    }
  }
  return e;
}

SyntheticInstance generate_instance(const SyntheticConfig& config, RandomSource& rng) {
  SyntheticInstance inst;
  RandomSource signal_rng = rng.substream(1);
  RandomSource propensity_rng = rng.substream(2);
  RandomSource noise_rng = rng.substream(3);
  inst.signal = gen_lowrank(config, signal_rng);
  inst.probabilities = gen_propensity(config, propensity_rng);
  inst.noise = gen_noise(config, inst.probabilities, noise_rng);
  inst.truth = inst.signal + inst.noise;
  return inst;
}

}  // namespace confmc
