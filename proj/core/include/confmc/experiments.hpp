#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confmc/completion.hpp"
#include "confmc/conformal.hpp"
#include "confmc/matrix.hpp"
#include "confmc/metrics.hpp"
#include "confmc/propensity.hpp"
#include "confmc/random.hpp"

namespace confmc {

enum class FactorKind { gaussian, student_t };
enum class NoiseKind { gaussian, scaled_t, adversarial_het, random_het };
enum class MissingnessKind { homogeneous, logistic_lowrank };
enum class BaseKind { als, cvx };
enum class Method { cmc_oneshot, cmc_exact, cmc_full, model_based };

std::string_view to_string(FactorKind kind);
std::string_view to_string(NoiseKind kind);
std::string_view to_string(MissingnessKind kind);
std::string_view to_string(BaseKind kind);
std::string_view to_string(Method method);

struct FactorDistribution {
  FactorKind kind = FactorKind::gaussian;
  double df = 1.2;
};

struct NoiseModel {
  NoiseKind kind = NoiseKind::gaussian;
  double sigma = 1.0;  // gaussian
  double scale = 0.2;  // scaled_t
  double df = 1.2;     // scaled_t
};

struct Missingness {
  MissingnessKind kind = MissingnessKind::homogeneous;
  double p = 0.8;
  Index k_star = 1;
};

struct BaseLearner {
  BaseKind kind = BaseKind::als;
  std::vector<Index> ranks{8};
  double lambda = 1.0;  // cvx only
  int sweeps = 50;      // als
  int prox_iters = 500; // cvx
};

struct OneBitSettings {
  double tau = 3.0;
  /// Rank bound; defaults to the generating k* (or 1 for homogeneous data).
  std::optional<Index> k_star;
  int iters = 100;
};

struct FullConformalSettings {
  std::size_t targets = 20;      // unobserved entries evaluated per trial
  std::size_t grid_points = 50;
  int refit_sweeps = 10;
};

/// Everything downstream of the data: split, base fit, propensity and
/// interval construction.
struct PipelineSettings {
  double alpha = 0.1;
  double split_prob = 0.8;
  BaseLearner base;
  std::vector<PropensityKind> propensity_fit{PropensityKind::homogeneous};
  std::vector<Method> methods{Method::cmc_oneshot, Method::model_based};
  OneBitSettings one_bit;
  FullConformalSettings full_conformal;

  void validate() const;
};

struct SyntheticConfig {
  std::string label = "custom";
  Index rows = 500;
  Index cols = 500;
  Index true_rank = 8;
  double kappa_target_magnitude = 2.0;
  FactorDistribution factor_dist;
  NoiseModel noise;
  Missingness missingness;
  int trials = 100;
  std::uint64_t seed = 0;
  PipelineSettings pipeline;

  void validate() const;
};

/// Named presets: setting1..setting4, het-k1, het-k5 (full scale) and desk.
SyntheticConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Shrink to d = 80, r* = 3, 200 trials, hypothesized ranks {3, 20}.
void apply_desk_scale(SyntheticConfig& config);

// ---------------------------------------------------------------------------
// Generators.

/// kappa U* V*^T with U*, V* orthonormal bases of i.i.d. factor draws and
/// kappa chosen so that mean |M*_ij| equals the target magnitude.
Matrix gen_lowrank(const SyntheticConfig& config, RandomSource& rng);

/// logit(p_ij) = sum_l a_il b_lj, a ~ U(0, 1), b ~ U(-0.5, 0.5).
Matrix gen_hetero_propensity(Index rows, Index cols, Index k_star, RandomSource& rng);

/// Observation probabilities for the configured missingness model.
Matrix gen_propensity(const SyntheticConfig& config, RandomSource& rng);

/// Entrywise noise. The heterogeneous kinds use sigma_ij = 1 / (2 p_ij);
/// random_het draws a fresh, independent probability field for sigma.
Matrix gen_noise(const SyntheticConfig& config, const Matrix& probabilities, RandomSource& rng);

struct SyntheticInstance {
  Matrix signal;
  Matrix probabilities;
  Matrix noise;
  Matrix truth;  // signal + noise
};

SyntheticInstance generate_instance(const SyntheticConfig& config, RandomSource& rng);

// ---------------------------------------------------------------------------
// Trial pipeline.

struct FittedOdds {
  PropensityKind kind;
  Matrix odds;
};

struct PreparedTrial {
  Matrix truth;
  Matrix probabilities;
  ObservedMatrix observed;
  MaskSplit split;
  ObservedMatrix train;
  double p_hat_scalar = 1.0;     // homogeneous estimate, feeds the local scale
  std::vector<FittedOdds> odds;  // one per requested propensity fit
  Matrix true_odds;              // from the clipped true probabilities
};

/// Observe, split and fit every requested propensity model.
/// Throws ContractViolation("empty observation set") when nothing is observed.
PreparedTrial prepare_trial(const Matrix& truth, const Matrix& probabilities,
                            const PipelineSettings& settings, RandomSource& rng);

CompletionEstimate fit_base(const ObservedMatrix& train, const BaseLearner& base, Index rank,
                            double p_hat_scalar);

const Matrix& odds_for(const PreparedTrial& trial, PropensityKind kind);

IntervalMatrix build_intervals(const PreparedTrial& trial, const CompletionEstimate& est,
                               const PipelineSettings& settings, Index rank, Method method,
                               PropensityKind propensity);

struct TrialRecord {
  std::string label;
  Index rank = 0;
  std::string method;
  std::string propensity;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  TrialReport report;
  double runtime_ms = 0.0;
};

/// Every (rank, method, propensity) combination on one prepared trial.
std::vector<TrialRecord> run_pipeline(const PreparedTrial& trial, const PipelineSettings& settings,
                                      const std::string& label, std::uint64_t seed,
                                      std::uint64_t trial_index, bool timing = false);

/// Trial `trial_index` of a synthetic configuration: stream
/// (config.seed, trial_index) generates the instance, the mask and the split.
std::vector<TrialRecord> run_trial(const SyntheticConfig& config, std::uint64_t trial_index,
                                   bool timing = false);

// ---------------------------------------------------------------------------
// Masked evaluation of a fully known matrix.

struct MaskSpec {
  enum class Kind { homogeneous, heterogeneous };
  Kind kind = Kind::homogeneous;
  double p = 0.8;    // observation probability
  Index k_star = 1;  // heterogeneous logit rank

  /// "homogeneous:<p>" or "het:<k>".
  static MaskSpec parse(std::string_view text);
};

struct EvaluationConfig {
  std::string label = "real";
  MaskSpec mask;
  int trials = 100;
  std::uint64_t seed = 0;
  PipelineSettings pipeline;
};

struct RunOptions {
  unsigned threads = 1;
  bool timing = false;
};

std::vector<TrialRecord> evaluate_real(const Matrix& matrix, const EvaluationConfig& config,
                                       const RunOptions& options = {});
std::vector<TrialRecord> evaluate_real(const std::filesystem::path& csv, const EvaluationConfig& config,
                                       const RunOptions& options = {});

using TrialFunction = std::function<std::vector<TrialRecord>(std::uint64_t trial)>;

/// Run trials 0..n-1 on up to `threads` workers (0 = hardware concurrency)
/// and concatenate their records in trial order. The first failing trial's
/// error is rethrown with the trial index attached.
std::vector<TrialRecord> run_trials(int trials, unsigned threads, const TrialFunction& fn);

std::vector<TrialRecord> run_simulation(const SyntheticConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Completing a user-supplied partially observed matrix.

struct CompleteOptions {
  double alpha = 0.1;
  Index rank = 2;
  Method method = Method::cmc_oneshot;
  PropensityKind propensity = PropensityKind::homogeneous;
  double split_prob = 0.8;
  std::uint64_t seed = 0;
  int sweeps = 50;
  OneBitSettings one_bit;
  std::size_t grid_points = 200;
  int refit_sweeps = 10;
  unsigned threads = 1;
};

struct CompleteResult {
  Matrix m_hat;
  IntervalMatrix intervals;
  std::vector<std::string> warnings;
};

CompleteResult complete_matrix(const ObservedMatrix& obs, const CompleteOptions& options);

}  // namespace confmc
