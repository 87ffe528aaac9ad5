#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "confmc/completion.hpp"
#include "confmc/interval.hpp"
#include "confmc/matrix.hpp"
#include "confmc/propensity.hpp"

namespace confmc {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Slack on the cumulative-mass comparison in the weighted quantile, so that
/// e.g. nine masses of 1/10 still reach level 0.9.
inline constexpr double kQuantileSlack = 1e-12;

/// Discrete distribution sum_k weights[k] delta_{atoms[k]} + infinity_weight delta_{+inf}.
/// All atoms are finite; the +inf atom is carried separately.
struct WeightedEmpirical {
  std::vector<double> atoms;
  std::vector<double> weights;
  double infinity_weight = 0.0;

  /// Throws ContractViolation unless sizes match, weights are nonnegative,
  /// atoms are finite and the total mass is 1 within 1e-10.
  void validate() const;
};

/// Smallest atom t with total weight of atoms <= t at least `level`;
/// +inf when no finite atom gets there.
double weighted_quantile(const WeightedEmpirical& dist, double level);

/// Calibration scores sorted once, with prefix sums of their (unnormalized)
/// masses, so that quantiles for many test masses are cheap.
class SortedScores {
 public:
  SortedScores(std::span<const double> scores, std::span<const double> masses);

  /// Quantile of sum_k m_k delta_{s_k} + test_mass delta_{+inf}, normalized.
  double quantile(double level, double test_mass) const;

  std::size_t size() const noexcept { return scores_.size(); }
  double total_mass() const noexcept { return prefix_.empty() ? 0.0 : prefix_.back(); }

 private:
  std::vector<double> scores_;
  std::vector<double> prefix_;  // prefix_[k] = mass of all scores <= scores_[k]
};

/// Nonconformity score seam. The default is |observed - predicted| / scale.
using ScoreFunction = std::function<double(double observed, double predicted, double scale)>;

double absolute_residual_score(double observed, double predicted, double scale);

struct ScoredCell {
  Cell cell;
  double value = 0.0;
};

/// Scores on every observed entry of `calibration`, row-major.
std::vector<ScoredCell> residuals(const ObservedMatrix& calibration, const Matrix& m_hat,
                                  const Matrix& s_hat,
                                  const ScoreFunction& score = absolute_residual_score);

struct ConformalWeights {
  std::vector<double> calibration;  // row-major over the calibration mask
  double test = 0.0;
};

/// w_ij = h_ij / (sum_cal h + max_test h), w_test = max_test h / (same).
ConformalWeights oneshot_weights(const Matrix& odds, const Mask& calibration, const Mask& test);

/// oneshot_weights with odds computed from the true probabilities.
ConformalWeights oracle_weights(const Matrix& true_probabilities, const Mask& calibration,
                                const Mask& test);

/// h_k / sum_bag h over an unordered bag of locations.
std::vector<double> bag_weights(const Matrix& odds, std::span<const Cell> bag);

/// One-shot weighted split conformal intervals on the unobserved set of `obs`.
/// The calibration residuals come from obs restricted to split.calibration.
IntervalMatrix cmc_intervals(const CompletionEstimate& est, const Matrix& odds,
                             const MaskSplit& split, const ObservedMatrix& obs, double alpha);
IntervalMatrix cmc_intervals(const CompletionEstimate& est, const PropensityModel& propensity,
                             const MaskSplit& split, const ObservedMatrix& obs, double alpha);

/// Per-entry thresholds using the entry's own odds for the +inf atom.
IntervalMatrix exact_split_intervals(const CompletionEstimate& est, const Matrix& odds,
                                     const MaskSplit& split, const ObservedMatrix& obs, double alpha);
IntervalMatrix exact_split_intervals(const CompletionEstimate& est, const PropensityModel& propensity,
                                     const MaskSplit& split, const ObservedMatrix& obs, double alpha);

// ---------------------------------------------------------------------------
// Full conformal.

struct RefitOutput {
  Matrix m_hat;
  Matrix s_hat;
};

/// Maps an augmented observation matrix to point estimates and scales. Must
/// be safe to call concurrently on distinct inputs.
using RefitProcedure = std::function<RefitOutput(const ObservedMatrix&)>;

struct FullConformalSet {
  Cell target;
  std::vector<double> accepted;  // grid values kept, in grid order
  std::size_t undecided = 0;     // grid points whose refit failed
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();

  bool empty() const noexcept { return accepted.empty(); }
};

struct FullConformalResult {
  std::vector<FullConformalSet> sets;
  std::vector<std::string> warnings;
};

/// 200-point default grid over [min - range/2, max + range/2] of observed values.
std::vector<double> default_grid(const ObservedMatrix& obs, std::size_t points = 200);

FullConformalResult full_cmc_intervals(const ObservedMatrix& obs, const Matrix& odds,
                                       const RefitProcedure& refit, std::span<const double> grid,
                                       double alpha, std::span<const Cell> targets,
                                       unsigned threads = 1,
                                       const ScoreFunction& score = absolute_residual_score);

// ---------------------------------------------------------------------------
// Weight estimation gap.

struct GapReport {
  double delta = 0.0;
  double delta_upper = 0.0;
};

/// Half L1 distance between normalized estimated and true odds over
/// calibration plus the test point, and its bound
/// sum |h_hat - h| / sum_cal h_hat.
GapReport estimation_gap(const Matrix& odds_hat, const Matrix& odds_true, const Mask& calibration,
                         Cell test);

/// Mean gap over up to `max_points` test locations taken at an even stride.
double mean_estimation_gap(const Matrix& odds_hat, const Matrix& odds_true, const Mask& calibration,
                           const Mask& test, std::size_t max_points = 256);

}  // namespace confmc
