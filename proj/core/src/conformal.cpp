#include "confmc/conformal.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <string>
#include <thread>

#include "confmc/error.hpp"

namespace confmc {
namespace {

void check_alpha(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation(std::string(who) + ": alpha must lie in (0, 1)");
}

void check_same_shape(const Matrix& a, const Mask& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(who) + ": dimension mismatch");
}

struct CalibrationData {
  std::vector<double> scores;
  std::vector<double> masses;
};

CalibrationData calibration_data(const CompletionEstimate& est, const Matrix& odds,
                                 const MaskSplit& split, const ObservedMatrix& obs) {
  check_same_shape(est.m_hat, obs.mask(), "conformal intervals");
  check_same_shape(est.s_hat, obs.mask(), "conformal intervals");
  check_same_shape(odds, obs.mask(), "conformal intervals");
  if ((split.train && split.calibration).any())
    throw ContractViolation("conformal intervals: training and calibration masks overlap");
  const auto scored = residuals(obs.restrict_to(split.calibration), est.m_hat, est.s_hat);
  CalibrationData data;
  data.scores.reserve(scored.size());
  data.masses.reserve(scored.size());
  for (const auto& s : scored) {
    data.scores.push_back(s.value);
    data.masses.push_back(odds(s.cell.row, s.cell.col));
  }
  return data;
}

}  // namespace

void WeightedEmpirical::validate() const {
  if (atoms.size() != weights.size())
    throw ContractViolation("WeightedEmpirical: atoms and weights differ in length");
  double total = infinity_weight;
  if (!(infinity_weight >= 0.0)) throw ContractViolation("WeightedEmpirical: negative weight");
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (!std::isfinite(atoms[k])) throw ContractViolation("WeightedEmpirical: non-finite atom");
    if (!(weights[k] >= 0.0)) throw ContractViolation("WeightedEmpirical: negative weight");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-10) throw ContractViolation("WeightedEmpirical: weights do not sum to 1");
}

SortedScores::SortedScores(std::span<const double> scores, std::span<const double> masses) {
  if (scores.size() != masses.size()) throw ContractViolation("SortedScores: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double cumulative = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double score = scores[order[k]];
    if (std::isnan(score)) throw ContractViolation("SortedScores: NaN score");
    cumulative += masses[order[k]];
    // Tied atoms share one entry carrying the mass of the whole tie group.
    if (!scores_.empty() && scores_.back() == score) {
      prefix_.back() = cumulative;
    } else {
      scores_.push_back(score);
      prefix_.push_back(cumulative);
    }
  }
}

double SortedScores::quantile(double level, double test_mass) const {
  const double total = total_mass() + test_mass;
  if (!(total > 0.0)) return kInfinity;
  const double target = level - kQuantileSlack;
  const auto it = std::partition_point(prefix_.begin(), prefix_.end(),
                                       [&](double prefix) { return prefix / total < target; });
  if (it == prefix_.end()) return kInfinity;
  return scores_[static_cast<std::size_t>(it - prefix_.begin())];
}

double weighted_quantile(const WeightedEmpirical& dist, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("weighted_quantile: level must lie in (0, 1)");
  dist.validate();
  return SortedScores(dist.atoms, dist.weights).quantile(level, dist.infinity_weight);
}

double absolute_residual_score(double observed, double predicted, double scale) {
  return std::abs(observed - predicted) / scale;
}

std::vector<ScoredCell> residuals(const ObservedMatrix& calibration, const Matrix& m_hat,
                                  const Matrix& s_hat, const ScoreFunction& score) {
  check_same_shape(m_hat, calibration.mask(), "residuals");
  check_same_shape(s_hat, calibration.mask(), "residuals");
  std::vector<ScoredCell> out;
  out.reserve(static_cast<std::size_t>(calibration.observed_count()));
  for (Index i = 0; i < calibration.rows(); ++i) {
    for (Index j = 0; j < calibration.cols(); ++j) {
      if (!calibration.observed(i, j)) continue;
      if (!(s_hat(i, j) > 0.0))
        throw ContractViolation("residuals: local scale must be positive on the calibration set");
      out.push_back({{i, j}, score(calibration.values()(i, j), m_hat(i, j), s_hat(i, j))});
    }
  }
  return out;
}

ConformalWeights oneshot_weights(const Matrix& odds, const Mask& calibration, const Mask& test) {
  check_same_shape(odds, calibration, "oneshot_weights");
  check_same_shape(odds, test, "oneshot_weights");
  if (!test.any()) throw ContractViolation("oneshot_weights: empty test mask");
  if ((odds.array() <= 0.0).any()) throw ContractViolation("oneshot_weights: odds must be positive");
  const double max_test = test.select(odds, -kInfinity).maxCoeff();
  double cal_sum = 0.0;
  ConformalWeights w;
  for (const Cell& c : cells_of(calibration)) {
    w.calibration.push_back(odds(c.row, c.col));
    cal_sum += odds(c.row, c.col);
  }
  const double denom = cal_sum + max_test;
  for (double& x : w.calibration) x /= denom;
  w.test = max_test / denom;
  return w;
}

ConformalWeights oracle_weights(const Matrix& true_probabilities, const Mask& calibration,
                                const Mask& test) {
  return oneshot_weights(odds_from_probabilities(true_probabilities), calibration, test);
}

std::vector<double> bag_weights(const Matrix& odds, std::span<const Cell> bag) {
  std::vector<double> w;
  w.reserve(bag.size());
  double total = 0.0;
  for (const Cell& c : bag) {
    w.push_back(odds(c.row, c.col));
    total += w.back();
  }
  for (double& x : w) x /= total;
  return w;
}

IntervalMatrix cmc_intervals(const CompletionEstimate& est, const Matrix& odds,
                             const MaskSplit& split, const ObservedMatrix& obs, double alpha) {
  check_alpha(alpha, "cmc_intervals");
  const CalibrationData data = calibration_data(est, odds, split, obs);
  const Mask target = obs.unobserved();
  IntervalMatrix out = IntervalMatrix::empty_like(target);
  if (!target.any()) return out;
  const double max_test = target.select(odds, -kInfinity).maxCoeff();
  const double q = SortedScores(data.scores, data.masses).quantile(1.0 - alpha, max_test);
  out.shared_q_hat = q;
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      if (target(i, j)) out.set(i, j, est.m_hat(i, j), q, est.s_hat(i, j));
  return out;
}

IntervalMatrix cmc_intervals(const CompletionEstimate& est, const PropensityModel& propensity,
                             const MaskSplit& split, const ObservedMatrix& obs, double alpha) {
  return cmc_intervals(est, odds(propensity), split, obs, alpha);
}

IntervalMatrix exact_split_intervals(const CompletionEstimate& est, const Matrix& odds,
                                     const MaskSplit& split, const ObservedMatrix& obs, double alpha) {
  check_alpha(alpha, "exact_split_intervals");
  const CalibrationData data = calibration_data(est, odds, split, obs);
  const SortedScores sorted(data.scores, data.masses);
  const Mask target = obs.unobserved();
  IntervalMatrix out = IntervalMatrix::empty_like(target);
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      if (target(i, j))
        out.set(i, j, est.m_hat(i, j), sorted.quantile(1.0 - alpha, odds(i, j)), est.s_hat(i, j));
  return out;
}

IntervalMatrix exact_split_intervals(const CompletionEstimate& est, const PropensityModel& propensity,
                                     const MaskSplit& split, const ObservedMatrix& obs, double alpha) {
  return exact_split_intervals(est, odds(propensity), split, obs, alpha);
}

// ---------------------------------------------------------------------------

std::vector<double> default_grid(const ObservedMatrix& obs, std::size_t points) {
  if (obs.observed_count() == 0) throw ContractViolation("default_grid: no observed entries");
  if (points < 2) throw ContractViolation("default_grid: need at least two points");
  double lo = kInfinity;
  double hi = -kInfinity;
  for (const Cell& c : cells_of(obs.mask())) {
    lo = std::min(lo, obs.values()(c.row, c.col));
    hi = std::max(hi, obs.values()(c.row, c.col));
  }
  const double range = hi - lo;
  const double start = lo - 0.5 * range;
  const double stop = hi + 0.5 * range;
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k)
    grid[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(points - 1);
  return grid;
}

FullConformalResult full_cmc_intervals(const ObservedMatrix& obs, const Matrix& odds,
                                       const RefitProcedure& refit, std::span<const double> grid,
                                       double alpha, std::span<const Cell> targets, unsigned threads,
                                       const ScoreFunction& score) {
  check_alpha(alpha, "full_cmc_intervals");
  check_same_shape(odds, obs.mask(), "full_cmc_intervals");
  if (grid.empty()) throw ContractViolation("full_cmc_intervals: empty grid");
  for (const Cell& t : targets) {
    if (t.row < 0 || t.row >= obs.rows() || t.col < 0 || t.col >= obs.cols() || obs.observed(t.row, t.col))
      throw ContractViolation("full_cmc_intervals: targets must be unobserved locations");
  }

  const std::vector<Cell> observed = cells_of(obs.mask());
  std::vector<double> masses;
  masses.reserve(observed.size());
  for (const Cell& c : observed) masses.push_back(odds(c.row, c.col));

  enum : char { kRejected = 0, kAccepted = 1, kUndecided = 2 };
  const std::size_t pairs = targets.size() * grid.size();
  std::vector<char> status(pairs, kRejected);
  std::vector<std::string> failure(pairs);

  auto evaluate = [&](std::size_t index) {
    const Cell target = targets[index / grid.size()];
    const double m = grid[index % grid.size()];
    try {
      const RefitOutput fitted = refit(obs.augmented(target, m));
      std::vector<double> scores;
      scores.reserve(observed.size());
      for (const Cell& c : observed)
        scores.push_back(score(obs.values()(c.row, c.col), fitted.m_hat(c.row, c.col),
                               fitted.s_hat(c.row, c.col)));
      const double test_score =
          score(m, fitted.m_hat(target.row, target.col), fitted.s_hat(target.row, target.col));
      const double q = SortedScores(scores, masses).quantile(1.0 - alpha, odds(target.row, target.col));
      if (std::isnan(test_score)) throw NumericalError("non-finite test score");
      status[index] = test_score <= q ? kAccepted : kRejected;
    } catch (const std::exception& e) {
      status[index] = kUndecided;
      failure[index] = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(pairs)));
  if (workers == 1) {
    for (std::size_t k = 0; k < pairs; ++k) evaluate(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < pairs; k = next++) evaluate(k);
      });
  }

  FullConformalResult result;
  result.sets.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    FullConformalSet set{targets[t]};
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const std::size_t index = t * grid.size() + g;
      if (status[index] == kAccepted) {
        set.accepted.push_back(grid[g]);
      } else if (status[index] == kUndecided) {
        ++set.undecided;
        result.warnings.push_back("refit failed at target (" + std::to_string(targets[t].row) + ", " +
                                  std::to_string(targets[t].col) + "), grid value " +
                                  std::to_string(grid[g]) + ": " + failure[index]);
      }
    }
    if (!set.accepted.empty()) {
      const auto [lo, hi] = std::minmax_element(set.accepted.begin(), set.accepted.end());
      set.lower = *lo;
      set.upper = *hi;
    }
    result.sets.push_back(std::move(set));
  }
  return result;
}

// ---------------------------------------------------------------------------

GapReport estimation_gap(const Matrix& odds_hat, const Matrix& odds_true, const Mask& calibration,
                         Cell test) {
  check_same_shape(odds_hat, calibration, "estimation_gap");
  check_same_shape(odds_true, calibration, "estimation_gap");
  if (test.row < 0 || test.row >= calibration.rows() || test.col < 0 || test.col >= calibration.cols())
    throw ContractViolation("estimation_gap: test location out of range");
  if (calibration(test.row, test.col))
    throw ContractViolation("estimation_gap: test location belongs to the calibration set");
  if ((odds_hat.array() <= 0.0).any() || (odds_true.array() <= 0.0).any())
    throw ContractViolation("estimation_gap: odds must be positive");

  const std::vector<Cell> cal = cells_of(calibration);
  double sum_hat_cal = 0.0;
  double sum_true = odds_true(test.row, test.col);
  for (const Cell& c : cal) {
    sum_hat_cal += odds_hat(c.row, c.col);
    sum_true += odds_true(c.row, c.col);
  }
  const double sum_hat = sum_hat_cal + odds_hat(test.row, test.col);

  double half_l1 = 0.0;
  double abs_error = 0.0;
  auto accumulate = [&](Cell c) {
    const double a = odds_hat(c.row, c.col);
    const double b = odds_true(c.row, c.col);
    half_l1 += std::abs(a / sum_hat - b / sum_true);
    abs_error += std::abs(a - b);
  };
  for (const Cell& c : cal) accumulate(c);
  accumulate(test);

  GapReport report;
  report.delta = std::min(1.0, 0.5 * half_l1);
  if (sum_hat_cal > 0.0)
    report.delta_upper = abs_error / sum_hat_cal;
  else
    report.delta_upper = abs_error > 0.0 ? kInfinity : 0.0;
  return report;
}

double mean_estimation_gap(const Matrix& odds_hat, const Matrix& odds_true, const Mask& calibration,
                           const Mask& test, std::size_t max_points) {
  const std::vector<Cell> tests = cells_of(test);
  if (tests.empty() || max_points == 0) return 0.0;
  const std::size_t stride = (tests.size() + max_points - 1) / max_points;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < tests.size(); k += stride) {
    total += estimation_gap(odds_hat, odds_true, calibration, tests[k]).delta;
    ++used;
  }
  return total / static_cast<double>(used);
}

}  // namespace confmc
