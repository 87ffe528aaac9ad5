#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "confmc/interval.hpp"
#include "confmc/matrix.hpp"

namespace confmc {

/// Fraction of target entries whose truth lies in the closed interval.
/// Defined as 1 when the target set is empty.
double avg_cov(const IntervalMatrix& intervals, const Matrix& truth, const Mask& target);

/// Mean interval length over the target; +inf if any interval is infinite,
/// 0 for an empty target.
double avg_length(const IntervalMatrix& intervals, const Mask& target);

struct TrialReport {
  double avg_cov = 1.0;
  double avg_length = 0.0;
  Index n_unobserved = 0;
  double q_hat = 0.0;
  std::optional<double> delta;
  std::uint64_t seed = 0;
};

TrialReport make_report(const IntervalMatrix& intervals, const Matrix& truth, std::uint64_t seed);

struct SampleSummary {
  double mean = 0.0;
  double std_error = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Mean, standard error (sample sd / sqrt(n)) and linear-interpolation
/// quantiles. A sample containing +inf has mean +inf and NaN standard error.
SampleSummary summarize(std::span<const double> values);

struct AggregateSummary {
  std::size_t trials = 0;
  SampleSummary coverage;
  SampleSummary length;
  double fraction_infinite = 0.0;
};

AggregateSummary aggregate(std::span<const TrialReport> reports);

}  // namespace confmc
