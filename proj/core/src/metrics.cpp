#include "confmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "confmc/error.hpp"

namespace confmc {
namespace {

void check_target(const IntervalMatrix& intervals, const Mask& target) {
  if (intervals.lower.rows() != target.rows() || intervals.lower.cols() != target.cols())
    throw ContractViolation("metrics: interval and target dimensions differ");
  if ((target && !intervals.target).any())
    throw ContractViolation("metrics: intervals are not defined on the whole target");
}

double interpolated_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double avg_cov(const IntervalMatrix& intervals, const Matrix& truth, const Mask& target) {
  check_target(intervals, target);
  if (truth.rows() != target.rows() || truth.cols() != target.cols())
    throw ContractViolation("avg_cov: truth dimensions differ");
  Index total = 0;
  Index covered = 0;
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      if (target(i, j)) {
        ++total;
        if (intervals.contains(i, j, truth(i, j))) ++covered;
      }
  if (total == 0) return 1.0;
  return static_cast<double>(covered) / static_cast<double>(total);
}

double avg_length(const IntervalMatrix& intervals, const Mask& target) {
  check_target(intervals, target);
  Index total = 0;
  double sum = 0.0;
  for (Index i = 0; i < target.rows(); ++i)
    for (Index j = 0; j < target.cols(); ++j)
      if (target(i, j)) {
        ++total;
        const double width = intervals.upper(i, j) - intervals.lower(i, j);
        if (std::isinf(width)) return std::numeric_limits<double>::infinity();
        sum += width;
      }
  return total == 0 ? 0.0 : sum / static_cast<double>(total);
}

TrialReport make_report(const IntervalMatrix& intervals, const Matrix& truth, std::uint64_t seed) {
  TrialReport report;
  report.avg_cov = avg_cov(intervals, truth, intervals.target);
  report.avg_length = avg_length(intervals, intervals.target);
  report.n_unobserved = intervals.target.count();
  report.seed = seed;
  if (intervals.shared_q_hat) {
    report.q_hat = *intervals.shared_q_hat;
  } else if (report.n_unobserved > 0) {
    report.q_hat = intervals.target.select(intervals.q_hat, 0.0).sum() /
                   static_cast<double>(report.n_unobserved);
  }
  return report;
}

SampleSummary summarize(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("summarize: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SampleSummary s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.q25 = interpolated_quantile(sorted, 0.25);
  s.median = interpolated_quantile(sorted, 0.5);
  s.q75 = interpolated_quantile(sorted, 0.75);
  if (std::isinf(s.max)) {
    s.mean = std::numeric_limits<double>::infinity();
    s.std_error = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  // Sorted-order sums keep the result independent of input order.
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

AggregateSummary aggregate(std::span<const TrialReport> reports) {
  if (reports.empty()) throw ContractViolation("aggregate: no reports");
  std::vector<double> coverage;
  std::vector<double> length;
  std::size_t infinite = 0;
  for (const auto& r : reports) {
    coverage.push_back(r.avg_cov);
    length.push_back(r.avg_length);
    if (std::isinf(r.avg_length)) ++infinite;
  }
  AggregateSummary out;
  out.trials = reports.size();
  out.coverage = summarize(coverage);
  out.length = summarize(length);
  out.fraction_infinite = static_cast<double>(infinite) / static_cast<double>(reports.size());
  return out;
}

}  // namespace confmc
