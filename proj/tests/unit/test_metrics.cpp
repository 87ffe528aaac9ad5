#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "confmc/error.hpp"
#include "confmc/metrics.hpp"
#include "confmc/random.hpp"

using namespace confmc;

namespace {

IntervalMatrix intervals(const Matrix& lower, const Matrix& upper, const Mask& target) {
  IntervalMatrix iv = IntervalMatrix::empty_like(target);
  for (const Cell& c : cells_of(target)) {
    iv.lower(c.row, c.col) = lower(c.row, c.col);
    iv.upper(c.row, c.col) = upper(c.row, c.col);
  }
  return iv;
}

}  // namespace

TEST(AvgCov, EmptyTargetIsOne) {
  const Mask none = Mask::Constant(2, 2, false);
  const IntervalMatrix iv = IntervalMatrix::empty_like(none);
  EXPECT_EQ(avg_cov(iv, Matrix::Zero(2, 2), none), 1.0);
  EXPECT_EQ(avg_length(iv, none), 0.0);
}

TEST(AvgCov, InfiniteIntervalsCoverEverything) {
  const Mask all = Mask::Constant(2, 2, true);
  IntervalMatrix iv = IntervalMatrix::empty_like(all);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) iv.set(i, j, 0.0, std::numeric_limits<double>::infinity(), 1.0);
  EXPECT_EQ(iv.infinite_count, 4);
  EXPECT_EQ(avg_cov(iv, Matrix::Constant(2, 2, 1e300), all), 1.0);
  EXPECT_EQ(avg_length(iv, all), std::numeric_limits<double>::infinity());
}

TEST(AvgCov, Counting) {
  const Mask all = Mask::Constant(2, 2, true);
  const IntervalMatrix iv = intervals(Matrix::Zero(2, 2), Matrix::Ones(2, 2), all);
  Matrix truth{{0.5, 1.0}, {2.0, -0.1}};
  EXPECT_EQ(avg_cov(iv, truth, all), 0.5);
}

TEST(AvgLength, Means) {
  const Mask all = Mask::Constant(1, 2, true);
  EXPECT_EQ(avg_length(intervals(Matrix::Zero(1, 2), Matrix::Constant(1, 2, 2.0), all), all), 2.0);
  EXPECT_EQ(avg_length(intervals(Matrix::Zero(1, 2), Matrix{{1.0, 3.0}}, all), all), 2.0);
}

TEST(Aggregate, SingleAndPair) {
  TrialReport a;
  a.avg_cov = 0.8;
  a.avg_length = 2.0;
  const AggregateSummary one = aggregate(std::vector<TrialReport>{a});
  EXPECT_EQ(one.coverage.mean, 0.8);
  EXPECT_EQ(one.coverage.std_error, 0.0);
  TrialReport b = a;
  b.avg_cov = 1.0;
  const AggregateSummary two = aggregate(std::vector<TrialReport>{a, b});
  EXPECT_DOUBLE_EQ(two.coverage.mean, 0.9);
  EXPECT_DOUBLE_EQ(two.coverage.median, 0.9);
  EXPECT_THROW(aggregate(std::vector<TrialReport>{}), ContractViolation);
}

TEST(Aggregate, PermutationInvariant) {
  RandomSource rng(1);
  std::vector<TrialReport> reports(37);
  for (auto& r : reports) {
    r.avg_cov = rng.uniform();
    r.avg_length = rng.uniform(0, 10);
  }
  const AggregateSummary base = aggregate(reports);
  for (int k = 0; k < 10; ++k) {
    std::vector<TrialReport> shuffled = reports;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng.uniform() * (i + 1))]);
    const AggregateSummary s = aggregate(shuffled);
    EXPECT_EQ(s.coverage.mean, base.coverage.mean);
    EXPECT_EQ(s.coverage.std_error, base.coverage.std_error);
    EXPECT_EQ(s.length.q25, base.length.q25);
  }
}

TEST(Aggregate, InfiniteLengths) {
  TrialReport a, b;
  a.avg_length = 1.0;
  b.avg_length = std::numeric_limits<double>::infinity();
  const AggregateSummary s = aggregate(std::vector<TrialReport>{a, b});
  EXPECT_EQ(s.length.mean, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isnan(s.length.std_error));
  EXPECT_EQ(s.fraction_infinite, 0.5);
}

TEST(MakeReport, SharedThreshold) {
  const Mask all = Mask::Constant(1, 2, true);
  IntervalMatrix iv = IntervalMatrix::empty_like(all);
  iv.set(0, 0, 0.0, 1.5, 1.0);
  iv.set(0, 1, 0.0, 1.5, 2.0);
  iv.shared_q_hat = 1.5;
  const TrialReport r = make_report(iv, Matrix{{1.0, 4.0}}, 9);
  EXPECT_EQ(r.avg_cov, 0.5);
  EXPECT_EQ(r.avg_length, 4.5);
  EXPECT_EQ(r.q_hat, 1.5);
  EXPECT_EQ(r.n_unobserved, 2);
  EXPECT_EQ(r.seed, 9u);
}
