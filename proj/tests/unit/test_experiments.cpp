#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"
#include "confmc/io.hpp"
#include "confmc/svd.hpp"

using namespace confmc;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.label = "small";
  c.rows = 30;
  c.cols = 25;
  c.true_rank = 2;
  c.missingness.p = 0.6;
  c.trials = 4;
  c.seed = 3;
  c.pipeline.base.ranks = {2, 4};
  c.pipeline.methods = {Method::cmc_oneshot, Method::cmc_exact, Method::model_based};
  return c;
}

double median_abs(Matrix m) {
  std::vector<double> v(m.data(), m.data() + m.size());
  for (double& x : v) x = std::abs(x);
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(GenLowrank, MagnitudeAndRank) {
  SyntheticConfig c = small_config();
  c.true_rank = 3;
  RandomSource rng(1);
  const Matrix m = gen_lowrank(c, rng);
  EXPECT_NEAR(m.cwiseAbs().mean(), 2.0, 1e-10);
  const ThinSvd svd = thin_svd(m, 25);
  EXPECT_GT(svd.singular_values(2), 1e-8 * svd.singular_values(0));
  EXPECT_LT(svd.singular_values(3), 1e-8 * svd.singular_values(0));
}

TEST(GenLowrank, HeavyTailedFactorsAreLessCoherent) {
  SyntheticConfig gauss = small_config();
  gauss.rows = gauss.cols = 100;
  gauss.true_rank = 3;
  SyntheticConfig heavy = gauss;
  heavy.factor_dist = {FactorKind::student_t, 1.2};
  double ratio_gauss = 0.0, ratio_heavy = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource a(seed), b(seed);
    const Matrix mg = gen_lowrank(gauss, a);
    const Matrix mh = gen_lowrank(heavy, b);
    ratio_gauss += mg.cwiseAbs().maxCoeff() / mg.cwiseAbs().mean();
    ratio_heavy += mh.cwiseAbs().maxCoeff() / mh.cwiseAbs().mean();
  }
  EXPECT_GT(ratio_heavy, ratio_gauss);
}

TEST(GenNoise, GaussianVariance) {
  SyntheticConfig c = small_config();
  c.rows = c.cols = 500;
  RandomSource rng(2);
  const Matrix e = gen_noise(c, Matrix(), rng);
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / (e.size() - 1);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(GenNoise, AdversarialAtHalfIsStandard) {
  SyntheticConfig c = small_config();
  c.rows = c.cols = 300;
  c.noise.kind = NoiseKind::adversarial_het;
  RandomSource a(3), b(3);
  const Matrix e = gen_noise(c, Matrix::Constant(300, 300, 0.5), a);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(e(0, i), b.normal());
  const double var = e.array().square().mean();
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(GenNoise, ScaledTMedian) {
  SyntheticConfig c = small_config();
  c.rows = c.cols = 400;
  c.noise = {NoiseKind::scaled_t, 1.0, 0.2, 1.2};
  RandomSource rng(4);
  const double med = median_abs(gen_noise(c, Matrix(), rng));
  const double expected = 0.2 * boost::math::quantile(boost::math::students_t(1.2), 0.75);
  EXPECT_NEAR(med, expected, 0.05 * expected);
}

TEST(GenNoise, RandomHetUsesFreshField) {
  SyntheticConfig c = small_config();
  c.missingness = {MissingnessKind::logistic_lowrank, 0.8, 1};
  c.noise.kind = NoiseKind::random_het;
  RandomSource rng(5);
  const Matrix p = gen_propensity(c, rng);
  RandomSource a(6), b(6);
  const Matrix e_random = gen_noise(c, p, a);
  c.noise.kind = NoiseKind::adversarial_het;
  const Matrix e_adv = gen_noise(c, p, b);
  EXPECT_NE(e_random, e_adv);
  EXPECT_TRUE(e_random.allFinite());
}

TEST(GenHeteroPropensity, Range) {
  for (Index k : {1, 5}) {
    RandomSource rng(7);
    const Matrix p = gen_hetero_propensity(60, 50, k, rng);
    const double lo = 1.0 / (1.0 + std::exp(0.5 * k)), hi = 1.0 / (1.0 + std::exp(-0.5 * k));
    EXPECT_GT(p.minCoeff(), lo);
    EXPECT_LT(p.maxCoeff(), hi);
  }
  RandomSource rng(8);
  EXPECT_THROW(gen_hetero_propensity(3, 3, 0, rng), ContractViolation);
}

TEST(Pipeline, MethodsShareBaseFit) {
  SyntheticConfig c = small_config();
  RandomSource rng(c.seed, 0);
  const SyntheticInstance inst = generate_instance(c, rng);
  const PreparedTrial trial = prepare_trial(inst.truth, inst.probabilities, c.pipeline, rng);
  const CompletionEstimate est = fit_base(trial.train, c.pipeline.base, 2, trial.p_hat_scalar);
  const IntervalMatrix mb = build_intervals(trial, est, c.pipeline, 2, Method::model_based,
                                            PropensityKind::homogeneous);
  const IntervalMatrix cmc = build_intervals(trial, est, c.pipeline, 2, Method::cmc_oneshot,
                                             PropensityKind::homogeneous);
  for (const Cell& t : cells_of(mb.target)) {
    EXPECT_NEAR(0.5 * (mb.lower(t.row, t.col) + mb.upper(t.row, t.col)), est.m_hat(t.row, t.col), 1e-12);
    EXPECT_NEAR(0.5 * (cmc.lower(t.row, t.col) + cmc.upper(t.row, t.col)), est.m_hat(t.row, t.col),
                1e-12);
  }
}

TEST(Pipeline, RecordsPerRankMethodPropensity) {
  SyntheticConfig c = small_config();
  c.pipeline.propensity_fit = {PropensityKind::homogeneous, PropensityKind::oracle};
  const auto records = run_trial(c, 1);
  // 2 ranks x (2 conformal methods x 2 propensities + model_based)
  ASSERT_EQ(records.size(), 10u);
  EXPECT_EQ(records[0].rank, 2);
  EXPECT_EQ(records[0].method, "cmc_oneshot");
  EXPECT_EQ(records[0].propensity, "homogeneous");
  EXPECT_EQ(records[4].method, "model_based");
  EXPECT_FALSE(records[4].report.delta.has_value());
  EXPECT_EQ(records[1].report.delta, 0.0);
  EXPECT_EQ(records[9].rank, 4);
  for (const auto& r : records) EXPECT_EQ(r.trial, 1u);
}

TEST(Pipeline, FullConformalRuns) {
  SyntheticConfig c = small_config();
  c.rows = c.cols = 12;
  c.pipeline.base.ranks = {2};
  c.pipeline.methods = {Method::cmc_full};
  c.pipeline.full_conformal = {5, 30, 5};
  const auto records = run_trial(c, 0);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].report.n_unobserved, 5);
  EXPECT_TRUE(std::isfinite(records[0].report.avg_length));
}

TEST(Pipeline, CvxBase) {
  SyntheticConfig c = small_config();
  c.pipeline.base.kind = BaseKind::cvx;
  c.pipeline.base.lambda = 5.0;
  c.pipeline.base.prox_iters = 100;
  const auto records = run_trial(c, 0);
  EXPECT_FALSE(records.empty());
  for (const auto& r : records) EXPECT_GT(r.report.avg_cov, 0.0);
}

TEST(Runner, DeterministicAcrossThreads) {
  const SyntheticConfig c = small_config();
  const auto one = run_simulation(c, {1, false});
  const auto many = run_simulation(c, {3, false});
  std::ostringstream a, b;
  write_records_csv(a, one);
  write_records_csv(b, many);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Runner, TrialsAreIndependentStreams) {
  SyntheticConfig c = small_config();
  const auto all = run_simulation(c);
  const auto third = run_trial(c, 2);
  const std::size_t per_trial = third.size();
  for (std::size_t k = 0; k < per_trial; ++k)
    EXPECT_EQ(all[2 * per_trial + k].report.avg_cov, third[k].report.avg_cov);
}

TEST(Runner, ErrorsCarryTrialIndex) {
  try {
    run_trials(3, 1, [](std::uint64_t t) -> std::vector<TrialRecord> {
      if (t == 1) throw NumericalError("diverged");
      return {};
    });
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("trial 1"), std::string::npos);
  }
}

TEST(EvaluateReal, EmptyObservationSet) {
  EvaluationConfig cfg;
  cfg.mask = MaskSpec::parse("homogeneous:0");
  cfg.pipeline.base.ranks = {2};
  cfg.trials = 1;
  try {
    evaluate_real(Matrix::Ones(5, 5), cfg);
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("empty observation set"), std::string::npos);
  }
}

TEST(EvaluateReal, CsvRoundTripIsBitExact) {
  SyntheticConfig c = small_config();
  RandomSource rng(11);
  const Matrix m = gen_lowrank(c, rng);
  std::stringstream csv;
  write_matrix_csv(csv, m);
  const Matrix back = read_complete_matrix_csv(csv);
  ASSERT_EQ(back, m);
  EvaluationConfig cfg;
  cfg.mask = MaskSpec::parse("het:1");
  cfg.trials = 3;
  cfg.pipeline.base.ranks = {2};
  const auto a = evaluate_real(m, cfg);
  const auto b = evaluate_real(back, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].report.avg_cov, b[k].report.avg_cov);
}

TEST(EvaluateReal, HomogeneousMaskRate) {
  // p = 0.8 observation, i.e. 1 - Z ~ Bern(0.2)
  EvaluationConfig cfg;
  cfg.mask = MaskSpec::parse("homogeneous:0.8");
  cfg.trials = 20;
  cfg.pipeline.base.ranks = {1};
  cfg.pipeline.methods = {Method::model_based};
  const auto records = evaluate_real(Matrix::Ones(50, 40), cfg);
  double frac = 0.0;
  for (const auto& r : records) frac += static_cast<double>(r.report.n_unobserved) / 2000.0 / 20.0;
  EXPECT_NEAR(frac, 0.2, 0.01);
}

TEST(MaskSpec, Parse) {
  EXPECT_EQ(MaskSpec::parse("het:5").k_star, 5);
  EXPECT_EQ(MaskSpec::parse("homogeneous:0.25").p, 0.25);
  EXPECT_THROW(MaskSpec::parse("het:0"), ContractViolation);
  EXPECT_THROW(MaskSpec::parse("homogeneous:1.5"), ContractViolation);
  EXPECT_THROW(MaskSpec::parse("homogeneous:abc"), ContractViolation);
  EXPECT_THROW(MaskSpec::parse("uniform"), ContractViolation);
}

TEST(CompleteMatrix, AllMethods) {
  SyntheticConfig c = small_config();
  c.rows = c.cols = 15;
  RandomSource rng(12);
  const Matrix m = gen_lowrank(c, rng);
  const ObservedMatrix obs = observe(m, Matrix::Constant(15, 15, 0.7), rng);
  for (Method method : {Method::cmc_oneshot, Method::cmc_exact, Method::cmc_full}) {
    CompleteOptions opt;
    opt.rank = 2;
    opt.method = method;
    opt.grid_points = 20;
    const CompleteResult r = complete_matrix(obs, opt);
    EXPECT_EQ(count(r.intervals.target), 225 - obs.observed_count());
    for (const Cell& t : cells_of(r.intervals.target))
      EXPECT_LE(r.intervals.lower(t.row, t.col), r.intervals.upper(t.row, t.col));
  }
}
