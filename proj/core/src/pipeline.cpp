#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"

namespace confmc {

namespace {

constexpr std::uint64_t kObserveStream = 4;
constexpr std::uint64_t kSplitStream = 5;

Matrix fit_odds(PropensityKind kind, const Mask& train, double q, const Matrix& probabilities,
                const OneBitSettings& one_bit) {
  switch (kind) {
    case PropensityKind::homogeneous:
      return odds(fit_homogeneous(train, q));
    case PropensityKind::logistic_rowcol:
      return odds(fit_logistic_rowcol(train, q).model);
    case PropensityKind::one_bit: {
      OneBitConfig config;
      config.tau = one_bit.tau;
      config.k_star = one_bit.k_star.value_or(1);
      config.iters = one_bit.iters;
      return odds(fit_onebit(train, q, config).model);
    }
    case PropensityKind::oracle:
      if (probabilities.size() == 0)
        throw ContractViolation("oracle propensity requires the true probabilities");
      return odds(PropensityModel(probabilities, PropensityKind::oracle));
  }
  throw ContractViolation("unknown propensity kind");
}

std::vector<Cell> strided_cells(const Mask& mask, std::size_t limit) {
  std::vector<Cell> all = cells_of(mask);
  if (all.size() <= limit) return all;
  std::vector<Cell> out;
  out.reserve(limit);
  for (std::size_t k = 0; k < limit; ++k) out.push_back(all[k * all.size() / limit]);
  return out;
}

RefitProcedure als_refit(Index rank, int sweeps) {
  return [rank, sweeps](const ObservedMatrix& aug) {
    AlsOptions options;
    options.rank = rank;
    options.max_sweeps = sweeps;
    const AlsFit fit = als_fit(aug, options);
    const double p_hat = std::min(
        1.0, static_cast<double>(aug.observed_count()) / static_cast<double>(aug.rows() * aug.cols()));
    CompletionEstimate est = make_estimate(aug, fit.factors, p_hat);
    return RefitOutput{std::move(est.m_hat), std::move(est.s_hat)};
  };
}

/// Intervals from the hull of each full-conformal prediction set.
IntervalMatrix full_intervals(const ObservedMatrix& obs, const Matrix& odds_matrix, Index rank,
                              int sweeps, std::size_t grid_points, double alpha,
                              const std::vector<Cell>& targets, const Matrix& fallback,
                              unsigned threads, std::vector<std::string>& warnings) {
  const std::vector<double> grid = default_grid(obs, grid_points);
  FullConformalResult result =
      full_cmc_intervals(obs, odds_matrix, als_refit(rank, sweeps), grid, alpha, targets, threads);
  Mask target = Mask::Constant(obs.rows(), obs.cols(), false);
  for (const Cell& c : targets) target(c.row, c.col) = true;
  IntervalMatrix iv = IntervalMatrix::empty_like(target);
  for (const FullConformalSet& set : result.sets) {
    const Index i = set.target.row, j = set.target.col;
    if (set.empty()) {
      iv.lower(i, j) = iv.upper(i, j) = fallback(i, j);
      iv.q_hat(i, j) = 0.0;
      warnings.push_back("full conformal set empty at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      continue;
    }
    iv.lower(i, j) = set.lower;
    iv.upper(i, j) = set.upper;
    iv.q_hat(i, j) = 0.5 * (set.upper - set.lower);
  }
  for (std::string& w : result.warnings) warnings.push_back(std::move(w));
  return iv;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

PreparedTrial prepare_trial(const Matrix& truth, const Matrix& probabilities,
                            const PipelineSettings& settings, RandomSource& rng) {
  settings.validate();
  if (truth.rows() != probabilities.rows() || truth.cols() != probabilities.cols())
    throw ContractViolation("prepare_trial: truth and probabilities differ in shape");
  RandomSource observe_rng = rng.substream(kObserveStream);
  RandomSource split_rng = rng.substream(kSplitStream);
  ObservedMatrix observed = observe(truth, probabilities, observe_rng);
  if (observed.observed_count() == 0) throw ContractViolation("empty observation set");
  MaskSplit split = split_observed(observed, settings.split_prob, split_rng);
  ObservedMatrix train = observed.restrict_to(split.train);
  PreparedTrial trial{truth, probabilities, std::move(observed), std::move(split), std::move(train)};
  trial.p_hat_scalar = fit_homogeneous(trial.split).probabilities()(0, 0);
  for (PropensityKind kind : settings.propensity_fit) {
    const bool seen = std::any_of(trial.odds.begin(), trial.odds.end(),
                                  [kind](const FittedOdds& f) { return f.kind == kind; });
    if (seen) continue;
    trial.odds.push_back(
        {kind, fit_odds(kind, trial.split.train, settings.split_prob, probabilities, settings.one_bit)});
  }
  trial.true_odds = odds(PropensityModel(probabilities, PropensityKind::oracle));
  return trial;
}

CompletionEstimate fit_base(const ObservedMatrix& train, const BaseLearner& base, Index rank,
                            double p_hat_scalar) {
  if (base.kind == BaseKind::als) {
    AlsOptions options;
    options.rank = rank;
    options.max_sweeps = base.sweeps;
    return make_estimate(train, als_fit(train, options).factors, p_hat_scalar);
  }
  ProxOptions options;
  options.lambda = base.lambda;
  options.max_iters = base.prox_iters;
  const ProxFit fit = prox_nuclear_fit(train, options);
  return make_estimate(train, truncate_to_rank(fit.estimate, rank), p_hat_scalar);
}

const Matrix& odds_for(const PreparedTrial& trial, PropensityKind kind) {
  for (const FittedOdds& f : trial.odds)
    if (f.kind == kind) return f.odds;
  throw ContractViolation("propensity '" + std::string(to_string(kind)) + "' was not fitted");
}

IntervalMatrix build_intervals(const PreparedTrial& trial, const CompletionEstimate& est,
                               const PipelineSettings& settings, Index rank, Method method,
                               PropensityKind propensity) {
  switch (method) {
    case Method::model_based:
      return model_based_intervals(est.m_hat, est.s_hat, settings.alpha, trial.observed.unobserved());
    case Method::cmc_oneshot:
      return cmc_intervals(est, odds_for(trial, propensity), trial.split, trial.observed,
                           settings.alpha);
    case Method::cmc_exact:
      return exact_split_intervals(est, odds_for(trial, propensity), trial.split, trial.observed,
                                   settings.alpha);
    case Method::cmc_full: {
      const auto& fc = settings.full_conformal;
      std::vector<std::string> warnings;
      return full_intervals(trial.observed, odds_for(trial, propensity), rank, fc.refit_sweeps,
                            fc.grid_points, settings.alpha,
                            strided_cells(trial.observed.unobserved(), fc.targets), est.m_hat, 1,
                            warnings);
    }
  }
  throw ContractViolation("unknown method");
}

std::vector<TrialRecord> run_pipeline(const PreparedTrial& trial, const PipelineSettings& settings,
                                      const std::string& label, std::uint64_t seed,
                                      std::uint64_t trial_index, bool timing) {
  std::vector<TrialRecord> out;
  std::vector<std::optional<double>> gaps(trial.odds.size());
  const Mask test = trial.observed.unobserved();
  auto gap_for = [&](PropensityKind kind) {
    if (kind == PropensityKind::oracle) return 0.0;
    for (std::size_t k = 0; k < trial.odds.size(); ++k)
      if (trial.odds[k].kind == kind) {
        if (!gaps[k])
          gaps[k] = mean_estimation_gap(trial.odds[k].odds, trial.true_odds, trial.split.calibration, test);
        return *gaps[k];
      }
    throw ContractViolation("propensity not fitted");
  };

  for (Index rank : settings.base.ranks) {
    const auto base_start = std::chrono::steady_clock::now();
    const CompletionEstimate est = fit_base(trial.train, settings.base, rank, trial.p_hat_scalar);
    const double base_ms = timing ? elapsed_ms(base_start) : 0.0;
    for (Method method : settings.methods) {
      std::vector<std::optional<PropensityKind>> kinds;
      if (method == Method::model_based) {
        kinds.push_back(std::nullopt);
      } else {
        for (PropensityKind k : settings.propensity_fit) kinds.push_back(k);
      }
      for (const auto& kind : kinds) {
        const auto start = std::chrono::steady_clock::now();
        const IntervalMatrix iv = build_intervals(trial, est, settings, rank, method,
                                                  kind.value_or(PropensityKind::homogeneous));
        TrialRecord rec;
        rec.label = label;
        rec.rank = rank;
        rec.method = std::string(to_string(method));
        rec.propensity = kind ? std::string(to_string(*kind)) : "none";
        rec.seed = seed;
        rec.trial = trial_index;
        rec.report = make_report(iv, trial.truth, seed);
        if (kind && (method == Method::cmc_oneshot || method == Method::cmc_exact))
          rec.report.delta = gap_for(*kind);
        rec.runtime_ms = timing ? base_ms + elapsed_ms(start) : 0.0;
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

std::vector<TrialRecord> run_trial(const SyntheticConfig& config, std::uint64_t trial_index,
                                   bool timing) {
  config.validate();
  RandomSource rng(config.seed, trial_index);
  const SyntheticInstance inst = generate_instance(config, rng);
  PipelineSettings settings = config.pipeline;
  if (!settings.one_bit.k_star)
    settings.one_bit.k_star =
        config.missingness.kind == MissingnessKind::logistic_lowrank ? config.missingness.k_star : 1;
  const PreparedTrial trial = prepare_trial(inst.truth, inst.probabilities, settings, rng);
  return run_pipeline(trial, settings, config.label, config.seed, trial_index, timing);
}

MaskSpec MaskSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ContractViolation("mask spec must be 'homogeneous:<p>' or 'het:<k>'");
  const std::string kind(text.substr(0, colon));
  const std::string value(text.substr(colon + 1));
  MaskSpec spec;
  std::size_t used = 0;
  try {
    if (kind == "homogeneous") {
      spec.kind = Kind::homogeneous;
      spec.p = std::stod(value, &used);
      if (!(spec.p >= 0.0 && spec.p <= 1.0)) throw ContractViolation("mask probability must lie in [0, 1]");
    } else if (kind == "het") {
      spec.kind = Kind::heterogeneous;
      const long k = std::stol(value, &used);
      if (k < 1) throw ContractViolation("het mask rank must be positive");
      spec.k_star = static_cast<Index>(k);
    } else {
      throw ContractViolation("unknown mask kind '" + kind + "'");
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ContractViolation*>(&e)) throw;
    throw ContractViolation("malformed mask spec '" + std::string(text) + "'");
  }
  if (used != value.size()) throw ContractViolation("malformed mask spec '" + std::string(text) + "'");
  return spec;
}

std::vector<TrialRecord> evaluate_real(const Matrix& matrix, const EvaluationConfig& config,
                                       const RunOptions& options) {
  if (matrix.size() == 0) throw ContractViolation("evaluate_real: empty matrix");
  if (!matrix.allFinite()) throw ContractViolation("evaluate_real: matrix must be finite");
  if (config.trials < 1) throw ContractViolation("trials must be positive");
  PipelineSettings settings = config.pipeline;
  settings.validate();
  for (Index r : settings.base.ranks)
    if (r > std::min(matrix.rows(), matrix.cols()))
      throw ContractViolation("hypothesized rank exceeds min(d1, d2)");
  if (!settings.one_bit.k_star)
    settings.one_bit.k_star = config.mask.kind == MaskSpec::Kind::heterogeneous ? config.mask.k_star : 1;
  return run_trials(config.trials, options.threads, [&](std::uint64_t t) {
    RandomSource rng(config.seed, t);
    Matrix p;
    if (config.mask.kind == MaskSpec::Kind::homogeneous) {
      p = Matrix::Constant(matrix.rows(), matrix.cols(), config.mask.p);
    } else {
      RandomSource propensity_rng = rng.substream(2);
      p = gen_hetero_propensity(matrix.rows(), matrix.cols(), config.mask.k_star, propensity_rng);
    }
    const PreparedTrial trial = prepare_trial(matrix, p, settings, rng);
    return run_pipeline(trial, settings, config.label, config.seed, t, options.timing);
  });
}

CompleteResult complete_matrix(const ObservedMatrix& obs, const CompleteOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ContractViolation("alpha must lie in (0, 1)");
  if (options.rank < 1 || options.rank > std::min(obs.rows(), obs.cols()))
    throw ContractViolation("rank must lie in [1, min(d1, d2)]");
  if (obs.observed_count() == 0) throw ContractViolation("empty observation set");
  OneBitSettings one_bit = options.one_bit;
  if (!one_bit.k_star) one_bit.k_star = 1;
  BaseLearner base;
  base.sweeps = options.sweeps;

  CompleteResult result;
  if (options.method == Method::cmc_full) {
    const Matrix h = fit_odds(options.propensity, obs.mask(), 1.0, Matrix(), one_bit);
    const double p_all = std::min(1.0, static_cast<double>(obs.observed_count()) /
                                           static_cast<double>(obs.rows() * obs.cols()));
    result.m_hat = fit_base(obs, base, options.rank, p_all).m_hat;
    result.intervals = full_intervals(obs, h, options.rank, options.refit_sweeps, options.grid_points,
                                      options.alpha, cells_of(obs.unobserved()), result.m_hat,
                                      options.threads, result.warnings);
    return result;
  }

  RandomSource rng(options.seed);
  RandomSource split_rng = rng.substream(kSplitStream);
  const MaskSplit split = split_observed(obs, options.split_prob, split_rng);
  const ObservedMatrix train = obs.restrict_to(split.train);
  if (train.observed_count() == 0) throw ContractViolation("empty training set");
  const double p_hat = fit_homogeneous(split).probabilities()(0, 0);
  const CompletionEstimate est = fit_base(train, base, options.rank, p_hat);
  result.m_hat = est.m_hat;
  if (options.method == Method::model_based) {
    result.intervals = model_based_intervals(est.m_hat, est.s_hat, options.alpha, obs.unobserved());
    return result;
  }
  const Matrix h = fit_odds(options.propensity, split.train, options.split_prob, Matrix(), one_bit);
  result.intervals = options.method == Method::cmc_exact
                         ? exact_split_intervals(est, h, split, obs, options.alpha)
                         : cmc_intervals(est, h, split, obs, options.alpha);
  return result;
}

}  // namespace confmc
