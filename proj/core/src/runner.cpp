#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"
#include "confmc/io.hpp"

namespace confmc {

namespace {

std::exception_ptr with_trial_context(std::uint64_t trial) {
  const std::string prefix = "trial " + std::to_string(trial) + ": ";
  try {
    throw;
  } catch (const ContractViolation& e) {
    return std::make_exception_ptr(ContractViolation(prefix + e.what()));
  } catch (const NumericalError& e) {
    return std::make_exception_ptr(NumericalError(prefix + e.what()));
  } catch (const ParseError& e) {
    return std::make_exception_ptr(ParseError(prefix + e.what()));
  } catch (const std::exception& e) {
    return std::make_exception_ptr(std::runtime_error(prefix + e.what()));
  } catch (...) {
    return std::current_exception();
  }
}

std::vector<Index> desk_ranks() { return {3, 20}; }

SyntheticConfig homogeneous_preset(std::string label, double p) {
  SyntheticConfig c;
  c.label = std::move(label);
  c.rows = c.cols = 500;
  c.true_rank = 8;
  c.missingness.kind = MissingnessKind::homogeneous;
  c.missingness.p = p;
  c.trials = 100;
  c.pipeline.base.ranks.clear();
  for (Index r = 2; r <= 40; r += 2) c.pipeline.base.ranks.push_back(r);
  c.pipeline.methods = {Method::cmc_oneshot, Method::model_based};
  c.pipeline.propensity_fit = {PropensityKind::homogeneous};
  return c;
}

SyntheticConfig het_preset(std::string label, Index k_star) {
  SyntheticConfig c = homogeneous_preset(std::move(label), 0.8);
  c.missingness.kind = MissingnessKind::logistic_lowrank;
  c.missingness.k_star = k_star;
  c.noise.kind = NoiseKind::adversarial_het;
  c.pipeline.methods = {Method::cmc_oneshot};
  c.pipeline.propensity_fit = {PropensityKind::oracle, PropensityKind::one_bit};
  return c;
}

}  // namespace

std::vector<TrialRecord> run_trials(int trials, unsigned threads, const TrialFunction& fn) {
  if (trials < 1) throw ContractViolation("trials must be positive");
  const std::size_t n = static_cast<std::size_t>(trials);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::vector<std::vector<TrialRecord>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t k = next++; k < n && !failed; k = next++) {
      try {
        slots[k] = fn(k);
      } catch (...) {
        errors[k] = with_trial_context(k);
        failed = true;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<TrialRecord> out;
  for (auto& slot : slots)
    for (auto& rec : slot) out.push_back(std::move(rec));
  return out;
}

std::vector<TrialRecord> run_simulation(const SyntheticConfig& config, const RunOptions& options) {
  config.validate();
  return run_trials(config.trials, options.threads,
                    [&](std::uint64_t t) { return run_trial(config, t, options.timing); });
}

std::vector<TrialRecord> evaluate_real(const std::filesystem::path& csv, const EvaluationConfig& config,
                                       const RunOptions& options) {
  return evaluate_real(read_complete_matrix_csv(csv), config, options);
}

std::vector<std::string> preset_names() {
  return {"setting1", "setting2", "setting3", "setting4", "het-k1", "het-k5", "desk"};
}

SyntheticConfig preset_config(std::string_view name) {
  if (name == "setting1") return homogeneous_preset("setting1", 0.8);
  if (name == "setting2") return homogeneous_preset("setting2", 0.2);
  if (name == "setting3") {
    SyntheticConfig c = homogeneous_preset("setting3", 0.8);
    c.noise.kind = NoiseKind::scaled_t;
    c.noise.scale = 0.2;
    c.noise.df = 1.2;
    return c;
  }
  if (name == "setting4") {
    SyntheticConfig c = homogeneous_preset("setting4", 0.8);
    c.factor_dist.kind = FactorKind::student_t;
    c.factor_dist.df = 1.2;
    return c;
  }
  if (name == "het-k1") return het_preset("het-k1", 1);
  if (name == "het-k5") return het_preset("het-k5", 5);
  if (name == "desk") {
    SyntheticConfig c = homogeneous_preset("desk", 0.5);
    apply_desk_scale(c);
    return c;
  }
  throw ContractViolation("unknown preset '" + std::string(name) + "'");
}

void apply_desk_scale(SyntheticConfig& config) {
  config.rows = config.cols = 80;
  config.true_rank = 3;
  config.trials = 200;
  config.pipeline.base.ranks = desk_ranks();
}

}  // namespace confmc
