// confmc: conformalized matrix completion from the command line.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"
#include "confmc/io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

using namespace confmc;

struct Output {
  std::string records;
  std::string summary;
  std::string table;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
}

void emit(const std::vector<TrialRecord>& records, const std::string& config_json, const Output& out) {
  std::ostringstream csv;
  write_records_csv(csv, records);
  if (out.records.empty() || out.records == "-")
    std::cout << csv.str();
  else
    write_file(out.records, csv.str());
  if (!out.summary.empty()) write_file(out.summary, summary_json(records, config_json));
  if (!out.table.empty()) {
    std::ostringstream table;
    write_figure_table(table, records);
    write_file(out.table, table.str());
  }
}

Method parse_method(const std::string& s) {
  if (s == "oneshot") return Method::cmc_oneshot;
  if (s == "exact") return Method::cmc_exact;
  if (s == "full") return Method::cmc_full;
  if (s == "model") return Method::model_based;
  throw ContractViolation("unknown method '" + s + "'");
}

PropensityKind parse_propensity(const std::string& s) {
  if (s == "homogeneous") return PropensityKind::homogeneous;
  if (s == "logistic") return PropensityKind::logistic_rowcol;
  if (s == "onebit") return PropensityKind::one_bit;
  throw ContractViolation("unknown propensity '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformalized matrix completion"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a synthetic experiment");
  std::string sim_config, sim_preset;
  bool sim_desk = false, sim_timing = false;
  std::optional<std::uint64_t> sim_seed;
  unsigned sim_threads = 1;
  std::optional<int> sim_trials;
  Output sim_out;
  auto* config_opt = sim->add_option("--config", sim_config, "JSON configuration")->check(CLI::ExistingFile);
  sim->add_option("--preset", sim_preset, "setting1..setting4, het-k1, het-k5, desk")
      ->excludes(config_opt);
  sim->add_flag("--desk", sim_desk, "Shrink to d=80, r*=3, 200 trials");
  sim->add_option("--out", sim_out.records, "Results CSV (default stdout)");
  sim->add_option("--summary", sim_out.summary, "Summary JSON");
  sim->add_option("--table", sim_out.table, "Coverage/length vs rank table (CSV)");
  sim->add_option("--seed", sim_seed, "Override the configured seed");
  sim->add_option("--trials", sim_trials, "Override the number of trials");
  sim->add_option("--threads", sim_threads, "Worker threads (0 = all cores)");
  sim->add_flag("--timing", sim_timing, "Record wall-clock runtime_ms (breaks byte-identical output)");

  // complete
  auto* comp = app.add_subcommand("complete", "Intervals for the missing entries of a CSV matrix");
  std::string comp_matrix, comp_out, comp_method = "oneshot", comp_propensity = "homogeneous";
  CompleteOptions comp_opts;
  comp->add_option("--matrix", comp_matrix, "CSV with empty cells for missing entries")
      ->required()
      ->check(CLI::ExistingFile);
  comp->add_option("--alpha", comp_opts.alpha, "Miscoverage level")->capture_default_str();
  comp->add_option("--rank", comp_opts.rank, "Hypothesized rank")->required();
  comp->add_option("--method", comp_method, "oneshot | exact | full | model")->capture_default_str();
  comp->add_option("--propensity", comp_propensity, "homogeneous | logistic | onebit")
      ->capture_default_str();
  comp->add_option("--split", comp_opts.split_prob, "Training fraction q")->capture_default_str();
  comp->add_option("--seed", comp_opts.seed, "Split seed")->capture_default_str();
  comp->add_option("--grid", comp_opts.grid_points, "Full conformal grid size")->capture_default_str();
  comp->add_option("--threads", comp_opts.threads, "Worker threads for full conformal");
  comp->add_option("--out", comp_out, "Output CSV (default stdout)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Masked evaluation of a fully known CSV matrix");
  std::string eval_matrix, eval_mask = "homogeneous:0.8", eval_config;
  EvaluationConfig eval_cfg;
  std::vector<Index> eval_ranks{2};
  std::vector<std::string> eval_methods{"oneshot", "model"};
  std::vector<std::string> eval_propensity{"homogeneous"};
  unsigned eval_threads = 1;
  bool eval_timing = false;
  Output eval_out;
  eval->add_option("--matrix", eval_matrix, "Complete numeric CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--mask", eval_mask, "homogeneous:<p> | het:<k>")->capture_default_str();
  eval->add_option("--trials", eval_cfg.trials, "Number of masking trials")->capture_default_str();
  eval->add_option("--ranks", eval_ranks, "Hypothesized ranks")->capture_default_str();
  eval->add_option("--methods", eval_methods, "oneshot exact full model")->capture_default_str();
  eval->add_option("--propensity", eval_propensity, "homogeneous logistic onebit oracle")
      ->capture_default_str();
  eval->add_option("--alpha", eval_cfg.pipeline.alpha, "Miscoverage level")->capture_default_str();
  eval->add_option("--split", eval_cfg.pipeline.split_prob, "Training fraction q")->capture_default_str();
  eval->add_option("--seed", eval_cfg.seed, "Seed")->capture_default_str();
  eval->add_option("--label", eval_cfg.label, "Label written to every row")->capture_default_str();
  eval->add_option("--threads", eval_threads, "Worker threads (0 = all cores)");
  eval->add_flag("--timing", eval_timing, "Record wall-clock runtime_ms");
  eval->add_option("--out", eval_out.records, "Results CSV (default stdout)");
  eval->add_option("--summary", eval_out.summary, "Summary JSON");
  eval->add_option("--table", eval_out.table, "Coverage/length vs rank table (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) {
      SyntheticConfig config;
      if (!sim_config.empty())
        config = load_config(sim_config);
      else
        config = preset_config(sim_preset.empty() ? "desk" : sim_preset);
      if (sim_desk) apply_desk_scale(config);
      if (sim_seed) config.seed = *sim_seed;
      if (sim_trials) config.trials = *sim_trials;
      try {
        config.validate();
      } catch (const ContractViolation& e) {
        throw ParseError(std::string("config: ") + e.what());
      }
      const auto records = run_simulation(config, {sim_threads, sim_timing});
      emit(records, config_to_json(config), sim_out);
    } else if (*comp) {
      comp_opts.method = parse_method(comp_method);
      comp_opts.propensity = parse_propensity(comp_propensity);
      const ObservedMatrix obs = read_matrix_csv(std::filesystem::path(comp_matrix));
      const CompleteResult result = complete_matrix(obs, comp_opts);
      for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';
      std::ostringstream csv;
      write_intervals_csv(csv, result.m_hat, result.intervals);
      if (comp_out.empty() || comp_out == "-")
        std::cout << csv.str();
      else
        write_file(comp_out, csv.str());
    } else if (*eval) {
      eval_cfg.mask = MaskSpec::parse(eval_mask);
      eval_cfg.pipeline.base.ranks = eval_ranks;
      eval_cfg.pipeline.methods.clear();
      for (const auto& m : eval_methods) eval_cfg.pipeline.methods.push_back(parse_method(m));
      eval_cfg.pipeline.propensity_fit.clear();
      for (const auto& p : eval_propensity)
        eval_cfg.pipeline.propensity_fit.push_back(p == "oracle" ? PropensityKind::oracle
                                                                 : parse_propensity(p));
      const auto records =
          evaluate_real(std::filesystem::path(eval_matrix), eval_cfg, {eval_threads, eval_timing});
      emit(records, "", eval_out);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
