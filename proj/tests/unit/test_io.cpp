#include <sstream>

#include <gtest/gtest.h>

#include "confmc/error.hpp"
#include "confmc/experiments.hpp"
#include "confmc/io.hpp"

using namespace confmc;

TEST(Csv, EmptyCellsAreMissing) {
  std::istringstream in("1,,3\n4,5,\n");
  const ObservedMatrix obs = read_matrix_csv(in);
  EXPECT_EQ(obs.rows(), 2);
  EXPECT_EQ(obs.cols(), 3);
  EXPECT_FALSE(obs.observed(0, 1));
  EXPECT_FALSE(obs.observed(1, 2));
  EXPECT_EQ(obs.values()(1, 1), 5.0);
  std::ostringstream out;
  write_matrix_csv(out, obs);
  EXPECT_EQ(out.str(), "1,,3\n4,5,\n");
}

TEST(Csv, ErrorsCarryLocation) {
  std::istringstream bad("1,2\n3,x\n");
  try {
    read_matrix_csv(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(ragged), ParseError);
  std::istringstream missing("1,2\n3,\n");
  try {
    read_complete_matrix_csv(missing);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
  std::istringstream empty("");
  EXPECT_THROW(read_matrix_csv(empty), ParseError);
  std::istringstream inf("1,inf\n");
  EXPECT_THROW(read_matrix_csv(inf), ParseError);
}

TEST(Csv, CrLfAndTrailingBlank) {
  std::istringstream in("1, 2\r\n3 ,4\r\n\n");
  const Matrix m = read_complete_matrix_csv(in);
  EXPECT_EQ(m, (Matrix{{1, 2}, {3, 4}}));
}

TEST(FormatDouble, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Config, RoundTrip) {
  const SyntheticConfig c = preset_config("het-k5");
  const SyntheticConfig back = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(R"({"label":"x","bogus":1})"), ParseError);
  EXPECT_THROW(parse_config(R"({"noise":{"kind":"gaussian","sgima":1}})"), ParseError);
  EXPECT_THROW(parse_config(R"({"method":["cmc_magic"]})"), ParseError);
  EXPECT_THROW(parse_config(R"({"dims":[10]})"), ParseError);
  EXPECT_THROW(parse_config(R"({"alpha":1.5})"), ParseError);
  EXPECT_THROW(parse_config("{not json"), ParseError);
}

TEST(Config, Fields) {
  const SyntheticConfig c = parse_config(R"({
    "label": "t", "dims": [40, 30], "true_rank": 2,
    "factor_dist": {"kind": "student_t", "df": 2.5},
    "noise": {"kind": "scaled_t", "scale": 0.5, "df": 3},
    "missingness": {"kind": "logistic_lowrank", "k_star": 2},
    "alpha": 0.2, "trials": 7, "split_prob": 0.7,
    "base": {"kind": "cvx", "lambda": 3, "ranks": [1, 2]},
    "propensity_fit": "one_bit", "method": ["cmc_exact"],
    "one_bit": {"tau": 2, "k_star": 3}, "seed": 99
  })");
  EXPECT_EQ(c.rows, 40);
  EXPECT_EQ(c.cols, 30);
  EXPECT_EQ(c.factor_dist.kind, FactorKind::student_t);
  EXPECT_EQ(c.noise.df, 3.0);
  EXPECT_EQ(c.missingness.k_star, 2);
  EXPECT_EQ(c.pipeline.base.kind, BaseKind::cvx);
  EXPECT_EQ(c.pipeline.base.ranks, (std::vector<Index>{1, 2}));
  EXPECT_EQ(c.pipeline.propensity_fit, std::vector<PropensityKind>{PropensityKind::one_bit});
  EXPECT_EQ(*c.pipeline.one_bit.k_star, 3);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.trials, 7);
}

TEST(Presets, PaperParameterizations) {
  for (const std::string name : {"setting1", "setting2", "setting3", "setting4", "het-k1", "het-k5"}) {
    const SyntheticConfig c = preset_config(name);
    EXPECT_EQ(c.rows, 500) << name;
    EXPECT_EQ(c.cols, 500);
    EXPECT_EQ(c.true_rank, 8);
    EXPECT_EQ(c.trials, 100);
    EXPECT_EQ(c.pipeline.alpha, 0.1);
    EXPECT_EQ(c.pipeline.base.ranks.front(), 2);
    EXPECT_EQ(c.pipeline.base.ranks.back(), 40);
  }
  EXPECT_EQ(preset_config("setting1").missingness.p, 0.8);
  EXPECT_EQ(preset_config("setting2").missingness.p, 0.2);
  EXPECT_EQ(preset_config("setting3").noise.kind, NoiseKind::scaled_t);
  EXPECT_EQ(preset_config("setting3").noise.scale, 0.2);
  EXPECT_EQ(preset_config("setting3").noise.df, 1.2);
  EXPECT_EQ(preset_config("setting4").factor_dist.kind, FactorKind::student_t);
  EXPECT_EQ(preset_config("setting4").noise.kind, NoiseKind::gaussian);
  EXPECT_EQ(preset_config("het-k1").missingness.k_star, 1);
  EXPECT_EQ(preset_config("het-k5").missingness.k_star, 5);
  const SyntheticConfig desk = preset_config("desk");
  EXPECT_EQ(desk.rows, 80);
  EXPECT_EQ(desk.true_rank, 3);
  EXPECT_EQ(desk.trials, 200);
  EXPECT_EQ(desk.missingness.p, 0.5);
  EXPECT_THROW(preset_config("setting9"), ContractViolation);
}

TEST(Output, SummaryAndTable) {
  TrialRecord a;
  a.label = "x";
  a.rank = 2;
  a.method = "cmc_oneshot";
  a.propensity = "homogeneous";
  a.report.avg_cov = 0.8;
  a.report.avg_length = 1.0;
  a.report.delta = 0.0;
  TrialRecord b = a;
  b.trial = 1;
  b.report.avg_cov = 1.0;
  const std::vector<TrialRecord> records{a, b};
  std::ostringstream table;
  write_figure_table(table, records);
  EXPECT_NE(table.str().find("x,2,cmc_oneshot,homogeneous,2,0.90000000000000002"), std::string::npos);
  const std::string json = summary_json(records, "");
  EXPECT_NE(json.find("\"trials\": 2"), std::string::npos);
  std::ostringstream csv;
  write_records_csv(csv, records);
  EXPECT_NE(csv.str().find("x,2,cmc_oneshot,homogeneous,0,1,1,1,0,0,0,0"), std::string::npos);
}
