#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "confmc/error.hpp"
#include "confmc/io.hpp"

namespace confmc {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw ParseError("config: " + message); }

class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail((path_.empty() ? "top level" : "'" + path_ + "'") + " must be an object");
  }

  const json* find(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail("'" + path(key) + "' must be a number");
    return v->get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail("'" + path(key) + "' must be an integer");
    return v->get<std::int64_t>();
  }

  std::string string(const char* key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail("'" + path(key) + "' must be a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.contains(key)) fail("unknown key '" + path(key.c_str()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const Enum (&values)[N], const std::string& where) {
  for (Enum e : values)
    if (to_string(e) == text) return e;
  fail("unknown value '" + text + "' for '" + where + "'");
}

constexpr FactorKind kFactorKinds[] = {FactorKind::gaussian, FactorKind::student_t};
constexpr NoiseKind kNoiseKinds[] = {NoiseKind::gaussian, NoiseKind::scaled_t, NoiseKind::adversarial_het,
                                     NoiseKind::random_het};
constexpr MissingnessKind kMissingnessKinds[] = {MissingnessKind::homogeneous,
                                                 MissingnessKind::logistic_lowrank};
constexpr BaseKind kBaseKinds[] = {BaseKind::als, BaseKind::cvx};
constexpr Method kMethods[] = {Method::cmc_oneshot, Method::cmc_exact, Method::cmc_full,
                               Method::model_based};
constexpr PropensityKind kPropensityKinds[] = {PropensityKind::homogeneous, PropensityKind::logistic_rowcol,
                                               PropensityKind::one_bit, PropensityKind::oracle};

template <typename Enum, std::size_t N>
std::vector<Enum> parse_enum_list(const json* v, const Enum (&values)[N], const std::string& where) {
  std::vector<Enum> out;
  if (v->is_string()) {
    out.push_back(parse_enum(v->get<std::string>(), values, where));
    return out;
  }
  if (!v->is_array() || v->empty()) fail("'" + where + "' must be a string or non-empty array");
  for (const json& item : *v) {
    if (!item.is_string()) fail("'" + where + "' entries must be strings");
    out.push_back(parse_enum(item.get<std::string>(), values, where));
  }
  return out;
}

void parse_base(const json& j, BaseLearner& base) {
  Object o(j, "base");
  base.kind = parse_enum(o.string("kind", std::string(to_string(base.kind))), kBaseKinds, "base.kind");
  if (const json* r = o.find("ranks")) {
    base.ranks.clear();
    if (r->is_number_integer()) {
      base.ranks.push_back(r->get<Index>());
    } else if (r->is_array() && !r->empty()) {
      for (const json& item : *r) {
        if (!item.is_number_integer()) fail("'base.ranks' entries must be integers");
        base.ranks.push_back(item.get<Index>());
      }
    } else {
      fail("'base.ranks' must be an integer or non-empty array");
    }
  }
  base.lambda = o.number("lambda", base.lambda);
  base.sweeps = static_cast<int>(o.integer("sweeps", base.sweeps));
  base.prox_iters = static_cast<int>(o.integer("prox_iters", base.prox_iters));
  o.finish();
}

SyntheticConfig from_json(const json& root) {
  SyntheticConfig c;
  Object o(root, "");
  c.label = o.string("label", c.label);
  if (const json* dims = o.find("dims")) {
    if (!dims->is_array() || dims->size() != 2 || !(*dims)[0].is_number_integer() ||
        !(*dims)[1].is_number_integer())
      fail("'dims' must be [d1, d2]");
    c.rows = (*dims)[0].get<Index>();
    c.cols = (*dims)[1].get<Index>();
  }
  c.true_rank = o.integer("true_rank", c.true_rank);
  c.kappa_target_magnitude = o.number("kappa_target_magnitude", c.kappa_target_magnitude);
  if (const json* f = o.find("factor_dist")) {
    Object fo(*f, "factor_dist");
    c.factor_dist.kind = parse_enum(fo.string("kind", "gaussian"), kFactorKinds, "factor_dist.kind");
    c.factor_dist.df = fo.number("df", c.factor_dist.df);
    fo.finish();
  }
  if (const json* n = o.find("noise")) {
    Object no(*n, "noise");
    c.noise.kind = parse_enum(no.string("kind", "gaussian"), kNoiseKinds, "noise.kind");
    c.noise.sigma = no.number("sigma", c.noise.sigma);
    c.noise.scale = no.number("scale", c.noise.scale);
    c.noise.df = no.number("df", c.noise.df);
    no.finish();
  }
  if (const json* m = o.find("missingness")) {
    Object mo(*m, "missingness");
    c.missingness.kind =
        parse_enum(mo.string("kind", "homogeneous"), kMissingnessKinds, "missingness.kind");
    c.missingness.p = mo.number("p", c.missingness.p);
    c.missingness.k_star = mo.integer("k_star", c.missingness.k_star);
    mo.finish();
  }
  PipelineSettings& p = c.pipeline;
  p.alpha = o.number("alpha", p.alpha);
  c.trials = static_cast<int>(o.integer("trials", c.trials));
  p.split_prob = o.number("split_prob", p.split_prob);
  if (const json* b = o.find("base")) parse_base(*b, p.base);
  if (const json* v = o.find("propensity_fit"))
    p.propensity_fit = parse_enum_list(v, kPropensityKinds, "propensity_fit");
  if (const json* v = o.find("method")) p.methods = parse_enum_list(v, kMethods, "method");
  if (const json* v = o.find("one_bit")) {
    Object bo(*v, "one_bit");
    p.one_bit.tau = bo.number("tau", p.one_bit.tau);
    if (bo.find("k_star")) p.one_bit.k_star = bo.integer("k_star", 1);
    p.one_bit.iters = static_cast<int>(bo.integer("iters", p.one_bit.iters));
    bo.finish();
  }
  if (const json* v = o.find("full_conformal")) {
    Object fo(*v, "full_conformal");
    p.full_conformal.targets = static_cast<std::size_t>(
        fo.integer("targets", static_cast<std::int64_t>(p.full_conformal.targets)));
    p.full_conformal.grid_points = static_cast<std::size_t>(
        fo.integer("grid_points", static_cast<std::int64_t>(p.full_conformal.grid_points)));
    p.full_conformal.refit_sweeps =
        static_cast<int>(fo.integer("refit_sweeps", p.full_conformal.refit_sweeps));
    fo.finish();
  }
  if (const json* s = o.find("seed")) {
    if (!s->is_number_unsigned()) fail("'seed' must be a nonnegative integer");
    c.seed = s->get<std::uint64_t>();
  }
  o.finish();
  return c;
}

template <typename Enum>
json enum_list(const std::vector<Enum>& values) {
  json out = json::array();
  for (Enum e : values) out.push_back(std::string(to_string(e)));
  return out;
}

}  // namespace

SyntheticConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(e.what());
  }
  SyntheticConfig config = from_json(root);
  try {
    config.validate();
  } catch (const ContractViolation& e) {
    fail(e.what());
  }
  return config;
}

SyntheticConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const SyntheticConfig& c) {
  json j;
  j["label"] = c.label;
  j["dims"] = {c.rows, c.cols};
  j["true_rank"] = c.true_rank;
  j["kappa_target_magnitude"] = c.kappa_target_magnitude;
  j["factor_dist"] = {{"kind", to_string(c.factor_dist.kind)}, {"df", c.factor_dist.df}};
  j["noise"] = {{"kind", to_string(c.noise.kind)},
                {"sigma", c.noise.sigma},
                {"scale", c.noise.scale},
                {"df", c.noise.df}};
  j["missingness"] = {
      {"kind", to_string(c.missingness.kind)}, {"p", c.missingness.p}, {"k_star", c.missingness.k_star}};
  const PipelineSettings& p = c.pipeline;
  j["alpha"] = p.alpha;
  j["trials"] = c.trials;
  j["split_prob"] = p.split_prob;
  j["base"] = {{"kind", to_string(p.base.kind)},
               {"ranks", p.base.ranks},
               {"lambda", p.base.lambda},
               {"sweeps", p.base.sweeps},
               {"prox_iters", p.base.prox_iters}};
  j["propensity_fit"] = enum_list(p.propensity_fit);
  j["method"] = enum_list(p.methods);
  json one_bit = {{"tau", p.one_bit.tau}, {"iters", p.one_bit.iters}};
  if (p.one_bit.k_star) one_bit["k_star"] = *p.one_bit.k_star;
  j["one_bit"] = one_bit;
  j["full_conformal"] = {{"targets", p.full_conformal.targets},
                         {"grid_points", p.full_conformal.grid_points},
                         {"refit_sweeps", p.full_conformal.refit_sweeps}};
  j["seed"] = c.seed;
  return j.dump(2);
}

}  // namespace confmc
