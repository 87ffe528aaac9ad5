#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "confmc/error.hpp"
#include "confmc/io.hpp"

namespace confmc {

namespace {

using json = nlohmann::ordered_json;

struct ParsedCsv {
  std::vector<std::vector<std::optional<double>>> rows;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

ParsedCsv parse_csv(std::istream& in) {
  ParsedCsv out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t blank_run_start = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      if (blank_run_start == 0) blank_run_start = line_no;
      continue;
    }
    if (blank_run_start != 0 && !out.rows.empty())
      throw ParseError("blank line inside matrix", blank_run_start);
    blank_run_start = 0;
    std::vector<std::optional<double>> row;
    std::string_view rest(line);
    std::size_t column = 0;
    while (true) {
      ++column;
      const auto comma = rest.find(',');
      const std::string_view cell = trim(rest.substr(0, comma));
      if (cell.empty()) {
        row.emplace_back();
      } else {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
          throw ParseError("non-numeric cell '" + std::string(cell) + "'", line_no, column);
        row.emplace_back(value);
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (out.rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " +
                           std::to_string(row.size()),
                       line_no);
    }
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) throw ParseError("empty matrix file");
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return in;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

struct GroupKey {
  std::string label;
  Index rank;
  std::string method;
  std::string propensity;

  auto tie() const { return std::tie(label, rank, method, propensity); }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
};

struct Group {
  GroupKey key;
  std::vector<TrialReport> reports;
};

std::vector<Group> group_records(std::span<const TrialRecord> records) {
  std::vector<Group> groups;
  std::map<GroupKey, std::size_t> index;
  for (const TrialRecord& r : records) {
    GroupKey key{r.label, r.rank, r.method, r.propensity};
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back({key, {}});
    groups[it->second].reports.push_back(r.report);
  }
  return groups;
}

std::optional<double> mean_delta(const std::vector<TrialReport>& reports) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const TrialReport& r : reports)
    if (r.delta) {
      sum += *r.delta;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

json summary_to_json(const SampleSummary& s) {
  json j;
  j["mean"] = number(s.mean);
  j["std_error"] = number(s.std_error);
  j["min"] = number(s.min);
  j["q25"] = number(s.q25);
  j["median"] = number(s.median);
  j["q75"] = number(s.q75);
  j["max"] = number(s.max);
  return j;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

ObservedMatrix read_matrix_csv(std::istream& in) {
  const ParsedCsv csv = parse_csv(in);
  const Index d1 = static_cast<Index>(csv.rows.size());
  const Index d2 = static_cast<Index>(csv.rows.front().size());
  Matrix values = Matrix::Zero(d1, d2);
  Mask mask = Mask::Constant(d1, d2, false);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j)
      if (const auto& cell = csv.rows[i][j]) {
        values(i, j) = *cell;
        mask(i, j) = true;
      }
  return ObservedMatrix(std::move(values), std::move(mask));
}

ObservedMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_matrix_csv(in);
}

Matrix read_complete_matrix_csv(std::istream& in) {
  const ParsedCsv csv = parse_csv(in);
  const Index d1 = static_cast<Index>(csv.rows.size());
  const Index d2 = static_cast<Index>(csv.rows.front().size());
  Matrix values(d1, d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) {
      if (!csv.rows[i][j])
        throw ParseError("missing cell in complete matrix", static_cast<std::size_t>(i) + 1,
                         static_cast<std::size_t>(j) + 1);
      values(i, j) = *csv.rows[i][j];
    }
  return values;
}

Matrix read_complete_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_complete_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Matrix& values) {
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const ObservedMatrix& obs) {
  for (Index i = 0; i < obs.rows(); ++i) {
    for (Index j = 0; j < obs.cols(); ++j) {
      if (j > 0) out << ',';
      if (obs.observed(i, j)) out << format_double(obs.values()(i, j));
    }
    out << '\n';
  }
}

void write_intervals_csv(std::ostream& out, const Matrix& m_hat, const IntervalMatrix& intervals) {
  out << "row,col,m_hat,lower,upper\n";
  for (const Cell& c : cells_of(intervals.target))
    out << c.row << ',' << c.col << ',' << format_double(m_hat(c.row, c.col)) << ','
        << format_double(intervals.lower(c.row, c.col)) << ','
        << format_double(intervals.upper(c.row, c.col)) << '\n';
}

void write_records_csv(std::ostream& out, std::span<const TrialRecord> records) {
  out << "label,rank,method,propensity,seed,trial,avg_cov,avg_length,q_hat,delta,n_unobserved,"
         "runtime_ms\n";
  for (const TrialRecord& r : records)
    out << r.label << ',' << r.rank << ',' << r.method << ',' << r.propensity << ',' << r.seed << ','
        << r.trial << ',' << format_double(r.report.avg_cov) << ','
        << format_double(r.report.avg_length) << ',' << format_double(r.report.q_hat) << ','
        << format_optional(r.report.delta) << ',' << r.report.n_unobserved << ','
        << format_double(r.runtime_ms) << '\n';
}

std::string summary_json(std::span<const TrialRecord> records, const std::string& config_json) {
  json root;
  root["config"] = config_json.empty() ? json(nullptr) : json::parse(config_json);
  json groups = json::array();
  for (const Group& g : group_records(records)) {
    const AggregateSummary agg = aggregate(g.reports);
    json j;
    j["label"] = g.key.label;
    j["rank"] = g.key.rank;
    j["method"] = g.key.method;
    j["propensity"] = g.key.propensity;
    j["trials"] = agg.trials;
    j["avg_cov"] = summary_to_json(agg.coverage);
    j["avg_length"] = summary_to_json(agg.length);
    j["fraction_infinite"] = agg.fraction_infinite;
    const auto delta = mean_delta(g.reports);
    j["delta_mean"] = delta ? number(*delta) : json(nullptr);
    groups.push_back(std::move(j));
  }
  root["groups"] = std::move(groups);
  return root.dump(2) + "\n";
}

void write_figure_table(std::ostream& out, std::span<const TrialRecord> records) {
  out << "label,rank,method,propensity,trials,coverage_mean,coverage_se,length_mean,length_se,"
         "fraction_infinite,delta_mean\n";
  for (const Group& g : group_records(records)) {
    const AggregateSummary agg = aggregate(g.reports);
    out << g.key.label << ',' << g.key.rank << ',' << g.key.method << ',' << g.key.propensity << ','
        << agg.trials << ',' << format_double(agg.coverage.mean) << ','
        << format_double(agg.coverage.std_error) << ',' << format_double(agg.length.mean) << ','
        << format_double(agg.length.std_error) << ',' << format_double(agg.fraction_infinite) << ','
        << format_optional(mean_delta(g.reports)) << '\n';
  }
}

}  // namespace confmc
