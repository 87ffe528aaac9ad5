#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "confmc/experiments.hpp"
#include "confmc/interval.hpp"
#include "confmc/matrix.hpp"

namespace confmc {

/// Shortest round-trip representation ("%.17g"); "inf", "-inf", "nan".
std::string format_double(double value);

/// Numeric CSV without header. Empty cells are unobserved entries.
ObservedMatrix read_matrix_csv(std::istream& in);
ObservedMatrix read_matrix_csv(const std::filesystem::path& path);

/// As read_matrix_csv but every cell must be present.
Matrix read_complete_matrix_csv(std::istream& in);
Matrix read_complete_matrix_csv(const std::filesystem::path& path);

void write_matrix_csv(std::ostream& out, const Matrix& values);
void write_matrix_csv(std::ostream& out, const ObservedMatrix& obs);

/// Columns row,col,m_hat,lower,upper for every target entry, row-major.
void write_intervals_csv(std::ostream& out, const Matrix& m_hat, const IntervalMatrix& intervals);

/// One row per TrialRecord.
void write_records_csv(std::ostream& out, std::span<const TrialRecord> records);

/// JSON summary: the configuration plus aggregate statistics per
/// (label, rank, method, propensity) group.
std::string summary_json(std::span<const TrialRecord> records, const std::string& config_json);

/// Coverage and length against hypothesized rank for every method.
void write_figure_table(std::ostream& out, std::span<const TrialRecord> records);

/// Strict JSON (unknown keys rejected); mirrors SyntheticConfig.
SyntheticConfig parse_config(const std::string& json_text);
SyntheticConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const SyntheticConfig& config);

}  // namespace confmc
