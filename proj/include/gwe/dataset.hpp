#pragma once

#include "gwe/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gwe::data {

// `ignore` columns are read and discarded; they let a schema describe a
// file that carries free-text or identifier columns.
enum class ColumnKind { numeric, categorical, label, ignore };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> allowed_categories;  // categorical only; empty = learn from data
};

using Schema = std::vector<ColumnSchema>;

// Schema files hold one `name,kind[,cat1|cat2|...]` line per column.
// Blank lines and lines starting with '#' are skipped.
Schema read_schema(const std::filesystem::path& path);
Schema parse_schema(std::istream& in);
void validate_schema(const Schema& schema);

struct LabelMapping {
  std::string negative = "Charged Off";  // -> 0
  std::string positive = "Fully Paid";   // -> 1
};

inline constexpr int kMissingLabel = -1;

// Column-wise storage. Numeric cells that are missing hold NaN; missing
// categorical cells are nullopt; a missing label is kMissingLabel.
struct ColumnData {
  std::vector<double> numbers;
  std::vector<std::optional<std::string>> categories;
};

struct Dataset {
  Schema schema;                    // without `ignore` columns
  std::vector<ColumnData> columns;  // parallel to schema; label column left empty
  Labels label;

  std::size_t rows() const { return label.size(); }
  std::size_t label_column() const;
};

bool is_missing_token(std::string_view cell);

// RFC-4180 record reader (comma delimiter, double-quote quoting, embedded
// newlines inside quotes). Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);
void write_csv_field(std::ostream& out, std::string_view field);

Dataset ingest_csv(const std::filesystem::path& path, const Schema& schema, const LabelMapping& mapping = {});
Dataset ingest_csv(std::istream& in, const Schema& schema, const LabelMapping& mapping = {});

struct DropReport {
  std::size_t rows_before = 0;
  std::size_t rows_after = 0;
  double retained_fraction() const {
    return rows_before == 0 ? 0.0 : static_cast<double>(rows_after) / static_cast<double>(rows_before);
  }
};

Dataset drop_missing(const Dataset& d, DropReport* report = nullptr);

enum class FeatureKind { numeric, indicator };

struct FeatureGroup {
  std::string column;
  FeatureKind kind = FeatureKind::numeric;
  Eigen::Index first = 0;
  Eigen::Index width = 1;
  std::vector<std::string> categories;  // indicator groups only, sorted
};

struct EncodedMatrix {
  Matrix X;
  std::vector<std::string> feature_names;
  Labels y;
  std::vector<FeatureGroup> groups;

  Eigen::Index cols() const { return X.cols(); }
  // Columns that carry real-valued (non-indicator) features.
  std::vector<bool> numeric_mask() const;
};

// Category vocabulary per categorical column, in schema order.
class Encoder {
 public:
  static Encoder fit(const Dataset& d);

  // strict: an unknown category is an error. Otherwise it encodes as an
  // all-zero indicator group.
  EncodedMatrix transform(const Dataset& d, bool strict) const;
  const std::vector<FeatureGroup>& groups() const { return groups_; }

 private:
  std::vector<FeatureGroup> groups_;
  std::vector<std::size_t> source_columns_;
};

EncodedMatrix encode(const Dataset& d);

struct Split {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
};

// Stratified by label; |test| = round(test_fraction * N).
Split split(const EncodedMatrix& m, double test_fraction, std::uint64_t seed);
Split split(std::span<const int> y, double test_fraction, std::uint64_t seed);

void write_split(const std::filesystem::path& path, const Split& s);
Split read_split(const std::filesystem::path& path);

EncodedMatrix subset(const EncodedMatrix& m, std::span<const std::size_t> rows);

// Artifact form of an encoded matrix: header of feature names plus `label`,
// shortest round-trip decimal for every value.
void write_matrix_csv(const std::filesystem::path& path, const EncodedMatrix& m);
void write_matrix_csv(std::ostream& out, const EncodedMatrix& m);
EncodedMatrix read_matrix_csv(const std::filesystem::path& path);

// Sidecar describing feature groups, so a matrix CSV can be reloaded with
// its numeric/indicator structure.
void write_groups(const std::filesystem::path& path, const std::vector<FeatureGroup>& groups);
std::vector<FeatureGroup> read_groups(const std::filesystem::path& path);

std::string format_double(double v);

// Synthetic loan book: 10 informative features (8 numeric, 2 categorical)
// and 6 noise features (4 numeric, 2 categorical); the charged-off
// probability follows a logistic link tuned to a 20% default rate.
// A small share of cells is blanked and a few incomes are inflated so the
// cleaning stages have something to do.
struct SyntheticOptions {
  std::size_t rows = 5000;
  std::uint64_t seed = 42;
  double missing_rate = 0.01;
  double spike_rate = 0.004;
  double default_rate = 0.20;
};

void write_synthetic_csv(std::ostream& out, const SyntheticOptions& opts);
Schema synthetic_schema();
void write_schema(std::ostream& out, const Schema& schema);

}  // namespace gwe::data
