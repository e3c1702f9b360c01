#include "gwe/dataset.hpp"

#include "gwe/stats.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace gwe::data {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::label: return "label";
    case ColumnKind::ignore: return "ignore";
  }
  return "?";
}

}  // namespace

std::size_t Dataset::label_column() const {
  for (std::size_t c = 0; c < schema.size(); ++c)
    if (schema[c].kind == ColumnKind::label) return c;
  throw Error("dataset has no label column");
}

void validate_schema(const Schema& schema) {
  std::set<std::string> names;
  int labels = 0;
  for (const auto& col : schema) {
    if (col.name.empty()) throw Error("schema: empty column name");
    if (!names.insert(col.name).second) throw Error("schema: duplicate column name '" + col.name + "'");
    if (col.kind == ColumnKind::label) ++labels;
    if (!col.allowed_categories.empty() && col.kind != ColumnKind::categorical)
      throw Error("schema: categories given for non-categorical column '" + col.name + "'");
  }
  if (labels != 1) throw Error("schema: exactly one label column required, found " + std::to_string(labels));
}

Schema parse_schema(std::istream& in) {
  Schema schema;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto parts = split_on(t, ',');
    if (parts.size() < 2 || parts.size() > 3)
      throw Error("schema line " + std::to_string(lineno) + ": expected name,kind[,categories]");
    ColumnSchema col;
    col.name = parts[0];
    const auto kind = lower(parts[1]);
    if (kind == "numeric") col.kind = ColumnKind::numeric;
    else if (kind == "categorical") col.kind = ColumnKind::categorical;
    else if (kind == "label") col.kind = ColumnKind::label;
    else if (kind == "ignore") col.kind = ColumnKind::ignore;
    else throw Error("schema line " + std::to_string(lineno) + ": unknown kind '" + parts[1] + "'");
    if (parts.size() == 3 && !parts[2].empty()) {
      col.allowed_categories = split_on(parts[2], '|');
      if (col.kind != ColumnKind::categorical)
        throw Error("schema line " + std::to_string(lineno) + ": categories on non-categorical column");
    }
    schema.push_back(std::move(col));
  }
  validate_schema(schema);
  return schema;
}

Schema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file " + path.string());
  return parse_schema(in);
}

void write_schema(std::ostream& out, const Schema& schema) {
  for (const auto& col : schema) {
    out << col.name << ',' << kind_name(col.kind);
    if (!col.allowed_categories.empty()) {
      out << ',';
      for (std::size_t i = 0; i < col.allowed_categories.size(); ++i) out << (i ? "|" : "") << col.allowed_categories[i];
    }
    out << '\n';
  }
}

bool is_missing_token(std::string_view cell) {
  const auto t = lower(trim(cell));
  return t.empty() || t == "na" || t == "nan" || t == "null";
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c = 0;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error("csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

void write_csv_field(std::ostream& out, std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

Dataset ingest_csv(std::istream& in, const Schema& schema, const LabelMapping& mapping) {
  validate_schema(schema);
  std::vector<std::string> fields;
  if (!read_csv_record(in, fields)) throw Error("csv: empty input, expected a header row");
  if (fields.size() != schema.size()) {
    throw Error("csv: header has " + std::to_string(fields.size()) + " columns, schema has " +
                std::to_string(schema.size()));
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (std::string(trim(fields[c])) != schema[c].name)
      throw Error("csv: header column " + std::to_string(c + 1) + " is '" + fields[c] + "', schema expects '" +
                  schema[c].name + "'");
  }

  Dataset d;
  std::vector<std::size_t> source;  // file column for each kept schema entry
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].kind == ColumnKind::ignore) continue;
    d.schema.push_back(schema[c]);
    source.push_back(c);
  }
  d.columns.resize(d.schema.size());

  std::size_t row = 0;
  while (read_csv_record(in, fields)) {
    ++row;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // trailing blank line
    if (fields.size() != schema.size()) {
      throw Error("csv: row " + std::to_string(row) + " has " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(schema.size()));
    }
    for (std::size_t k = 0; k < d.schema.size(); ++k) {
      const auto& col = d.schema[k];
      const std::string_view cell = fields[source[k]];
      switch (col.kind) {
        case ColumnKind::numeric: {
          if (is_missing_token(cell)) {
            d.columns[k].numbers.push_back(std::numeric_limits<double>::quiet_NaN());
            break;
          }
          const auto v = parse_double(cell);
          if (!v)
            throw Error("csv: row " + std::to_string(row) + ", column '" + col.name + "': cannot parse '" +
                        std::string(cell) + "' as a number");
          d.columns[k].numbers.push_back(*v);
          break;
        }
        case ColumnKind::categorical:
          if (is_missing_token(cell)) d.columns[k].categories.emplace_back(std::nullopt);
          else d.columns[k].categories.emplace_back(std::string(trim(cell)));
          break;
        case ColumnKind::label: {
          const auto t = trim(cell);
          if (is_missing_token(t)) d.label.push_back(kMissingLabel);
          else if (t == mapping.negative) d.label.push_back(0);
          else if (t == mapping.positive) d.label.push_back(1);
          else
            throw Error("csv: row " + std::to_string(row) + ", column '" + col.name + "': unknown label '" +
                        std::string(t) + "'");
          break;
        }
        case ColumnKind::ignore: break;
      }
    }
  }
  return d;
}

Dataset ingest_csv(const std::filesystem::path& path, const Schema& schema, const LabelMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open data file " + path.string());
  return ingest_csv(in, schema, mapping);
}

Dataset drop_missing(const Dataset& d, DropReport* report) {
  const std::size_t n = d.rows();
  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = d.label[i] != kMissingLabel;
    for (std::size_t k = 0; ok && k < d.schema.size(); ++k) {
      if (d.schema[k].kind == ColumnKind::numeric) ok = !std::isnan(d.columns[k].numbers[i]);
      else if (d.schema[k].kind == ColumnKind::categorical) ok = d.columns[k].categories[i].has_value();
    }
    if (ok) keep.push_back(i);
  }
  if (report) *report = {n, keep.size()};
  if (keep.empty()) throw Error("drop_missing: every row has a missing cell");

  Dataset out;
  out.schema = d.schema;
  out.columns.resize(d.columns.size());
  for (std::size_t k = 0; k < d.schema.size(); ++k) {
    const auto& src = d.columns[k];
    auto& dst = out.columns[k];
    if (!src.numbers.empty()) {
      dst.numbers.reserve(keep.size());
      for (auto i : keep) dst.numbers.push_back(src.numbers[i]);
    }
    if (!src.categories.empty()) {
      dst.categories.reserve(keep.size());
      for (auto i : keep) dst.categories.push_back(src.categories[i]);
    }
  }
  out.label.reserve(keep.size());
  for (auto i : keep) out.label.push_back(d.label[i]);
  return out;
}

std::vector<bool> EncodedMatrix::numeric_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(X.cols()), groups.empty());
  for (const auto& g : groups)
    if (g.kind == FeatureKind::numeric)
      for (Eigen::Index j = g.first; j < g.first + g.width; ++j) mask[static_cast<std::size_t>(j)] = true;
  return mask;
}

Encoder Encoder::fit(const Dataset& d) {
  Encoder enc;
  Eigen::Index next = 0;
  for (std::size_t k = 0; k < d.schema.size(); ++k) {
    const auto& col = d.schema[k];
    if (col.kind == ColumnKind::numeric) {
      enc.groups_.push_back({col.name, FeatureKind::numeric, next, 1, {}});
      enc.source_columns_.push_back(k);
      next += 1;
    } else if (col.kind == ColumnKind::categorical) {
      std::set<std::string> cats;
      if (!col.allowed_categories.empty()) {
        cats.insert(col.allowed_categories.begin(), col.allowed_categories.end());
      } else {
        for (const auto& c : d.columns[k].categories)
          if (c) cats.insert(*c);
      }
      FeatureGroup g{col.name, FeatureKind::indicator, next, static_cast<Eigen::Index>(cats.size()),
                     {cats.begin(), cats.end()}};
      next += g.width;
      enc.groups_.push_back(std::move(g));
      enc.source_columns_.push_back(k);
    }
  }
  return enc;
}

EncodedMatrix Encoder::transform(const Dataset& d, bool strict) const {
  const auto n = static_cast<Eigen::Index>(d.rows());
  Eigen::Index width = 0;
  for (const auto& g : groups_) width += g.width;

  EncodedMatrix m;
  m.X = Matrix::Zero(n, width);
  m.y = d.label;
  m.groups = groups_;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto& g = groups_[gi];
    const auto k = source_columns_[gi];
    if (k >= d.schema.size() || d.schema[k].name != g.column)
      throw Error("encode: dataset layout does not match the fitted encoder at column '" + g.column + "'");
    if (g.kind == FeatureKind::numeric) {
      m.feature_names.push_back(g.column);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = d.columns[k].numbers[static_cast<std::size_t>(i)];
        if (!std::isfinite(v))
          throw Error("encode: non-finite value in column '" + g.column + "' row " + std::to_string(i + 1) +
                      " (run drop_missing first)");
        m.X(i, g.first) = v;
      }
      continue;
    }
    for (const auto& cat : g.categories) m.feature_names.push_back(g.column + "=" + cat);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& cell = d.columns[k].categories[static_cast<std::size_t>(i)];
      if (!cell)
        throw Error("encode: missing value in column '" + g.column + "' row " + std::to_string(i + 1) +
                    " (run drop_missing first)");
      const auto it = std::lower_bound(g.categories.begin(), g.categories.end(), *cell);
      if (it == g.categories.end() || *it != *cell) {
        if (strict)
          throw Error("encode: category '" + *cell + "' not allowed in column '" + g.column + "' (row " +
                      std::to_string(i + 1) + ")");
        continue;
      }
      m.X(i, g.first + (it - g.categories.begin())) = 1.0;
    }
  }
  for (auto v : m.y)
    if (v != 0 && v != 1) throw Error("encode: label outside {0,1} (run drop_missing first)");
  return m;
}

EncodedMatrix encode(const Dataset& d) { return Encoder::fit(d).transform(d, true); }

Split split(std::span<const int> y, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "split: test_fraction must be in (0,1)");
  const std::size_t n = y.size();
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) {
    require(y[i] == 0 || y[i] == 1, "split: labels must be 0/1");
    by_class[static_cast<std::size_t>(y[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (by_class[static_cast<std::size_t>(c)].size() < 2)
      throw Error("split: class " + std::to_string(c) + " has fewer than 2 rows");

  // Largest-remainder allocation so the per-class test counts sum to round(f*N).
  const auto total = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::array<double, 2> exact{};
  std::array<std::size_t, 2> take{};
  for (std::size_t c = 0; c < 2; ++c) {
    exact[c] = test_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact[c]));
  }
  std::size_t assigned = take[0] + take[1];
  while (assigned < total) {
    const std::size_t c = (exact[0] - static_cast<double>(take[0]) >= exact[1] - static_cast<double>(take[1])) ? 0 : 1;
    ++take[c];
    ++assigned;
  }

  Rng rng(derive_seed(seed, "split"));
  Split s;
  s.seed = seed;
  for (std::size_t c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) (k < take[c] ? s.test_indices : s.train_indices).push_back(idx[k]);
  }
  std::sort(s.train_indices.begin(), s.train_indices.end());
  std::sort(s.test_indices.begin(), s.test_indices.end());
  return s;
}

Split split(const EncodedMatrix& m, double test_fraction, std::uint64_t seed) { return split(m.y, test_fraction, seed); }

void write_split(const std::filesystem::path& path, const Split& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write split file " + path.string());
  out << "train:\n";
  for (auto i : s.train_indices) out << i << '\n';
  out << "test:\n";
  for (auto i : s.test_indices) out << i << '\n';
}

Split read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open split file " + path.string());
  Split s;
  std::vector<std::size_t>* target = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t == "train:") target = &s.train_indices;
    else if (t == "test:") target = &s.test_indices;
    else {
      if (!target) throw Error("split file: index before a section header");
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size()) throw Error("split file: bad index '" + std::string(t) + "'");
      target->push_back(v);
    }
  }
  return s;
}

EncodedMatrix subset(const EncodedMatrix& m, std::span<const std::size_t> rows) {
  EncodedMatrix out;
  out.X = stats::take_rows(m.X, rows);
  out.y = stats::take(m.y, rows);
  out.feature_names = m.feature_names;
  out.groups = m.groups;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return {buf, ptr};
}

void write_matrix_csv(std::ostream& out, const EncodedMatrix& m) {
  for (const auto& name : m.feature_names) {
    write_csv_field(out, name);
    out << ',';
  }
  out << "label\n";
  for (Eigen::Index i = 0; i < m.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.X.cols(); ++j) out << format_double(m.X(i, j)) << ',';
    out << m.y[static_cast<std::size_t>(i)] << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const EncodedMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write matrix file " + path.string());
  write_matrix_csv(out, m);
}

EncodedMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open matrix file " + path.string());
  std::vector<std::string> fields;
  if (!read_csv_record(in, fields) || fields.empty() || fields.back() != "label")
    throw Error("matrix file " + path.string() + ": header must end with 'label'");
  EncodedMatrix m;
  m.feature_names.assign(fields.begin(), fields.end() - 1);
  const auto d = m.feature_names.size();
  std::vector<double> values;
  std::size_t row = 0;
  while (read_csv_record(in, fields)) {
    ++row;
    if (fields.size() != d + 1) throw Error("matrix file: row " + std::to_string(row) + " has wrong width");
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = parse_double(fields[j]);
      if (!v) throw Error("matrix file: row " + std::to_string(row) + " column " + std::to_string(j + 1) + " unparseable");
      values.push_back(*v);
    }
    const auto lab = trim(fields[d]);
    if (lab != "0" && lab != "1") throw Error("matrix file: row " + std::to_string(row) + " bad label");
    m.y.push_back(lab == "1" ? 1 : 0);
  }
  m.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
  return m;
}

void write_groups(const std::filesystem::path& path, const std::vector<FeatureGroup>& groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write groups file " + path.string());
  for (const auto& g : groups) {
    out << g.column << ',' << (g.kind == FeatureKind::numeric ? "numeric" : "indicator") << ',' << g.first << ','
        << g.width;
    if (g.kind == FeatureKind::indicator) {
      out << ',';
      for (std::size_t i = 0; i < g.categories.size(); ++i) out << (i ? "|" : "") << g.categories[i];
    }
    out << '\n';
  }
}

std::vector<FeatureGroup> read_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open groups file " + path.string());
  std::vector<FeatureGroup> groups;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto parts = split_on(line, ',');
    if (parts.size() < 4) throw Error("groups file: malformed line '" + line + "'");
    FeatureGroup g;
    g.column = parts[0];
    g.kind = parts[1] == "numeric" ? FeatureKind::numeric : FeatureKind::indicator;
    g.first = std::stol(parts[2]);
    g.width = std::stol(parts[3]);
    if (g.kind == FeatureKind::indicator && parts.size() > 4 && !parts[4].empty()) g.categories = split_on(parts[4], '|');
    groups.push_back(std::move(g));
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Synthetic loan book

Schema synthetic_schema() {
  return {
      {"loan_amnt", ColumnKind::numeric, {}},
      {"term", ColumnKind::categorical, {}},
      {"int_rate", ColumnKind::numeric, {}},
      {"installment", ColumnKind::numeric, {}},
      {"grade", ColumnKind::categorical, {"A", "B", "C", "D", "E", "F", "G"}},
      {"emp_length", ColumnKind::numeric, {}},
      {"home_ownership", ColumnKind::categorical, {}},
      {"annual_inc", ColumnKind::numeric, {}},
      {"verification_status", ColumnKind::categorical, {}},
      {"loan_status", ColumnKind::label, {}},
      {"dti", ColumnKind::numeric, {}},
      {"open_acc", ColumnKind::numeric, {}},
      {"pub_rec", ColumnKind::numeric, {}},
      {"revol_bal", ColumnKind::numeric, {}},
      {"revol_util", ColumnKind::numeric, {}},
      {"total_acc", ColumnKind::numeric, {}},
      {"mort_acc", ColumnKind::numeric, {}},
  };
}

void write_synthetic_csv(std::ostream& out, const SyntheticOptions& opts) {
  require(opts.rows >= 10, "synthetic: need at least 10 rows");
  Rng rng(derive_seed(opts.seed, "synthetic"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto poisson = [&](double mean) { return static_cast<double>(std::poisson_distribution<int>(mean)(rng)); };
  auto round_to = [](double v, double step) { return step < 1.0 ? std::round(v / step) / std::round(1.0 / step) : std::round(v / step) * step; };

  struct Row {
    double loan_amnt, int_rate, installment, emp_length, annual_inc, dti, open_acc, pub_rec, revol_bal, revol_util,
        total_acc, mort_acc;
    bool long_term;
    int grade, home, verification;
    double score;
  };
  std::vector<Row> rows(opts.rows);
  for (auto& r : rows) {
    r.loan_amnt = round_to(std::clamp(std::exp(9.4 + 0.6 * gauss(rng)), 1000.0, 40000.0), 25.0);
    r.long_term = unif(rng) < 0.25;
    r.int_rate = round_to(std::clamp(13.8 + 4.5 * gauss(rng) + (r.long_term ? 2.0 : 0.0), 5.32, 30.99), 0.01);
    const double monthly = r.int_rate / 1200.0;
    const double months = r.long_term ? 60.0 : 36.0;
    r.installment = round_to(r.loan_amnt * monthly / (1.0 - std::pow(1.0 + monthly, -months)), 0.01);
    r.grade = std::clamp(static_cast<int>((r.int_rate - 5.0) / 3.8), 0, 6);
    r.emp_length = std::floor(unif(rng) * 11.0);
    r.home = static_cast<int>(unif(rng) * 3.0);
    r.annual_inc = round_to(std::clamp(std::exp(11.1 + 0.5 * gauss(rng)), 5000.0, 2.0e6), 100.0);
    r.verification = static_cast<int>(unif(rng) * 3.0);
    r.dti = round_to(std::clamp(17.7 + 8.0 * gauss(rng), 0.0, 60.0), 0.01);
    r.open_acc = 1.0 + poisson(10.6);
    r.pub_rec = poisson(0.18);
    r.revol_bal = round_to(std::exp(9.3 + 0.9 * gauss(rng)), 1.0);
    r.revol_util = round_to(std::clamp(54.0 + 24.0 * gauss(rng), 0.0, 150.0), 0.1);
    r.total_acc = r.open_acc + poisson(14.0);
    r.mort_acc = poisson(1.8);

    const double z_rate = (r.int_rate - 13.8) / 4.5;
    const double z_inc = (std::log(r.annual_inc) - 11.1) / 0.5;
    const double z_dti = (r.dti - 17.7) / 8.0;
    const double z_util = (r.revol_util - 54.0) / 24.0;
    const double burden = r.installment * 12.0 / r.annual_inc;
    const double z_burden = (burden - 0.085) / 0.06;
    const double z_amnt = (std::log(r.loan_amnt) - 9.4) / 0.6;
    r.score = 0.85 * z_rate + 0.45 * (r.long_term ? 1.0 : 0.0) + 0.30 * z_dti + 0.35 * z_util - 0.45 * z_inc +
              0.25 * z_burden + 0.15 * z_amnt + 0.45 * std::min(r.pub_rec, 3.0) - 0.18 * std::min(r.mort_acc, 5.0) +
              0.10 * r.grade + 0.6 * (r.dti > 30.0 ? 1.0 : 0.0) + 0.35 * z_rate * (r.long_term ? 1.0 : 0.0);
  }

  // Intercept solved on the sample so the expected default rate matches.
  auto rate_for = [&](double b0) {
    double s = 0.0;
    for (const auto& r : rows) s += 1.0 / (1.0 + std::exp(-(b0 + r.score)));
    return s / static_cast<double>(rows.size());
  };
  double lo = -20.0, hi = 20.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate_for(mid) < opts.default_rate ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);

  static const char* kGrades[] = {"A", "B", "C", "D", "E", "F", "G"};
  static const char* kHome[] = {"MORTGAGE", "OWN", "RENT"};
  static const char* kVerif[] = {"Not Verified", "Source Verified", "Verified"};

  const auto schema = synthetic_schema();
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema[c].name;
  out << '\n';
  for (auto& r : rows) {
    const bool charged_off = unif(rng) < 1.0 / (1.0 + std::exp(-(b0 + r.score)));
    if (unif(rng) < opts.spike_rate) r.annual_inc *= 50.0;
    auto maybe_missing = [&](double v) -> std::string {
      return unif(rng) < opts.missing_rate ? std::string("NA") : format_double(v);
    };
    const std::string emp = maybe_missing(r.emp_length);
    const std::string util = maybe_missing(r.revol_util);
    const std::string mort = maybe_missing(r.mort_acc);
    out << format_double(r.loan_amnt) << ',' << (r.long_term ? "60 months" : "36 months") << ','
        << format_double(r.int_rate) << ',' << format_double(r.installment) << ',' << kGrades[r.grade] << ',' << emp
        << ',' << kHome[r.home] << ',' << format_double(r.annual_inc) << ',' << kVerif[r.verification] << ','
        << (charged_off ? "Charged Off" : "Fully Paid") << ',' << format_double(r.dti) << ','
        << format_double(r.open_acc) << ',' << format_double(r.pub_rec) << ',' << format_double(r.revol_bal) << ','
        << util << ',' << format_double(r.total_acc) << ',' << mort << '\n';
  }
}

}  // namespace gwe::data
