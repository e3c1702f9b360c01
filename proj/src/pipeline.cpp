#include "gwe/pipeline.hpp"

#include "gwe/augment.hpp"
#include "gwe/features.hpp"
#include "gwe/stats.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace gwe::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kKeyVersion = "gwe-pipeline 1";

std::vector<TestAccess>& access_log() {
  static std::vector<TestAccess> log;
  return log;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string fmt(double v) { return data::format_double(v); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path.string());
  return out;
}

data::EncodedMatrix load_matrix(const fs::path& csv, const fs::path& groups) {
  auto m = data::read_matrix_csv(csv);
  m.groups = data::read_groups(groups);
  return m;
}

std::vector<std::size_t> column_indices(const std::vector<std::string>& names, const std::vector<std::string>& wanted) {
  std::vector<std::size_t> out;
  for (const auto& w : wanted) {
    auto it = std::find(names.begin(), names.end(), w);
    require(it != names.end(), "feature '" + w + "' not found");
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return out;
}

std::string source_text(outlier::FlagSource s) {
  switch (s) {
    case outlier::FlagSource::iqr: return "iqr";
    case outlier::FlagSource::hampel: return "hampel";
    case outlier::FlagSource::both: return "both";
  }
  return "unknown";
}

struct NamedBounds {
  std::string column;
  outlier::ColumnBounds bounds;
};

void write_bounds(const fs::path& path, const std::vector<NamedBounds>& all) {
  auto out = open_out(path);
  out << "gwe-bounds 1\n" << all.size() << '\n';
  for (const auto& [name, b] : all) {
    out << name << '\n'
        << fmt(b.iqr_low) << ' ' << fmt(b.iqr_high) << ' ' << fmt(b.median) << ' ' << fmt(b.mad) << ' '
        << fmt(b.hampel_k) << ' ' << (b.policy == outlier::FlagPolicy::union_of ? "union" : "intersection") << '\n';
  }
}

std::vector<NamedBounds> read_bounds(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "gwe-bounds 1", "bounds file: bad header");
  std::getline(in, line);
  const auto n = std::stoul(line);
  std::vector<NamedBounds> out(n);
  for (auto& nb : out) {
    require(static_cast<bool>(std::getline(in, nb.column)), "bounds file: truncated");
    std::string policy;
    auto& b = nb.bounds;
    b.iqr_low = learn::io::get_double(in);
    b.iqr_high = learn::io::get_double(in);
    b.median = learn::io::get_double(in);
    b.mad = learn::io::get_double(in);
    b.hampel_k = learn::io::get_double(in);
    in >> policy;
    require(policy == "union" || policy == "intersection", "bounds file: bad policy");
    b.policy = policy == "union" ? outlier::FlagPolicy::union_of : outlier::FlagPolicy::intersection;
    std::getline(in, line);
  }
  return out;
}

json evaluation_json(const std::string& name, const std::string& type, const metrics::Evaluation& e) {
  auto scores = [](const metrics::ClassScores& s) {
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  json j;
  j["name"] = name;
  j["type"] = type;
  j["confusion"] = {{"tp", e.confusion.tp}, {"tn", e.confusion.tn}, {"fp", e.confusion.fp}, {"fn", e.confusion.fn}};
  j["class0"] = scores(e.prf.class0);
  j["class1"] = scores(e.prf.class1);
  j["macro"] = scores(e.prf.macro);
  j["auc"] = e.roc.auc;
  j["bootstrap"] = {{"mean", e.bootstrap.mean},         {"std", e.bootstrap.std},
                    {"ci_low", e.bootstrap.ci_low},     {"ci_high", e.bootstrap.ci_high},
                    {"n_boot", e.bootstrap.n_boot},     {"skipped", e.bootstrap.skipped},
                    {"seed", e.bootstrap.seed}};
  j["brier"] = e.brier;
  j["log_loss"] = e.log_loss;
  return j;
}

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::outliers: return "outliers";
    case Stage::augment: return "augment";
    case Stage::select_features: return "select-features";
    case Stage::tune: return "tune";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (auto s : all_stages())
    if (to_string(s) == name) return s;
  throw Error("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = {Stage::ingest, Stage::outliers, Stage::augment, Stage::select_features,
                                       Stage::tune,   Stage::train,    Stage::evaluate, Stage::report};
  return s;
}

StageError::StageError(Stage stage, const std::string& message)
    : Error("stage '" + to_string(stage) + "' failed: " + message), stage_(stage) {}

const std::vector<TestAccess>& test_access_log() { return access_log(); }
void reset_test_access_log() { access_log().clear(); }

SealedTestSet::SealedTestSet(fs::path matrix, fs::path groups) : matrix_(std::move(matrix)), groups_(std::move(groups)) {}

data::EncodedMatrix SealedTestSet::open(std::string_view stage) const {
  const bool allowed = stage == "evaluate";
  access_log().push_back({std::string(stage), allowed});
  require(allowed, "test rows are sealed; stage '" + std::string(stage) + "' may not read them");
  return load_matrix(matrix_, groups_);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1, "SHA-256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

void write_spec(const fs::path& path, const learn::ClassifierSpec& spec) {
  auto out = open_out(path);
  out << "kind = " << learn::to_string(spec.kind) << '\n';
  for (const auto& [name, value] : spec.hyperparameters) out << name << " = " << fmt(value) << '\n';
}

learn::ClassifierSpec read_spec(const fs::path& path, const learn::TrainingOptions& options) {
  learn::ClassifierSpec spec;
  bool have_kind = false;
  for (const auto& line : read_lines(path)) {
    const auto eq = line.find(" = ");
    require(eq != std::string::npos, "spec file " + path.string() + ": bad line '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 3);
    if (key == "kind") {
      spec.kind = learn::parse_kind(value);
      have_kind = true;
    } else {
      spec.hyperparameters[key] = std::stod(value);
    }
  }
  require(have_kind, "spec file " + path.string() + ": missing kind");
  spec.options = options;
  spec.validate();
  return spec;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> c = {
      "model",        "type",          "precision_macro", "recall_macro", "f1_macro",   "recall_class0",
      "recall_class1", "auc",          "auc_boot_mean",   "auc_boot_std", "auc_ci_low", "auc_ci_high",
      "brier",        "log_loss"};
  return c;
}

void check_inputs(const PipelineConfig& config) {
  config.validate();
  require(!config.data.path.empty(), "config: data.path is not set");
  require(fs::is_regular_file(config.data.path), "config: data file does not exist: " + config.data.path);
  require(!config.data.schema.empty(), "config: data.schema is not set");
  require(fs::is_regular_file(config.data.schema), "config: schema file does not exist: " + config.data.schema);
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Pipeline::stage_dir(Stage stage) const { return fs::path(config_.out_dir) / to_string(stage); }

std::string Pipeline::stored_key(Stage stage) const {
  const auto path = stage_dir(stage) / ".key";
  if (!fs::is_regular_file(path)) return {};
  auto text = read_text(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string Pipeline::expected_key(Stage stage) const {
  std::string material(kKeyVersion);
  material += "\nstage=" + to_string(stage) + "\nseed=" + std::to_string(config_.seed) + "\n";
  auto sections = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) material += dump_config(config_, n);
  };
  auto upstream = [&](Stage up) {
    const auto key = stored_key(up);
    if (key.empty() || key != expected_key(up))
      throw Error("stage '" + to_string(up) + "' is missing or out of date; run it first");
    material += "upstream=" + key + "\n";
  };
  switch (stage) {
    case Stage::ingest:
      check_inputs(config_);
      sections({"data"});
      material += "data_sha256=" + sha256_file(config_.data.path) + "\n";
      material += "schema_sha256=" + sha256_file(config_.data.schema) + "\n";
      break;
    case Stage::outliers:
      sections({"outliers"});
      upstream(Stage::ingest);
      break;
    case Stage::augment:
      sections({"augment"});
      upstream(Stage::outliers);
      break;
    case Stage::select_features:
      sections({"features"});
      upstream(Stage::augment);
      break;
    case Stage::tune:
      sections({"pso", "learners"});
      for (auto kind : config_.train.models) material += "model=" + learn::to_string(kind) + "\n";
      upstream(Stage::select_features);
      break;
    case Stage::train:
      sections({"train", "greedy", "blendnet", "learners"});
      upstream(Stage::tune);
      break;
    case Stage::evaluate:
      sections({"evaluate"});
      upstream(Stage::train);
      break;
    case Stage::report:
      upstream(Stage::evaluate);
      break;
  }
  return sha256_hex(material);
}

StageOutcome Pipeline::run_stage(Stage stage, bool force) {
  StageOutcome outcome;
  outcome.stage = stage;
  outcome.dir = stage_dir(stage);
  try {
    outcome.key = expected_key(stage);
    if (!force && stored_key(stage) == outcome.key) {
      outcome.cached = true;
      return outcome;
    }
    // Partial artifacts of a failed attempt stay on disk, but without a key.
    fs::remove_all(outcome.dir);
    fs::create_directories(outcome.dir);
    execute(stage);
    write_text(outcome.dir / ".key", outcome.key + "\n");
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  return outcome;
}

std::vector<StageOutcome> Pipeline::run_all(bool force) {
  try {
    check_inputs(config_);
  } catch (const std::exception& e) {
    throw StageError(Stage::ingest, e.what());
  }
  std::vector<StageOutcome> out;
  bool dirty = force;
  for (auto s : all_stages()) {
    out.push_back(run_stage(s, dirty));
    dirty = dirty || !out.back().cached;
  }
  return out;
}

void Pipeline::execute(Stage stage) {
  switch (stage) {
    case Stage::ingest: return ingest();
    case Stage::outliers: return outliers();
    case Stage::augment: return augment();
    case Stage::select_features: return select_features();
    case Stage::tune: return tune();
    case Stage::train: return train();
    case Stage::evaluate: return evaluate();
    case Stage::report: return report();
  }
}

void Pipeline::ingest() {
  const auto dir = stage_dir(Stage::ingest);
  const auto schema = data::read_schema(config_.data.schema);
  const auto raw = data::ingest_csv(config_.data.path, schema, config_.data.labels);
  data::DropReport drop;
  const auto clean = data::drop_missing(raw, &drop);
  const auto encoded = data::encode(clean);
  const auto parts = data::split(encoded, config_.data.test_fraction, derive_seed(config_.seed, "split"));
  const auto train = data::subset(encoded, parts.train_indices);
  const auto test = data::subset(encoded, parts.test_indices);
  data::write_matrix_csv(dir / "train.csv", train);
  data::write_matrix_csv(dir / "test.csv", test);
  data::write_groups(dir / "groups.txt", encoded.groups);
  data::write_split(dir / "split.txt", parts);

  json j;
  j["rows_read"] = drop.rows_before;
  j["rows_kept"] = drop.rows_after;
  j["retained_fraction"] = drop.retained_fraction();
  j["features"] = encoded.cols();
  j["train_rows"] = train.y.size();
  j["test_rows"] = test.y.size();
  j["train_positive"] = stats::count_label(train.y, 1);
  j["test_positive"] = stats::count_label(test.y, 1);
  write_json(dir / "summary.json", j);
}

void Pipeline::outliers() {
  const auto in = stage_dir(Stage::ingest);
  const auto dir = stage_dir(Stage::outliers);
  auto train = load_matrix(in / "train.csv", in / "groups.txt");
  const auto mask = train.numeric_mask();

  std::vector<std::size_t> targets;
  if (config_.outliers.columns.empty()) {
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (mask[j]) targets.push_back(j);
  } else {
    targets = column_indices(train.feature_names, config_.outliers.columns);
    for (auto j : targets) require(mask[j], "outliers: column '" + train.feature_names[j] + "' is not numeric");
  }

  std::vector<NamedBounds> bounds;
  json columns = json::array();
  auto flags_out = open_out(dir / "flags.csv");
  flags_out << "column,row_index,source,original,corrected\n";
  std::size_t total_flags = 0;
  if (config_.outliers.enabled) {
    for (auto j : targets) {
      const auto name = train.feature_names[j];
      const auto series = stats::column(train.X, static_cast<Eigen::Index>(j));
      const auto result = outlier::run_bcp_hi(series, config_.outliers.bcp);
      if (series.size() >= 4) bounds.push_back({name, outlier::ColumnBounds::fit(series, config_.outliers.bcp)});
      std::size_t by_source[3] = {0, 0, 0};
      for (std::size_t k = 0; k < result.flags.size(); ++k) {
        const auto row = result.flags.indices[k];
        ++by_source[static_cast<int>(result.flags.source[k])];
        data::write_csv_field(flags_out, name);
        flags_out << ',' << row << ',' << source_text(result.flags.source[k]) << ',' << fmt(series[row]) << ','
                  << fmt(result.corrected[row]) << '\n';
      }
      for (std::size_t r = 0; r < series.size(); ++r)
        train.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = result.corrected[r];
      total_flags += result.flags.size();
      columns.push_back({{"column", name},
                         {"change_points", result.segments.change_points.size()},
                         {"flagged", result.flags.size()},
                         {"iqr_only", by_source[0]},
                         {"hampel_only", by_source[1]},
                         {"both", by_source[2]}});
    }
  }
  write_bounds(dir / "bounds.txt", bounds);
  data::write_matrix_csv(dir / "train.csv", train);

  json j;
  j["enabled"] = config_.outliers.enabled;
  j["flagged_total"] = total_flags;
  j["columns"] = columns;
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) numeric.push_back(c);
  if (numeric.size() >= 2 && train.X.rows() >= 3) {
    const auto pca = outlier::pca_fit(stats::take_cols(train.X, numeric), 0.95, true);
    j["pca"] = {{"components", pca.k()},
                {"explained_variance_ratio", stats::to_std(pca.explained_variance_ratio)}};
  }
  write_json(dir / "summary.json", j);
}

void Pipeline::augment() {
  const auto dir = stage_dir(Stage::augment);
  const auto m = load_matrix(stage_dir(Stage::outliers) / "train.csv", stage_dir(Stage::ingest) / "groups.txt");
  const auto mask = m.numeric_mask();
  Matrix X = m.X;
  if (config_.augment.quantile) {
    auto [qt, Xq] = augment::quantile_fit_transform(X, mask);
    X = std::move(Xq);
    auto out = open_out(dir / "quantile.txt");
    qt.save(out);
  }
  const auto plan = augment::AugmentationPlan::make(m.y, config_.augment.ratio, config_.augment.noise_scale,
                                                    derive_seed(config_.seed, "augment"));
  const auto balanced = augment::balance(X, m.y, plan, mask);
  data::EncodedMatrix out;
  out.X = balanced.X;
  out.y = balanced.y;
  out.feature_names = m.feature_names;
  out.groups = m.groups;
  data::write_matrix_csv(dir / "train.csv", out);
  {
    auto src = open_out(dir / "sources.csv");
    src << "source,synthetic\n";
    for (std::size_t i = 0; i < balanced.sources.size(); ++i)
      src << balanced.sources[i] << ',' << (balanced.synthetic[i] ? 1 : 0) << '\n';
  }

  json j;
  j["quantile"] = config_.augment.quantile;
  j["rows_in"] = m.y.size();
  j["minority_label"] = plan.minority;
  j["minority_count"] = plan.minority_count;
  j["majority_target"] = plan.majority_target;
  j["synthetic_rows"] = plan.synthetic_count;
  j["rows_out"] = out.y.size();
  j["count0"] = stats::count_label(out.y, 0);
  j["count1"] = stats::count_label(out.y, 1);
  write_json(dir / "summary.json", j);
}

void Pipeline::select_features() {
  const auto dir = stage_dir(Stage::select_features);
  const auto m = data::read_matrix_csv(stage_dir(Stage::augment) / "train.csv");
  const auto& fc = config_.features;
  const int D = static_cast<int>(m.X.cols());

  features::SelectionResult sel;
  std::map<int, double> cv;
  if (fc.enabled && fc.k < D) {
    sel = features::rfe(m.X, m.y, m.feature_names, fc.estimator, fc.k, derive_seed(config_.seed, "rfe"));
    const int hi = fc.k_max == 0 ? D : std::min(fc.k_max, D);
    std::vector<int> ks;
    for (int k = std::min(fc.k_min, hi); k <= hi; ++k) ks.push_back(k);
    cv = features::cv_score_vs_k(m.X, m.y, fc.estimator, ks, fc.cv_folds, derive_seed(config_.seed, "rfe_cv"));
  } else {
    sel.selected = m.feature_names;
    for (int j = 0; j < D; ++j) sel.selected_indices.push_back(static_cast<std::size_t>(j));
  }

  std::string selected;
  for (const auto& s : sel.selected) selected += s + "\n";
  write_text(dir / "selected.txt", selected);
  std::string ranking;
  for (auto it = sel.elimination_order.rbegin(); it != sel.elimination_order.rend(); ++it) ranking += *it + "\n";
  write_text(dir / "ranking.txt", ranking);
  {
    auto out = open_out(dir / "cv_scores.csv");
    out << "k,score\n";
    for (const auto& [k, s] : cv) out << k << ',' << fmt(s) << '\n';
  }
  {
    const Matrix R = features::pearson_matrix(m.X);
    auto out = open_out(dir / "correlation.csv");
    out << "feature";
    for (const auto& n : m.feature_names) {
      out << ',';
      data::write_csv_field(out, n);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < R.rows(); ++i) {
      data::write_csv_field(out, m.feature_names[static_cast<std::size_t>(i)]);
      for (Eigen::Index c = 0; c < R.cols(); ++c) out << ',' << fmt(R(i, c));
      out << '\n';
    }
  }
  json j;
  j["enabled"] = fc.enabled;
  j["estimator"] = learn::to_string(fc.estimator.kind);
  j["features_in"] = D;
  j["selected"] = sel.selected;
  if (!cv.empty()) {
    auto best = std::max_element(cv.begin(), cv.end(), [](auto& a, auto& b) { return a.second < b.second; });
    j["best_k_by_cv"] = best->first;
  }
  write_json(dir / "summary.json", j);
}

namespace {

struct TrainingData {
  Matrix X;
  Labels y;
  std::vector<std::string> names;
  std::vector<std::size_t> sources;  // synthetic rows share their source row's id
};

TrainingData selected_training(const fs::path& augment_dir, const fs::path& features_dir) {
  const auto m = data::read_matrix_csv(augment_dir / "train.csv");
  const auto names = read_lines(features_dir / "selected.txt");
  TrainingData td{stats::take_cols(m.X, column_indices(m.feature_names, names)), m.y, names, {}};
  const auto lines = read_lines(augment_dir / "sources.csv");
  require(lines.size() == m.y.size() + 1, "sources.csv: row count does not match the training matrix");
  for (std::size_t i = 1; i < lines.size(); ++i) td.sources.push_back(std::stoull(lines[i].substr(0, lines[i].find(','))));
  return td;
}

}  // namespace

void Pipeline::tune() {
  const auto dir = stage_dir(Stage::tune);
  auto td = selected_training(stage_dir(Stage::augment), stage_dir(Stage::select_features));
  const auto& tc = config_.tune;
  if (tc.enabled && tc.max_rows > 0 && td.y.size() > tc.max_rows) {
    const double fraction = static_cast<double>(tc.max_rows) / static_cast<double>(td.y.size());
    const auto keep =
        stats::grouped_stratified_holdout(td.y, td.sources, fraction, derive_seed(config_.seed, "tune_rows")).second;
    td.X = stats::take_rows(td.X, keep);
    td.y = stats::take(td.y, keep);
    std::vector<std::size_t> sources;
    for (auto i : keep) sources.push_back(td.sources[i]);
    td.sources = std::move(sources);
  }
  json models = json::array();
  for (auto kind : config_.train.models) {
    const auto name = learn::to_string(kind);
    const bool tuned = tc.enabled && std::find(tc.models.begin(), tc.models.end(), kind) != tc.models.end();
    learn::ClassifierSpec spec = learn::ClassifierSpec::defaults(kind);
    spec.options = config_.learners;
    auto trace = open_out(dir / (name + "_trace.csv"));
    trace << "iteration,best_fitness\n";
    json entry = {{"model", name}, {"tuned", tuned}};
    if (tuned) {
      auto swarm = tc.swarm;
      swarm.seed = derive_seed(config_.seed, "pso/" + name);
      const auto result =
          pso::tune_model(kind, td.X, td.y, pso::SearchSpace::for_kind(kind), swarm, tc.folds, config_.learners, td.sources);
      spec = result.spec;
      for (std::size_t t = 0; t < result.trace.size(); ++t) trace << t << ',' << fmt(result.trace[t]) << '\n';
      entry["best_cv_auc"] = result.best_fitness;
    }
    entry["hyperparameters"] = spec.hyperparameters;
    models.push_back(entry);
    write_spec(dir / (name + ".spec"), spec);
  }
  json j;
  j["rows"] = td.y.size();
  j["models"] = models;
  write_json(dir / "summary.json", j);
}

namespace {

bool wants(const PipelineConfig& c, std::string_view ensemble) {
  return std::find(c.train.ensembles.begin(), c.train.ensembles.end(), ensemble) != c.train.ensembles.end();
}

std::vector<learn::ClassifierSpec> load_specs(const PipelineConfig& c, const fs::path& tune_dir) {
  std::vector<learn::ClassifierSpec> specs;
  for (auto kind : c.train.models) specs.push_back(read_spec(tune_dir / (learn::to_string(kind) + ".spec"), c.learners));
  return specs;
}

std::vector<std::string> model_names(const PipelineConfig& c) {
  std::vector<std::string> out;
  for (auto kind : c.train.models) out.push_back(learn::to_string(kind));
  return out;
}

}  // namespace

void Pipeline::train() {
  const auto dir = stage_dir(Stage::train);
  fs::create_directories(dir / "models");
  const auto td = selected_training(stage_dir(Stage::augment), stage_dir(Stage::select_features));
  const auto specs = load_specs(config_, stage_dir(Stage::tune));
  const auto names = model_names(config_);

  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto model = learn::fit(specs[k], td.X, td.y, derive_seed(config_.seed, "fit/" + names[k]));
    learn::save_classifier((dir / "models" / (names[k] + ".model")).string(), *model);
  }

  json j;
  j["rows"] = td.y.size();
  j["features"] = td.names.size();
  j["models"] = names;
  j["ensembles"] = config_.train.ensembles;
  if (wants(config_, "greedy") || wants(config_, "stack")) {
    const auto oof_seed = derive_seed(config_.seed, "oof");
    const auto oof = ensemble::out_of_fold_predictions(
        specs, td.X, td.y,
        stats::grouped_stratified_folds(td.y, td.sources, config_.train.stack_folds, derive_seed(oof_seed, "folds")),
        oof_seed);
    const auto parts = stats::grouped_stratified_holdout(td.y, td.sources, config_.train.validation_fraction,
                                                         derive_seed(config_.seed, "validation"));
    ensemble::PredictionBundle bundle{names, stats::take_rows(oof.P, parts.second), stats::take(td.y, parts.second)};
    ensemble::GreedyTrace trace;
    const auto weights = ensemble::greedy_weights(bundle, config_.train.greedy, &trace);
    {
      auto out = open_out(dir / "weights.csv");
      out << "model_name,weight\n";
      for (std::size_t k = 0; k < names.size(); ++k)
        out << names[k] << ',' << fmt(weights.w(static_cast<Eigen::Index>(k))) << '\n';
    }
    const Vector uniform = ensemble::uniform_weights(names.size()).w;
    j["greedy"] = {{"validation_rows", parts.second.size()},
                   {"passes", trace.passes},
                   {"accepted_moves", trace.accepted_losses.size() - 1},
                   {"loss_uniform", ensemble::regularised_loss(bundle, uniform, config_.train.greedy.lambda)},
                   {"loss_greedy", trace.accepted_losses.back()},
                   {"weights", stats::to_std(weights.w)}};

    if (wants(config_, "stack")) {
      const Matrix meta = ensemble::stack_meta_features(oof.P, weights.w);
      const Matrix X_fit = stats::take_rows(meta, parts.first);
      const Labels y_fit = stats::take(td.y, parts.first);
      const Matrix X_val = stats::take_rows(meta, parts.second);
      const Labels y_val = stats::take(td.y, parts.second);
      auto cfg = config_.blendnet;
      cfg.seed = derive_seed(config_.seed, "blendnet");
      auto net = blendnet::BlendNet::build(static_cast<int>(meta.cols()), cfg);
      net.train(X_fit, y_fit, &X_val, y_val);
      blendnet::save_blendnet((dir / "blendnet.model").string(), net);
      auto out = open_out(dir / "blendnet_loss.csv");
      out << "epoch,loss,validation_loss\n";
      for (const auto& r : net.history()) out << r.epoch << ',' << fmt(r.loss) << ',' << fmt(r.validation_loss) << '\n';
      j["blendnet"] = {{"train_rows", y_fit.size()},
                       {"parameters", net.parameter_count()},
                       {"final_loss", net.history().back().loss},
                       {"final_validation_loss", net.history().back().validation_loss}};
    }
  }
  write_json(dir / "summary.json", j);
}

void Pipeline::evaluate() {
  const auto dir = stage_dir(Stage::evaluate);
  const auto ingest_dir = stage_dir(Stage::ingest);
  auto test = SealedTestSet(ingest_dir / "test.csv", ingest_dir / "groups.txt").open("evaluate");

  if (config_.outliers.enabled && config_.outliers.apply_to_test) {
    for (const auto& nb : read_bounds(stage_dir(Stage::outliers) / "bounds.txt")) {
      const auto j = static_cast<Eigen::Index>(column_indices(test.feature_names, {nb.column})[0]);
      const auto series = stats::column(test.X, j);
      const auto corrected = outlier::median_correct(series, nb.bounds.flag(series), config_.outliers.bcp.window);
      for (std::size_t r = 0; r < corrected.size(); ++r) test.X(static_cast<Eigen::Index>(r), j) = corrected[r];
    }
  }
  if (config_.augment.quantile) {
    std::ifstream in(stage_dir(Stage::augment) / "quantile.txt");
    require(static_cast<bool>(in), "missing quantile transform artifact");
    test.X = augment::QuantileTransform::load(in).transform(test.X);
  }
  const auto selected = read_lines(stage_dir(Stage::select_features) / "selected.txt");
  const Matrix X = stats::take_cols(test.X, column_indices(test.feature_names, selected));
  const auto& y = test.y;

  const auto train_dir = stage_dir(Stage::train);
  const auto names = model_names(config_);
  Matrix P(X.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto model = learn::load_classifier((train_dir / "models" / (names[k] + ".model")).string());
    P.col(static_cast<Eigen::Index>(k)) = model->predict_proba(X);
  }

  std::vector<std::pair<std::string, std::string>> rows;  // name, type
  std::vector<Vector> scores;
  std::optional<Labels> vote_labels;
  for (std::size_t k = 0; k < names.size(); ++k) {
    rows.emplace_back(names[k], "base");
    scores.push_back(P.col(static_cast<Eigen::Index>(k)));
  }
  const double threshold = config_.evaluate.threshold;
  if (wants(config_, "vote")) {
    rows.emplace_back("vote", "ensemble");
    scores.push_back(ensemble::vote_score(P, threshold));
    Matrix hard = (P.array() >= threshold).cast<double>();
    vote_labels = ensemble::majority_vote(hard);
  }
  if (wants(config_, "average")) {
    rows.emplace_back("average", "ensemble");
    scores.push_back(ensemble::plain_average(P));
  }
  Vector w;
  if (wants(config_, "greedy") || wants(config_, "stack")) {
    w.resize(static_cast<Eigen::Index>(names.size()));
    const auto lines = read_lines(train_dir / "weights.csv");
    require(lines.size() == names.size() + 1, "weights.csv: wrong row count");
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto& line = lines[k + 1];
      const auto comma = line.find(',');
      require(line.substr(0, comma) == names[k], "weights.csv: model order mismatch");
      w(static_cast<Eigen::Index>(k)) = std::stod(line.substr(comma + 1));
    }
  }
  if (wants(config_, "greedy")) {
    rows.emplace_back("greedy", "ensemble");
    scores.push_back(ensemble::weighted_average(P, w));
  }
  if (wants(config_, "stack")) {
    const auto net = blendnet::load_blendnet((train_dir / "blendnet.model").string());
    rows.emplace_back("blendnet", "stack");
    scores.push_back(net.predict_proba(ensemble::stack_meta_features(P, w)));
  }

  auto options = config_.evaluate;
  options.seed = derive_seed(config_.seed, "bootstrap");
  json models = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [name, type] = rows[r];
    const auto s = stats::to_std(scores[r]);
    const auto e = name == "vote" && vote_labels ? metrics::evaluate(y, s, *vote_labels, options)
                                                 : metrics::evaluate(y, s, options);
    models.push_back(evaluation_json(name, type, e));
    {
      auto out = open_out(dir / ("roc_" + name + ".csv"));
      out << "fpr,tpr,threshold\n";
      const auto& c = e.roc.curve;
      for (std::size_t i = 0; i < c.fpr.size(); ++i) out << fmt(c.fpr[i]) << ',' << fmt(c.tpr[i]) << ',' << fmt(c.thresholds[i]) << '\n';
    }
    {
      auto out = open_out(dir / ("calibration_" + name + ".csv"));
      out << "bin_mid,mean_pred,obs_rate,count\n";
      const auto& c = e.calibration;
      for (std::size_t b = 0; b < c.counts.size(); ++b)
        out << fmt(0.5 * (c.edges[b] + c.edges[b + 1])) << ',' << fmt(c.mean_predicted[b]) << ','
            << fmt(c.observed_rate[b]) << ',' << c.counts[b] << '\n';
    }
  }
  {
    auto out = open_out(dir / "predictions.csv");
    out << "row,label";
    for (const auto& [name, type] : rows) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out << i << ',' << y[static_cast<std::size_t>(i)];
      for (const auto& s : scores) out << ',' << fmt(s(i));
      out << '\n';
    }
  }
  json j;
  j["test_rows"] = y.size();
  j["test_positive"] = stats::count_label(y, 1);
  j["threshold"] = threshold;
  j["n_boot"] = options.n_boot;
  j["models"] = models;
  write_json(dir / "evaluation.json", j);
}

void Pipeline::report() {
  const auto dir = stage_dir(Stage::report);
  const auto eval = read_json(stage_dir(Stage::evaluate) / "evaluation.json");

  json rows = json::array();
  for (const auto& m : eval.at("models")) {
    json r;
    r["model"] = m.at("name");
    r["type"] = m.at("type");
    r["precision_macro"] = m.at("macro").at("precision");
    r["recall_macro"] = m.at("macro").at("recall");
    r["f1_macro"] = m.at("macro").at("f1");
    r["recall_class0"] = m.at("class0").at("recall");
    r["recall_class1"] = m.at("class1").at("recall");
    r["auc"] = m.at("auc");
    r["auc_boot_mean"] = m.at("bootstrap").at("mean");
    r["auc_boot_std"] = m.at("bootstrap").at("std");
    r["auc_ci_low"] = m.at("bootstrap").at("ci_low");
    r["auc_ci_high"] = m.at("bootstrap").at("ci_high");
    r["brier"] = m.at("brier");
    r["log_loss"] = m.at("log_loss");
    rows.push_back(r);
  }

  json doc;
  doc["test_rows"] = eval.at("test_rows");
  doc["n_boot"] = eval.at("n_boot");
  doc["columns"] = report_columns();
  doc["rows"] = rows;
  write_json(dir / "report.json", doc);

  auto cell = [](const json& v) { return v.is_string() ? v.get<std::string>() : fmt(v.get<double>()); };
  {
    auto out = open_out(dir / "report.csv");
    for (std::size_t c = 0; c < report_columns().size(); ++c) out << (c ? "," : "") << report_columns()[c];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < report_columns().size(); ++c) out << (c ? "," : "") << cell(r.at(report_columns()[c]));
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "report.md");
    out << "# Model comparison\n\n"
        << "Test rows: " << eval.at("test_rows").get<std::size_t>() << ". AUC band: bootstrap mean +/- one standard deviation over "
        << eval.at("n_boot").get<int>() << " resamples, with the 95% percentile interval.\n\n";
    out << "| model | macro P | macro R | macro F1 | recall 0 | recall 1 | AUC | AUC mean +/- std | 95% CI | Brier | log loss |\n"
        << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    auto f4 = [](const json& v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v.get<double>();
      return s.str();
    };
    for (const auto& r : rows) {
      out << "| " << r.at("model").get<std::string>() << " | " << f4(r.at("precision_macro")) << " | "
          << f4(r.at("recall_macro")) << " | " << f4(r.at("f1_macro")) << " | " << f4(r.at("recall_class0")) << " | "
          << f4(r.at("recall_class1")) << " | " << f4(r.at("auc")) << " | " << f4(r.at("auc_boot_mean")) << " +/- "
          << f4(r.at("auc_boot_std")) << " | [" << f4(r.at("auc_ci_low")) << ", " << f4(r.at("auc_ci_high")) << "] | "
          << f4(r.at("brier")) << " | " << f4(r.at("log_loss")) << " |\n";
    }
  }
}

}  // namespace gwe::pipeline
