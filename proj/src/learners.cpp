#include "gwe/learners.hpp"

#include "gwe/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace gwe::learn {

namespace {

constexpr int kFormatVersion = 1;

struct KindName {
  Kind kind;
  const char* name;
};
constexpr KindName kKindNames[] = {{Kind::lr, "lr"},   {Kind::knn, "knn"}, {Kind::ert, "ert"},
                                   {Kind::gb, "gb"},   {Kind::mlp, "mlp"}, {Kind::svm, "svm"}};

// Option fields by name, so the artifact stays readable and order-stable.
template <class F>
void for_each_option(TrainingOptions& o, F&& f) {
  f("lr_max_iter", o.lr_max_iter);
  f("svm_max_iter", o.svm_max_iter);
  f("svm_calibration_fraction", o.svm_calibration_fraction);
  f("gb_bins", o.gb_bins);
  f("gb_lambda", o.gb_lambda);
  f("gb_min_child_weight", o.gb_min_child_weight);
  f("gb_min_samples_leaf", o.gb_min_samples_leaf);
  f("ert_max_features", o.ert_max_features);
  f("mlp_epochs", o.mlp_epochs);
  f("mlp_batch_size", o.mlp_batch_size);
  f("mlp_learning_rate", o.mlp_learning_rate);
}

void check_options(const TrainingOptions& o) {
  require(o.lr_max_iter >= 1, "lr_max_iter must be >= 1");
  require(o.svm_max_iter >= 1, "svm_max_iter must be >= 1");
  require(o.svm_calibration_fraction > 0.0 && o.svm_calibration_fraction < 1.0,
          "svm_calibration_fraction must be in (0, 1)");
  require(o.gb_bins >= 2 && o.gb_bins <= 256, "gb_bins must be in [2, 256]");
  require(o.gb_lambda >= 0.0, "gb_lambda must be nonnegative");
  require(o.gb_min_child_weight >= 0.0, "gb_min_child_weight must be nonnegative");
  require(o.gb_min_samples_leaf >= 1, "gb_min_samples_leaf must be >= 1");
  require(o.ert_max_features >= 0, "ert_max_features must be nonnegative");
  require(o.mlp_epochs >= 1, "mlp_epochs must be >= 1");
  require(o.mlp_batch_size >= 1, "mlp_batch_size must be >= 1");
  require(o.mlp_learning_rate > 0.0, "mlp_learning_rate must be positive");
}

}  // namespace

std::string to_string(Kind kind) {
  for (const auto& k : kKindNames)
    if (k.kind == kind) return k.name;
  throw Error("unknown classifier kind");
}

Kind parse_kind(std::string_view name) {
  for (const auto& k : kKindNames)
    if (name == k.name) return k.kind;
  throw Error("unknown classifier kind '" + std::string(name) + "' (expected lr, knn, ert, gb, mlp or svm)");
}

const std::vector<Kind>& all_kinds() {
  static const std::vector<Kind> kinds = {Kind::gb, Kind::mlp, Kind::svm, Kind::knn, Kind::lr, Kind::ert};
  return kinds;
}

const std::vector<HyperparameterBound>& search_space(Kind kind) {
  static const std::vector<HyperparameterBound> gb = {
      {"n_estimators", true, 50, 200}, {"max_depth", true, 3, 10}, {"learning_rate", false, 0.01, 0.1}};
  static const std::vector<HyperparameterBound> mlp = {{"hidden_layer_sizes", true, 50, 200},
                                                       {"alpha", false, 1e-4, 1e-2}};
  static const std::vector<HyperparameterBound> svm = {{"C", false, 0.1, 10}, {"gamma", false, 0.001, 0.1}};
  static const std::vector<HyperparameterBound> knn = {{"n_neighbors", true, 3, 20}};
  static const std::vector<HyperparameterBound> lr = {{"C", false, 0.1, 10}};
  static const std::vector<HyperparameterBound> ert = {
      {"n_estimators", true, 50, 200}, {"max_depth", true, 10, 20}, {"min_samples_split", true, 2, 10}};
  switch (kind) {
    case Kind::gb: return gb;
    case Kind::mlp: return mlp;
    case Kind::svm: return svm;
    case Kind::knn: return knn;
    case Kind::lr: return lr;
    case Kind::ert: return ert;
  }
  throw Error("unknown classifier kind");
}

ClassifierSpec ClassifierSpec::defaults(Kind kind) {
  ClassifierSpec s;
  s.kind = kind;
  switch (kind) {
    case Kind::gb: s.hyperparameters = {{"n_estimators", 150}, {"max_depth", 5}, {"learning_rate", 0.05}}; break;
    case Kind::mlp: s.hyperparameters = {{"hidden_layer_sizes", 150}, {"alpha", 0.005}}; break;
    case Kind::svm: s.hyperparameters = {{"C", 3}, {"gamma", 0.05}}; break;
    case Kind::knn: s.hyperparameters = {{"n_neighbors", 10}}; break;
    case Kind::lr: s.hyperparameters = {{"C", 1.5}}; break;
    case Kind::ert:
      s.hyperparameters = {{"n_estimators", 120}, {"max_depth", 15}, {"min_samples_split", 4}};
      break;
  }
  return s;
}

double ClassifierSpec::get(const std::string& name) const {
  auto it = hyperparameters.find(name);
  if (it != hyperparameters.end()) return it->second;
  const auto d = defaults(kind);
  auto jt = d.hyperparameters.find(name);
  require(jt != d.hyperparameters.end(), to_string(kind) + ": unknown hyperparameter '" + name + "'");
  return jt->second;
}

int ClassifierSpec::get_int(const std::string& name) const { return static_cast<int>(std::lround(get(name))); }

void ClassifierSpec::validate() const {
  const auto& space = search_space(kind);
  for (const auto& [name, value] : hyperparameters) {
    auto it = std::find_if(space.begin(), space.end(), [&](const auto& b) { return b.name == name; });
    require(it != space.end(), to_string(kind) + ": unknown hyperparameter '" + name + "'");
    require(std::isfinite(value), to_string(kind) + ": hyperparameter '" + name + "' is not finite");
    require(value >= it->lower && value <= it->upper,
            to_string(kind) + ": hyperparameter '" + name + "' = " + data::format_double(value) + " outside [" +
                data::format_double(it->lower) + ", " + data::format_double(it->upper) + "]");
    if (it->integer)
      require(value == std::round(value), to_string(kind) + ": hyperparameter '" + name + "' must be an integer");
  }
  check_options(options);
}

Classifier::Classifier(ClassifierSpec spec) : spec_(std::move(spec)) {}

void Classifier::fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) {
  spec_.validate();
  const std::string who = to_string(kind()) + ".fit: ";
  require(static_cast<std::size_t>(X.rows()) == y.size(), who + "row count mismatch");
  require(X.rows() >= 2 && X.cols() >= 1, who + "need at least 2 rows and 1 column");
  std::size_t ones = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] == 0 || y[i] == 1, who + "labels must be 0 or 1 (row " + std::to_string(i) + ")");
    ones += static_cast<std::size_t>(y[i]);
  }
  require(ones > 0 && ones < y.size(), who + "both classes must be present");
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      require(std::isfinite(X(i, j)), who + "non-finite feature at row " + std::to_string(i) + ", column " +
                                          std::to_string(j));
  loss_history_.clear();
  do_fit(X, y, seed);
  meta_ = {seed, y.size(), static_cast<std::size_t>(X.cols())};
  fitted_ = true;
}

Vector Classifier::predict_proba(const Matrix& X) const {
  require(fitted_, to_string(kind()) + ".predict_proba: model is not fitted");
  require(static_cast<std::size_t>(X.cols()) == meta_.features,
          to_string(kind()) + ".predict_proba: expected " + std::to_string(meta_.features) + " features, got " +
              std::to_string(X.cols()));
  Vector p = do_predict(X);
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i), 0.0, 1.0);
  return p;
}

Labels Classifier::predict(const Matrix& X, double threshold) const {
  const Vector p = predict_proba(X);
  Labels out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= threshold ? 1 : 0;
  return out;
}

void Classifier::save(std::ostream& out) const {
  require(fitted_, "save: model is not fitted");
  out << "gwe-model " << kFormatVersion << '\n';
  out << "kind " << to_string(kind()) << '\n';
  out << "hyperparameters " << spec_.hyperparameters.size();
  for (const auto& [name, value] : spec_.hyperparameters) {
    out << ' ' << name << ' ';
    io::put(out, value);
  }
  out << "\noptions";
  auto opts = spec_.options;
  for_each_option(opts, [&](const char* name, auto& v) {
    out << ' ' << name << ' ';
    io::put(out, static_cast<double>(v));
  });
  out << "\nmeta " << meta_.seed << ' ' << meta_.rows << ' ' << meta_.features << "\nstate\n";
  save_state(out);
  out << "\nend\n";
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
  switch (spec.kind) {
    case Kind::lr: return std::make_unique<LogisticRegression>(spec);
    case Kind::svm: return std::make_unique<LinearSvm>(spec);
    case Kind::knn: return std::make_unique<KNearestNeighbors>(spec);
    case Kind::ert: return std::make_unique<ExtraTrees>(spec);
    case Kind::gb: return std::make_unique<GradientBoosting>(spec);
    case Kind::mlp: return std::make_unique<MultilayerPerceptron>(spec);
  }
  throw Error("unknown classifier kind");
}

std::unique_ptr<Classifier> fit(const ClassifierSpec& spec, const Matrix& X, std::span<const int> y,
                                std::uint64_t seed) {
  auto model = make_classifier(spec);
  model->fit(X, y, seed);
  return model;
}

void save_classifier(const std::string& path, const Classifier& model) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write model file " + path);
  model.save(out);
  require(static_cast<bool>(out), "failed writing model file " + path);
}

std::unique_ptr<Classifier> load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read model file " + path);
  return load_classifier(in);
}

std::unique_ptr<Classifier> load_classifier(std::istream& in) {
  io::expect(in, "gwe-model");
  const auto version = io::get_int(in);
  require(version == kFormatVersion, "model artifact version " + std::to_string(version) + " is not supported");
  io::expect(in, "kind");
  ClassifierSpec spec;
  spec.kind = parse_kind(io::get_token(in));
  io::expect(in, "hyperparameters");
  const auto n = io::get_int(in);
  for (long long i = 0; i < n; ++i) {
    auto name = io::get_token(in);
    spec.hyperparameters[name] = io::get_double(in);
  }
  io::expect(in, "options");
  for_each_option(spec.options, [&](const char* name, auto& v) {
    io::expect(in, name);
    v = static_cast<std::remove_reference_t<decltype(v)>>(io::get_double(in));
  });
  io::expect(in, "meta");
  TrainingMeta meta;
  meta.seed = static_cast<std::uint64_t>(std::stoull(io::get_token(in)));
  meta.rows = static_cast<std::size_t>(io::get_int(in));
  meta.features = static_cast<std::size_t>(io::get_int(in));
  io::expect(in, "state");
  spec.validate();
  auto model = make_classifier(spec);
  model->load_state(in);
  io::expect(in, "end");
  model->meta_ = meta;
  model->fitted_ = true;
  return model;
}

Standardizer Standardizer::fit(const Matrix& X) {
  Standardizer s;
  const auto n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale = Vector::Ones(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
    if (var > 1e-24) s.scale(j) = std::sqrt(var);
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
  require(X.cols() == mean.size(), "standardizer: column count mismatch");
  Matrix Z = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) Z.col(j) = (X.col(j).array() - mean(j)) / scale(j);
  return Z;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double Tree::predict(const Matrix& X, Eigen::Index row) const {
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const auto& n = nodes[k];
    k = static_cast<std::size_t>(X(row, n.feature) <= n.threshold ? n.left : n.right);
  }
  return nodes[k].value;
}

std::size_t Tree::split_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return !n.is_leaf(); }));
}

namespace io {

void put(std::ostream& out, double v) { out << data::format_double(v); }

void put(std::ostream& out, const Vector& v) {
  out << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << data::format_double(v(i));
  out << '\n';
}

void put(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << data::format_double(m(i, j));
  out << '\n';
}

std::string get_token(std::istream& in) {
  std::string t;
  require(static_cast<bool>(in >> t), "model artifact is truncated");
  return t;
}

void expect(std::istream& in, std::string_view token) {
  const auto t = get_token(in);
  require(t == token, "model artifact: expected '" + std::string(token) + "', found '" + t + "'");
}

double get_double(std::istream& in) {
  const auto t = get_token(in);
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc() && p == t.data() + t.size(), "model artifact: bad number '" + t + "'");
  return v;
}

long long get_int(std::istream& in) {
  const auto t = get_token(in);
  long long v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc() && p == t.data() + t.size(), "model artifact: bad integer '" + t + "'");
  return v;
}

Vector get_vector(std::istream& in) {
  const auto n = get_int(in);
  require(n >= 0, "model artifact: negative vector size");
  Vector v(n);
  for (long long i = 0; i < n; ++i) v(i) = get_double(in);
  return v;
}

Matrix get_matrix(std::istream& in) {
  const auto r = get_int(in);
  const auto c = get_int(in);
  require(r >= 0 && c >= 0, "model artifact: negative matrix size");
  Matrix m(r, c);
  for (long long i = 0; i < r; ++i)
    for (long long j = 0; j < c; ++j) m(i, j) = get_double(in);
  return m;
}

}  // namespace io

}  // namespace gwe::learn
