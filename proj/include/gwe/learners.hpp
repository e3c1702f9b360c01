#pragma once

#include "gwe/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gwe::learn {

enum class Kind { lr, knn, ert, gb, mlp, svm };

std::string to_string(Kind kind);
Kind parse_kind(std::string_view name);
const std::vector<Kind>& all_kinds();

struct HyperparameterBound {
  std::string name;
  bool integer = false;
  double lower = 0.0;
  double upper = 0.0;
};

// The tuning box of each kind.
const std::vector<HyperparameterBound>& search_space(Kind kind);

// Settings that are not tuned but still shape the fit. Stored with the model.
struct TrainingOptions {
  int lr_max_iter = 100;
  int svm_max_iter = 100;
  double svm_calibration_fraction = 0.2;
  int gb_bins = 64;
  double gb_lambda = 1.0;
  double gb_min_child_weight = 1e-3;
  int gb_min_samples_leaf = 1;
  int ert_max_features = 0;  // 0 selects round(sqrt(D))
  int mlp_epochs = 30;
  int mlp_batch_size = 128;
  double mlp_learning_rate = 1e-3;
};

struct ClassifierSpec {
  Kind kind = Kind::lr;
  std::map<std::string, double> hyperparameters;
  TrainingOptions options;

  // Spec filled with the reference optimum of the kind.
  static ClassifierSpec defaults(Kind kind);
  double get(const std::string& name) const;
  int get_int(const std::string& name) const;
  // Throws when a name is unknown to the kind or a value leaves its bounds.
  void validate() const;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::size_t features = 0;
};

class Classifier {
 public:
  explicit Classifier(ClassifierSpec spec);
  virtual ~Classifier() = default;

  const ClassifierSpec& spec() const { return spec_; }
  Kind kind() const { return spec_.kind; }
  const TrainingMeta& meta() const { return meta_; }
  bool fitted() const { return fitted_; }

  // Validates labels (0/1, both present), finiteness and hyperparameters.
  void fit(const Matrix& X, std::span<const int> y, std::uint64_t seed);
  // P(class = 1) per row, in [0, 1].
  Vector predict_proba(const Matrix& X) const;
  // label = 1 iff proba >= threshold.
  Labels predict(const Matrix& X, double threshold = 0.5) const;

  // Training objective after every epoch / iteration / tree (iterative kinds).
  const std::vector<double>& loss_history() const { return loss_history_; }

  void save(std::ostream& out) const;

 protected:
  virtual void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) = 0;
  virtual Vector do_predict(const Matrix& X) const = 0;
  virtual void save_state(std::ostream& out) const = 0;
  virtual void load_state(std::istream& in) = 0;

  std::vector<double> loss_history_;

 private:
  friend std::unique_ptr<Classifier> load_classifier(std::istream& in);
  ClassifierSpec spec_;
  TrainingMeta meta_;
  bool fitted_ = false;
};

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);
std::unique_ptr<Classifier> fit(const ClassifierSpec& spec, const Matrix& X, std::span<const int> y,
                                std::uint64_t seed);

void save_classifier(const std::string& path, const Classifier& model);
std::unique_ptr<Classifier> load_classifier(const std::string& path);
std::unique_ptr<Classifier> load_classifier(std::istream& in);

// Per-column mean/sd scaling used by the linear and neural kinds.
// Constant columns get scale 1 and map to 0.
struct Standardizer {
  Vector mean;
  Vector scale;
  static Standardizer fit(const Matrix& X);
  Matrix apply(const Matrix& X) const;
};

double sigmoid(double z);
// log(1 + exp(z)) without overflow.
double softplus(double z);

// ---------------------------------------------------------------- linear

class LogisticRegression : public Classifier {
 public:
  explicit LogisticRegression(ClassifierSpec spec);

  // (1/N) sum logloss + ||w||^2 / (2 C N) on standardized Z; theta = [b, w].
  static double objective(const Vector& theta, const Matrix& Z, std::span<const int> y, double C,
                          Vector* gradient = nullptr);

  const Vector& theta() const { return theta_; }

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  Standardizer scaler_;
  Vector theta_;
};

// Linear squared-hinge SVM, probabilities from a logistic fit of the margin
// on a stratified calibration fold.
class LinearSvm : public Classifier {
 public:
  explicit LinearSvm(ClassifierSpec spec);

  // 0.5 ||w||^2 + C sum max(0, 1 - s_i (w.z_i + b))^2, s_i = 2y_i - 1; theta = [b, w].
  static double objective(const Vector& theta, const Matrix& Z, std::span<const int> y, double C,
                          Vector* gradient = nullptr);

  Vector margin(const Matrix& X) const;
  double platt_a() const { return platt_a_; }
  double platt_b() const { return platt_b_; }

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  Standardizer scaler_;
  Vector theta_;
  double platt_a_ = 1.0;
  double platt_b_ = 0.0;
};

// Fits p = sigmoid(a * f + b) to labels with Platt's smoothed targets.
std::pair<double, double> fit_platt(std::span<const double> scores, std::span<const int> y);

// ---------------------------------------------------------------- knn

// Euclidean neighbours on the raw matrix. Rows tied with the k-th distance
// all vote, so the result does not depend on row order.
class KNearestNeighbors : public Classifier {
 public:
  explicit KNearestNeighbors(ClassifierSpec spec);

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  Matrix X_;
  Labels y_;
};

// ---------------------------------------------------------------- trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output: raw score (gb) or P(1) (ert)
  std::size_t samples = 0;
  // gb: gradient/hessian sums of the node and of each child of its split.
  double grad = 0.0;
  double hess = 0.0;
  double grad_left = 0.0;
  double hess_left = 0.0;
  double grad_right = 0.0;
  double hess_right = 0.0;
  // gb: structure-score gain of the split; ert: Gini decrease of the split.
  double gain = 0.0;
  double impurity = 0.0;  // ert: Gini impurity of the node
  double fraction = 0.0;  // node samples / training rows
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const Matrix& X, Eigen::Index row) const;
  std::size_t split_count() const;
};

class ExtraTrees : public Classifier {
 public:
  explicit ExtraTrees(ClassifierSpec spec);
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t features() const { return meta().features; }

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  std::vector<Tree> trees_;
};

// Newton boosting of depth-limited regression trees on the logistic loss,
// with histogram split search.
class GradientBoosting : public Classifier {
 public:
  explicit GradientBoosting(ClassifierSpec spec);
  const std::vector<Tree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }
  double lambda() const { return spec().options.gb_lambda; }
  Vector decision_function(const Matrix& X) const;

  // Structure-score improvement of splitting (G, H) into (G_L, H_L) and
  // (G_R, H_R): 0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)].
  static double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda);

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  std::vector<Tree> trees_;
  double base_score_ = 0.0;
};

// ---------------------------------------------------------------- mlp

// One ReLU hidden layer and a logistic output unit.
struct MlpNetwork {
  Matrix W1;  // H x D
  Vector b1;  // H
  Vector w2;  // H
  double b2 = 0.0;

  struct Gradient {
    Matrix W1;
    Vector b1;
    Vector w2;
    double b2 = 0.0;
  };

  Vector forward(const Matrix& Z) const;  // P(1) per row
  // Mean cross-entropy + alpha/(2n) (||W1||^2 + ||w2||^2) over the n rows.
  double loss(const Matrix& Z, std::span<const int> y, double alpha, Gradient* gradient = nullptr) const;
};

class MultilayerPerceptron : public Classifier {
 public:
  explicit MultilayerPerceptron(ClassifierSpec spec);
  const MlpNetwork& network() const { return net_; }

 protected:
  void do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) override;
  Vector do_predict(const Matrix& X) const override;
  void save_state(std::ostream& out) const override;
  void load_state(std::istream& in) override;

 private:
  Standardizer scaler_;
  MlpNetwork net_;
};

// ---------------------------------------------------------------- text io

// Whitespace-separated token stream shared by every model artifact.
namespace io {
void put(std::ostream& out, double v);
void put(std::ostream& out, const Vector& v);
void put(std::ostream& out, const Matrix& m);
void expect(std::istream& in, std::string_view token);
double get_double(std::istream& in);
long long get_int(std::istream& in);
std::string get_token(std::istream& in);
Vector get_vector(std::istream& in);
Matrix get_matrix(std::istream& in);
}  // namespace io

}  // namespace gwe::learn
