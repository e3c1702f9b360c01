#pragma once

#include "gwe/common.hpp"
#include "gwe/learners.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gwe::ensemble {

// Column i of P holds model i's class-1 probabilities on the m shared rows.
struct PredictionBundle {
  std::vector<std::string> names;
  Matrix P;
  Labels y;

  Eigen::Index models() const { return P.cols(); }
  Eigen::Index rows() const { return P.rows(); }
  void validate() const;
};

enum class Provenance { greedy, softmax, uniform };
std::string to_string(Provenance p);

struct WeightVector {
  Vector w;
  Provenance provenance = Provenance::uniform;
};

struct GreedyConfig {
  double lambda = 0.01;
  double delta = 0.05;
  // A pass that improves by less than `tolerance` halves the increment until
  // it would drop below min_delta; min_delta = delta keeps it fixed.
  double min_delta = 0.005;
  int max_passes = 200;
  double tolerance = 1e-6;
  void validate() const;
};

struct GreedyTrace {
  std::vector<double> accepted_losses;  // loss before any move, then after every accepted move
  int passes = 0;
};

// (1/m) sum_j (sum_i w_i f_i(x_j) - y_j)^2 + lambda sum_i w_i^2
double regularised_loss(const PredictionBundle& bundle, const Vector& w, double lambda);

// Starts uniform. Each pass tries, model by model, w_i += delta followed by
// renormalisation and keeps the move only if the loss strictly drops. Stops
// after a pass whose total improvement is below the tolerance, or after
// max_passes.
WeightVector greedy_weights(const PredictionBundle& bundle, const GreedyConfig& config = {},
                            GreedyTrace* trace = nullptr);
WeightVector softmax_weights(std::span<const double> scores);
WeightVector uniform_weights(std::size_t n);

Vector weighted_average(const Matrix& P, const Vector& w);
Vector plain_average(const Matrix& P);

// Row-wise mode of hard labels (columns = models); a tie votes 1.
Labels majority_vote(const Matrix& labels);
// Fraction of models voting 1 at the threshold, used as a ranking score.
Vector vote_share(const Matrix& P, double threshold = 0.5);
// (votes for 1 + mean probability) / (models + 1): orders rows by vote
// count first and breaks ties by the mean probability.
Vector vote_score(const Matrix& P, double threshold = 0.5);
Labels threshold_labels(const Vector& p, double threshold = 0.5);

// w_i <- w_i exp(-alpha m_i), renormalised; m_i = y_i f_t(x_i) with y in {-1, +1}.
Vector boosting_weight_update(const Vector& sample_weights, double alpha, std::span<const double> margins);

// Columns [f_1 .. f_n, plain average, weighted average].
Matrix stack_meta_features(const Matrix& P, const Vector& average, const Vector& weighted);
Matrix stack_meta_features(const Matrix& P, const Vector& w);

struct OutOfFold {
  Matrix P;                // row i predicted by models that never saw row i
  std::vector<int> fold_of;
};

OutOfFold out_of_fold_predictions(const std::vector<learn::ClassifierSpec>& specs, const Matrix& X,
                                  std::span<const int> y, int folds, std::uint64_t seed);
// Caller-chosen fold ids in [0, folds).
OutOfFold out_of_fold_predictions(const std::vector<learn::ClassifierSpec>& specs, const Matrix& X,
                                  std::span<const int> y, std::vector<int> fold_of, std::uint64_t seed);

}  // namespace gwe::ensemble
