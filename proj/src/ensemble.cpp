#include "gwe/ensemble.hpp"

#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>

namespace gwe::ensemble {

void PredictionBundle::validate() const {
  require(P.cols() >= 1, "prediction bundle has no models");
  require(P.rows() >= 1, "prediction bundle has no rows");
  require(static_cast<Eigen::Index>(y.size()) == P.rows(), "prediction bundle: label count mismatch");
  require(names.empty() || static_cast<Eigen::Index>(names.size()) == P.cols(),
          "prediction bundle: name count mismatch");
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      require(std::isfinite(P(i, j)) && P(i, j) >= 0.0 && P(i, j) <= 1.0,
              "prediction bundle: probability outside [0, 1] (row " + std::to_string(i) + ", model " +
                  std::to_string(j) + ")");
  for (int v : y) require(v == 0 || v == 1, "prediction bundle: labels must be 0 or 1");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::greedy: return "greedy";
    case Provenance::softmax: return "softmax";
    case Provenance::uniform: return "uniform";
  }
  return "unknown";
}

void GreedyConfig::validate() const {
  require(lambda >= 0.0, "greedy: lambda must be >= 0");
  require(delta > 0.0 && delta <= 1.0, "greedy: delta must be in (0, 1]");
  require(min_delta > 0.0 && min_delta <= delta, "greedy: min_delta must be in (0, delta]");
  require(max_passes >= 1, "greedy: max_passes must be >= 1");
  require(tolerance > 0.0, "greedy: tolerance must be > 0");
}

double regularised_loss(const PredictionBundle& bundle, const Vector& w, double lambda) {
  require(w.size() == bundle.models(), "regularised_loss: weight count mismatch");
  const Vector yhat = bundle.P * w;
  double sse = 0.0;
  for (Eigen::Index j = 0; j < yhat.size(); ++j) {
    const double e = yhat(j) - bundle.y[static_cast<std::size_t>(j)];
    sse += e * e;
  }
  return sse / static_cast<double>(yhat.size()) + lambda * w.squaredNorm();
}

WeightVector greedy_weights(const PredictionBundle& bundle, const GreedyConfig& config, GreedyTrace* trace) {
  bundle.validate();
  config.validate();
  const auto n = bundle.models();
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  double loss = regularised_loss(bundle, w, config.lambda);
  GreedyTrace local;
  local.accepted_losses.push_back(loss);
  double delta = config.delta;
  for (int pass = 0; pass < config.max_passes; ++pass) {
    const double start = loss;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector candidate = w;
      candidate(i) += delta;
      candidate /= candidate.sum();
      const double next = regularised_loss(bundle, candidate, config.lambda);
      if (next < loss) {
        w = candidate;
        loss = next;
        local.accepted_losses.push_back(loss);
      }
    }
    local.passes = pass + 1;
    if (start - loss < config.tolerance) {
      if (delta / 2 < config.min_delta) break;
      delta /= 2;
    }
  }
  if (trace) *trace = std::move(local);
  return {w, Provenance::greedy};
}

WeightVector softmax_weights(std::span<const double> scores) {
  require(!scores.empty(), "softmax_weights: no scores");
  for (double s : scores) require(std::isfinite(s), "softmax_weights: non-finite score");
  const double top = *std::max_element(scores.begin(), scores.end());
  Vector w(static_cast<Eigen::Index>(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i) w(static_cast<Eigen::Index>(i)) = std::exp(scores[i] - top);
  return {w / w.sum(), Provenance::softmax};
}

WeightVector uniform_weights(std::size_t n) {
  require(n >= 1, "uniform_weights: n must be >= 1");
  return {Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)), Provenance::uniform};
}

Vector weighted_average(const Matrix& P, const Vector& w) {
  require(P.cols() == w.size(), "weighted_average: weight count mismatch");
  Vector out = P * w;
  // Keep the convex-hull bound exact despite rounding.
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = std::clamp(out(i), P.row(i).minCoeff(), P.row(i).maxCoeff());
  return out;
}

Vector plain_average(const Matrix& P) {
  require(P.cols() >= 1, "plain_average: no models");
  return P.rowwise().mean();
}

Labels majority_vote(const Matrix& labels) {
  require(labels.cols() >= 1, "majority_vote: no models");
  Labels out(static_cast<std::size_t>(labels.rows()));
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    const double ones = labels.row(i).sum();
    out[static_cast<std::size_t>(i)] = 2.0 * ones >= static_cast<double>(labels.cols()) ? 1 : 0;
  }
  return out;
}

Vector vote_share(const Matrix& P, double threshold) {
  require(P.cols() >= 1, "vote_share: no models");
  return (P.array() >= threshold).cast<double>().rowwise().mean();
}

Vector vote_score(const Matrix& P, double threshold) {
  require(P.cols() >= 1, "vote_score: no models");
  const Vector votes = (P.array() >= threshold).cast<double>().rowwise().sum();
  return (votes + P.rowwise().mean()) / static_cast<double>(P.cols() + 1);
}

Labels threshold_labels(const Vector& p, double threshold) {
  Labels out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= threshold ? 1 : 0;
  return out;
}

Vector boosting_weight_update(const Vector& sample_weights, double alpha, std::span<const double> margins) {
  require(static_cast<std::size_t>(sample_weights.size()) == margins.size(), "boosting_weight_update: size mismatch");
  Vector out(sample_weights.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) = sample_weights(i) * std::exp(-alpha * margins[static_cast<std::size_t>(i)]);
  const double total = out.sum();
  require(total > 0 && std::isfinite(total), "boosting_weight_update: weights vanished or overflowed");
  return out / total;
}

Matrix stack_meta_features(const Matrix& P, const Vector& average, const Vector& weighted) {
  require(average.size() == P.rows() && weighted.size() == P.rows(), "stack_meta_features: row count mismatch");
  Matrix M(P.rows(), P.cols() + 2);
  M.leftCols(P.cols()) = P;
  M.col(P.cols()) = average;
  M.col(P.cols() + 1) = weighted;
  return M;
}

Matrix stack_meta_features(const Matrix& P, const Vector& w) {
  return stack_meta_features(P, plain_average(P), weighted_average(P, w));
}

OutOfFold out_of_fold_predictions(const std::vector<learn::ClassifierSpec>& specs, const Matrix& X,
                                  std::span<const int> y, int folds, std::uint64_t seed) {
  require(folds >= 2, "out_of_fold_predictions: folds must be >= 2");
  return out_of_fold_predictions(specs, X, y, stats::stratified_folds(y, folds, derive_seed(seed, "oof_folds")), seed);
}

OutOfFold out_of_fold_predictions(const std::vector<learn::ClassifierSpec>& specs, const Matrix& X,
                                  std::span<const int> y, std::vector<int> fold_of, std::uint64_t seed) {
  require(!specs.empty(), "out_of_fold_predictions: no models");
  require(fold_of.size() == y.size() && static_cast<Eigen::Index>(y.size()) == X.rows(),
          "out_of_fold_predictions: row count mismatch");
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  require(folds >= 2, "out_of_fold_predictions: folds must be >= 2");
  OutOfFold out;
  out.fold_of = std::move(fold_of);
  out.P = Matrix::Zero(X.rows(), static_cast<Eigen::Index>(specs.size()));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (out.fold_of[i] == f ? test : train).push_back(i);
    const Matrix Xtr = stats::take_rows(X, train);
    const Labels ytr = stats::take(y, train);
    const Matrix Xte = stats::take_rows(X, test);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto model = learn::fit(specs[k], Xtr, ytr,
                                    derive_seed(derive_seed(seed, static_cast<std::uint64_t>(f)), learn::to_string(specs[k].kind)));
      const Vector p = model->predict_proba(Xte);
      for (std::size_t r = 0; r < test.size(); ++r)
        out.P(static_cast<Eigen::Index>(test[r]), static_cast<Eigen::Index>(k)) = p(static_cast<Eigen::Index>(r));
    }
  }
  return out;
}

}  // namespace gwe::ensemble
