#include "gwe/features.hpp"

#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gwe::features {

namespace {

std::size_t feature_count(const learn::Classifier& model) { return model.meta().features; }

}  // namespace

ImportanceVector importance_gain(const learn::GradientBoosting& model) {
  ImportanceVector out{std::vector<double>(feature_count(model), 0.0), ImportanceMethod::gain};
  for (const auto& tree : model.trees())
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) out.scores[static_cast<std::size_t>(node.feature)] += node.gain;
  const double total = std::accumulate(out.scores.begin(), out.scores.end(), 0.0);
  if (total > 0) {
    for (auto& s : out.scores) s /= total;
  } else {
    warn("importance_gain: model has no splits, importance is all zero");
  }
  return out;
}

ImportanceVector importance_split_avg(const learn::GradientBoosting& model) {
  ImportanceVector out{std::vector<double>(feature_count(model), 0.0), ImportanceMethod::split_avg};
  std::vector<std::size_t> uses(out.scores.size(), 0);
  for (const auto& tree : model.trees())
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) {
        out.scores[static_cast<std::size_t>(node.feature)] += node.gain;
        ++uses[static_cast<std::size_t>(node.feature)];
      }
  for (std::size_t j = 0; j < uses.size(); ++j)
    if (uses[j] > 0) out.scores[j] /= static_cast<double>(uses[j]);
  return out;
}

ImportanceVector importance_impurity(const learn::ExtraTrees& model) {
  ImportanceVector out{std::vector<double>(feature_count(model), 0.0), ImportanceMethod::impurity};
  for (const auto& tree : model.trees())
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) out.scores[static_cast<std::size_t>(node.feature)] += node.fraction * node.gain;
  if (!model.trees().empty())
    for (auto& s : out.scores) s /= static_cast<double>(model.trees().size());
  return out;
}

ImportanceVector importance(const learn::Classifier& model) {
  if (const auto* gb = dynamic_cast<const learn::GradientBoosting*>(&model)) return importance_gain(*gb);
  if (const auto* ert = dynamic_cast<const learn::ExtraTrees*>(&model)) return importance_impurity(*ert);
  throw Error("importance: estimator kind '" + learn::to_string(model.kind()) + "' has no importance (use gb or ert)");
}

namespace {

// Runs elimination down to k_target and returns the elimination order
// (with survivors appended by increasing final importance).
std::vector<std::size_t> eliminate(const Matrix& X, std::span<const int> y, const std::vector<std::string>& names,
                                   const learn::ClassifierSpec& estimator, int k_target, std::uint64_t seed) {
  std::vector<std::size_t> remaining(static_cast<std::size_t>(X.cols()));
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> order;
  const auto target = static_cast<std::size_t>(k_target);
  for (std::uint64_t step = 0;; ++step) {
    const Matrix Xs = stats::take_cols(X, remaining);
    const auto model = learn::fit(estimator, Xs, y, derive_seed(seed, step));
    const auto imp = importance(*model).scores;
    std::vector<std::size_t> rank(remaining.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    // Least important first; equal scores put the lexicographically last name first.
    std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      if (imp[a] != imp[b]) return imp[a] < imp[b];
      return names[remaining[a]] > names[remaining[b]];
    });
    if (remaining.size() <= target) {
      for (auto r : rank) order.push_back(remaining[r]);
      return order;
    }
    order.push_back(remaining[rank.front()]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(rank.front()));
  }
}

}  // namespace

SelectionResult rfe(const Matrix& X, std::span<const int> y, const std::vector<std::string>& names,
                    const learn::ClassifierSpec& estimator, int k_target, std::uint64_t seed) {
  require(names.size() == static_cast<std::size_t>(X.cols()), "rfe: feature name count mismatch");
  require(k_target >= 1, "rfe: k_target must be >= 1");
  require(static_cast<Eigen::Index>(k_target) <= X.cols(), "rfe: k_target exceeds the feature count");
  require(estimator.kind == learn::Kind::gb || estimator.kind == learn::Kind::ert,
          "rfe: estimator must be gb or ert");
  const auto order = eliminate(X, y, names, estimator, k_target, derive_seed(seed, "rfe"));
  SelectionResult out;
  for (auto j : order) out.elimination_order.push_back(names[j]);
  out.selected_indices.assign(order.end() - k_target, order.end());
  std::sort(out.selected_indices.begin(), out.selected_indices.end());
  for (auto j : out.selected_indices) out.selected.push_back(names[j]);
  return out;
}

std::map<int, double> cv_score_vs_k(const Matrix& X, std::span<const int> y, const learn::ClassifierSpec& estimator,
                                    const std::vector<int>& k_range, int folds, std::uint64_t seed) {
  require(folds >= 2, "cv_score_vs_k: folds must be >= 2");
  require(!k_range.empty(), "cv_score_vs_k: empty k range");
  const int k_min = *std::min_element(k_range.begin(), k_range.end());
  require(k_min >= 1 && *std::max_element(k_range.begin(), k_range.end()) <= X.cols(),
          "cv_score_vs_k: k outside [1, D]");
  std::vector<std::string> names(static_cast<std::size_t>(X.cols()));
  for (std::size_t j = 0; j < names.size(); ++j) names[j] = std::to_string(j);

  const auto fold_of = stats::stratified_folds(y, folds, derive_seed(seed, "cv_folds"));
  std::map<int, double> scores;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    const Matrix Xtr = stats::take_rows(X, train);
    const Labels ytr = stats::take(y, train);
    const Matrix Xte = stats::take_rows(X, test);
    const Labels yte = stats::take(y, test);
    const auto fold_seed = derive_seed(seed, static_cast<std::uint64_t>(f));
    const auto order = eliminate(Xtr, ytr, names, estimator, k_min, fold_seed);
    for (int k : k_range) {
      std::vector<std::size_t> cols(order.end() - k, order.end());
      std::sort(cols.begin(), cols.end());
      const auto model = learn::fit(estimator, stats::take_cols(Xtr, cols), ytr, derive_seed(fold_seed, "score"));
      const auto pred = model->predict(stats::take_cols(Xte, cols));
      std::size_t hit = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == yte[i] ? 1 : 0;
      scores[k] += static_cast<double>(hit) / static_cast<double>(pred.size()) / folds;
    }
  }
  return scores;
}

Matrix pearson_matrix(const Matrix& X) {
  const auto d = X.cols();
  Matrix C = Matrix::Identity(d, d);
  const Matrix centred = X.rowwise() - X.colwise().mean();
  Vector norm(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    norm(j) = centred.col(j).norm();
    if (!(norm(j) > 0)) warn("pearson_matrix: column " + std::to_string(j) + " is constant, correlations set to 0");
  }
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) {
      double r = 0.0;
      if (norm(a) > 0 && norm(b) > 0)
        r = std::clamp(centred.col(a).dot(centred.col(b)) / (norm(a) * norm(b)), -1.0, 1.0);
      C(a, b) = C(b, a) = r;
    }
  return C;
}

std::vector<std::string> rank_sum(const std::vector<std::vector<std::string>>& rankings) {
  std::map<std::string, double> total;
  for (const auto& r : rankings)
    for (const auto& name : r) total.emplace(name, 0.0);
  for (const auto& r : rankings)
    for (auto& [name, sum] : total) {
      const auto it = std::find(r.begin(), r.end(), name);
      sum += static_cast<double>(it - r.begin());
    }
  std::vector<std::string> out;
  for (const auto& [name, sum] : total) out.push_back(name);
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return total[a] < total[b]; });
  return out;
}

}  // namespace gwe::features
