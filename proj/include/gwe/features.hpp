#pragma once

#include "gwe/common.hpp"
#include "gwe/learners.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gwe::features {

enum class ImportanceMethod { gain, split_avg, impurity };

struct ImportanceVector {
  std::vector<double> scores;
  ImportanceMethod method = ImportanceMethod::gain;
};

// Sum of per-split gains per feature over all trees, divided by the total.
ImportanceVector importance_gain(const learn::GradientBoosting& model);
// Mean split gain over the splits that use each feature; unused features 0.
ImportanceVector importance_split_avg(const learn::GradientBoosting& model);
// Sum over split nodes of (node sample fraction * Gini decrease), averaged
// over trees. Not normalised.
ImportanceVector importance_impurity(const learn::ExtraTrees& model);
// gain for gb, impurity for ert.
ImportanceVector importance(const learn::Classifier& model);

struct SelectionResult {
  std::vector<std::string> selected;  // in original column order
  std::vector<std::size_t> selected_indices;
  // Every feature, first eliminated first; the survivors follow in
  // increasing order of their final importance.
  std::vector<std::string> elimination_order;
  std::map<int, double> cv_scores;
};

// Refit, drop the least important feature (ties: the lexicographically last
// name), repeat until k_target remain.
SelectionResult rfe(const Matrix& X, std::span<const int> y, const std::vector<std::string>& names,
                    const learn::ClassifierSpec& estimator, int k_target, std::uint64_t seed);

// Mean stratified-CV accuracy per feature count. Each fold runs its own RFE
// on its training part, so held-out rows never influence the selection.
std::map<int, double> cv_score_vs_k(const Matrix& X, std::span<const int> y, const learn::ClassifierSpec& estimator,
                                    const std::vector<int>& k_range, int folds, std::uint64_t seed);

// Constant columns correlate 0 with everything else (warning); the
// diagonal is always 1.
Matrix pearson_matrix(const Matrix& X);

// Combines rankings (most important first) by summing positions; ties
// broken by name. Names missing from a ranking take its length as position.
std::vector<std::string> rank_sum(const std::vector<std::vector<std::string>>& rankings);

}  // namespace gwe::features
