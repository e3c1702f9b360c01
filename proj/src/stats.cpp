#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace gwe::stats {

double quantile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), "quantile of empty data");
  require(q >= 0.0 && q <= 1.0, "quantile level outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, q);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double lower_median(std::span<const double> values) {
  require(!values.empty(), "median of empty data");
  std::vector<double> s(values.begin(), values.end());
  const std::size_t mid = (s.size() - 1) / 2;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
  return s[mid];
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<double> column(const Matrix& X, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = X(i, j);
  return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
  require(folds >= 2, "need at least 2 folds");
  std::vector<int> fold(y.size(), 0);
  Rng rng(derive_seed(seed, "stratified_folds"));
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  return fold;
}

IndexPair stratified_holdout(std::span<const int> y, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "holdout fraction must be in (0,1)");
  Rng rng(derive_seed(seed, "stratified_holdout"));
  IndexPair out;
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_second = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_second ? out.second : out.first).push_back(idx[k]);
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

namespace {

struct GroupLabels {
  std::vector<std::size_t> index_of_row;  // position of each row's group
  Labels label;                           // one per group
};

GroupLabels group_labels(std::span<const int> y, std::span<const std::size_t> groups) {
  require(groups.size() == y.size(), "group ids and labels differ in length");
  GroupLabels g;
  std::unordered_map<std::size_t, std::size_t> seen;
  g.index_of_row.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto [it, fresh] = seen.emplace(groups[i], g.label.size());
    if (fresh) g.label.push_back(y[i]);
    require(g.label[it->second] == y[i], "group " + std::to_string(groups[i]) + " mixes labels");
    g.index_of_row[i] = it->second;
  }
  return g;
}

}  // namespace

std::vector<int> grouped_stratified_folds(std::span<const int> y, std::span<const std::size_t> groups, int folds,
                                          std::uint64_t seed) {
  const auto g = group_labels(y, groups);
  const auto group_fold = stratified_folds(g.label, folds, seed);
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = group_fold[g.index_of_row[i]];
  return out;
}

IndexPair grouped_stratified_holdout(std::span<const int> y, std::span<const std::size_t> groups, double fraction,
                                     std::uint64_t seed) {
  const auto g = group_labels(y, groups);
  const auto split = stratified_holdout(g.label, fraction, seed);
  std::vector<bool> second(g.label.size(), false);
  for (auto k : split.second) second[k] = true;
  IndexPair out;
  for (std::size_t i = 0; i < y.size(); ++i) (second[g.index_of_row[i]] ? out.second : out.first).push_back(i);
  return out;
}

Matrix take_rows(const Matrix& X, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

Labels take(std::span<const int> y, std::span<const std::size_t> rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

Vector take(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(static_cast<Eigen::Index>(rows[r]));
  return out;
}

Matrix take_cols(const Matrix& X, std::span<const std::size_t> cols) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = X.col(static_cast<Eigen::Index>(cols[c]));
  return out;
}

std::size_t count_label(std::span<const int> y, int label) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

}  // namespace gwe::stats
