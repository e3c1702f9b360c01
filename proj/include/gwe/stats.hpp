#pragma once

#include "gwe/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace gwe::stats {

// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted data.
double quantile(std::span<const double> values, double q);
// Same, on data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

// Conventional median: mean of the two middle values for even sizes.
double median(std::span<const double> values);
// Lower median: the smaller middle value for even sizes.
double lower_median(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);

std::vector<double> column(const Matrix& X, Eigen::Index j);
std::vector<double> to_std(const Vector& v);

// Stratified fold ids in [0, folds): each class is shuffled with the seed and
// dealt round-robin, so per-fold class counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

struct IndexPair {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

// Stratified holdout: `fraction` of each class goes to `second`.
IndexPair stratified_holdout(std::span<const int> y, double fraction, std::uint64_t seed);

// Same, dealing whole groups: rows sharing a group id (which must share a
// label) always land on the same side.
std::vector<int> grouped_stratified_folds(std::span<const int> y, std::span<const std::size_t> groups, int folds,
                                          std::uint64_t seed);
IndexPair grouped_stratified_holdout(std::span<const int> y, std::span<const std::size_t> groups, double fraction,
                                     std::uint64_t seed);

Matrix take_rows(const Matrix& X, std::span<const std::size_t> rows);
Labels take(std::span<const int> y, std::span<const std::size_t> rows);
Vector take(const Vector& v, std::span<const std::size_t> rows);
Matrix take_cols(const Matrix& X, std::span<const std::size_t> cols);

std::size_t count_label(std::span<const int> y, int label);

}  // namespace gwe::stats
