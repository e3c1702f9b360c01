#pragma once

#include "gwe/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace gwe::augment {

double normal_cdf(double x);
// Rational approximation refined by one Halley step against normal_cdf.
double inverse_normal_cdf(double p);

// Per-feature ECDF support. Training values map to Phi^-1(r / (N + 1)) with
// r the average rank, so ties share an output and the extremes stay finite.
// Unseen values interpolate linearly in rank between neighbouring support
// points and clamp outside the observed range.
class QuantileTransform {
 public:
  // mask[j] == false leaves column j untouched (e.g. one-hot indicators).
  static QuantileTransform fit(const Matrix& X, std::vector<bool> mask = {});
  Matrix transform(const Matrix& X) const;

  const std::vector<std::vector<double>>& support() const { return support_; }
  std::size_t reference_rows() const { return n_; }

  void save(std::ostream& out) const;
  static QuantileTransform load(std::istream& in);

 private:
  std::vector<bool> mask_;
  std::vector<std::vector<double>> support_;  // sorted unique values per feature
  std::vector<std::vector<double>> ranks_;    // average rank of each support value
  std::size_t n_ = 0;
};

std::pair<QuantileTransform, Matrix> quantile_fit_transform(const Matrix& X, std::vector<bool> mask = {});

struct Resampled {
  Matrix X;
  Labels y;
  std::vector<std::size_t> rows;  // source row in the input for every output row
};

int minority_label(std::span<const int> y);

// Keeps every minority row and floor(ratio * m) majority rows drawn without
// replacement; output rows stay in input order.
Resampled undersample_majority(const Matrix& X, std::span<const int> y, double ratio, std::uint64_t seed);

struct Synthetic {
  Matrix X;
  std::vector<std::size_t> sources;  // row of X_min each synthetic row was drawn from
};

// Each synthetic row is a uniformly drawn row of X_min plus independent
// N(0, (noise_scale * sd_j)^2) noise per column, sd_j the column's sample
// standard deviation in X_min. Columns with mask[j] == false are copied.
Synthetic gaussian_augment(const Matrix& X_min, std::size_t count, double noise_scale, std::uint64_t seed,
                           std::vector<bool> mask = {});

struct AugmentationPlan {
  int minority = 0;
  std::size_t minority_count = 0;
  std::size_t majority_target = 0;
  std::size_t synthetic_count = 0;
  double ratio = 1.5;
  double noise_scale = 0.05;
  std::uint64_t seed = 0;

  // majority_target = floor(ratio * m), capped at the available majority
  // rows; synthetic_count tops the minority up to majority_target.
  static AugmentationPlan make(std::size_t minority_count, std::size_t majority_count, double ratio = 1.5,
                               double noise_scale = 0.05, std::uint64_t seed = 0);
  static AugmentationPlan make(std::span<const int> y, double ratio = 1.5, double noise_scale = 0.05,
                               std::uint64_t seed = 0);
};

struct Balanced {
  Matrix X;
  Labels y;
  std::vector<std::size_t> sources;  // input row behind every output row
  std::vector<bool> synthetic;
};

Balanced balance(const Matrix& X, std::span<const int> y, const AugmentationPlan& plan, std::vector<bool> mask = {});

}  // namespace gwe::augment
