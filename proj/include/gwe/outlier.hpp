#pragma once

#include "gwe/common.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace gwe::outlier {

struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
};

struct SegmentSet {
  std::vector<std::size_t> change_points;  // strictly increasing, each a segment start
  std::vector<Segment> segments;           // tile [0, N)
  // Two-segment Gaussian log-likelihood of every candidate split of the full
  // series (index t = split before element t). NaN where a side would be
  // shorter than the minimum segment length.
  std::vector<double> log_likelihoods;
};

struct ChangepointConfig {
  int max_points = 10;
  // Penalty subtracted from each split's likelihood gain. NaN selects the
  // default 0.5 * ln(N).
  double prior_penalty = std::numeric_limits<double>::quiet_NaN();
  std::size_t min_segment = 8;
  double variance_floor = 1e-12;
};

// Gaussian log-likelihood of a segment under its own MLE mean and variance
// (variance floored).
double segment_log_likelihood(std::span<const double> segment, double variance_floor = 1e-12);

// Recursive binary segmentation: repeatedly split the segment whose best
// split gives the largest penalised likelihood gain, until no gain is
// positive or max_points change points exist.
SegmentSet detect_changepoints(std::span<const double> series, const ChangepointConfig& config = {});
SegmentSet detect_changepoints(std::span<const double> series, int max_points, double prior_penalty);

enum class FlagSource { iqr, hampel, both };

struct OutlierFlags {
  std::vector<std::size_t> indices;  // sorted, unique
  std::vector<FlagSource> source;    // parallel to indices

  bool contains(std::size_t i) const;
  std::size_t size() const { return indices.size(); }
};

enum class FlagPolicy { union_of, intersection };

OutlierFlags iqr_flags(std::span<const double> segment, double k = 3.0);
// Raw median absolute deviation, no consistency constant. When MAD is 0
// every value different from the median is flagged.
OutlierFlags hampel_flags(std::span<const double> segment, double k = 3.0);
OutlierFlags combine(const OutlierFlags& iqr, const OutlierFlags& hampel, FlagPolicy policy);

// Each flagged index is replaced by the median of the window of `window`
// original values centred on it, truncated at the series ends; even-sized
// truncated windows use the lower median.
std::vector<double> median_correct(std::span<const double> series, const OutlierFlags& flags, std::size_t window);

struct PcaModel {
  Vector mean;
  Vector scale;  // per-column divisor applied after centring (1 when not standardising)
  Matrix components;  // D x k, orthonormal columns
  Vector explained_variance_ratio;  // k entries, nonincreasing

  Eigen::Index k() const { return components.cols(); }
  Matrix project(const Matrix& X) const;
  Matrix reconstruct(const Matrix& Y) const;
};

PcaModel pca_fit(const Matrix& X, double variance_target = 0.95, bool standardize = true);

struct BcpHiConfig {
  ChangepointConfig changepoints;
  double iqr_k = 3.0;
  double hampel_k = 3.0;
  std::size_t window = 5;
  FlagPolicy policy = FlagPolicy::union_of;
};

struct BcpHiResult {
  std::vector<double> corrected;
  OutlierFlags flags;
  SegmentSet segments;
};

BcpHiResult run_bcp_hi(std::span<const double> column, const BcpHiConfig& config = {});

// Whole-column fences learned on training data, used to flag rows of data
// that was not seen during fitting.
struct ColumnBounds {
  double iqr_low = -std::numeric_limits<double>::infinity();
  double iqr_high = std::numeric_limits<double>::infinity();
  double median = 0.0;
  double mad = 0.0;
  double hampel_k = 3.0;
  FlagPolicy policy = FlagPolicy::union_of;

  static ColumnBounds fit(std::span<const double> column, const BcpHiConfig& config);
  OutlierFlags flag(std::span<const double> column) const;
};

}  // namespace gwe::outlier
