#include "gwe/outlier.hpp"

#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gwe::outlier {
namespace {

struct Moments {
  std::vector<double> s1, s2;  // prefix sums, size n + 1

  explicit Moments(std::span<const double> z) : s1(z.size() + 1, 0.0), s2(z.size() + 1, 0.0) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      s1[i + 1] = s1[i] + z[i];
      s2[i + 1] = s2[i] + z[i] * z[i];
    }
  }

  double log_likelihood(std::size_t b, std::size_t e, double floor) const {
    const auto n = static_cast<double>(e - b);
    const double mu = (s1[e] - s1[b]) / n;
    const double var = std::max(0.0, (s2[e] - s2[b]) / n - mu * mu);
    const double sigma2 = std::max(var, floor);
    return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * n * var / sigma2;
  }
};

struct BestSplit {
  std::size_t at = 0;
  double gain = -std::numeric_limits<double>::infinity();
};

BestSplit best_split(const Moments& m, Segment s, const ChangepointConfig& cfg, double penalty) {
  BestSplit best;
  if (s.size() < 2 * cfg.min_segment) return best;
  const double whole = m.log_likelihood(s.begin, s.end, cfg.variance_floor);
  for (std::size_t t = s.begin + cfg.min_segment; t + cfg.min_segment <= s.end; ++t) {
    const double g = m.log_likelihood(s.begin, t, cfg.variance_floor) + m.log_likelihood(t, s.end, cfg.variance_floor) -
                     whole - penalty;
    if (g > best.gain) best = {t, g};
  }
  return best;
}

OutlierFlags tagged(std::vector<std::size_t> idx, FlagSource src) {
  OutlierFlags f;
  f.indices = std::move(idx);
  f.source.assign(f.indices.size(), src);
  return f;
}

}  // namespace

double segment_log_likelihood(std::span<const double> segment, double variance_floor) {
  require(!segment.empty(), "segment_log_likelihood: empty segment");
  Moments m(segment);
  return m.log_likelihood(0, segment.size(), variance_floor);
}

SegmentSet detect_changepoints(std::span<const double> series, const ChangepointConfig& config) {
  const std::size_t n = series.size();
  require(n >= 4, "detect_changepoints: series needs at least 4 values");
  require(config.min_segment >= 1, "detect_changepoints: min_segment must be positive");
  for (double v : series) require(std::isfinite(v), "detect_changepoints: non-finite value");

  SegmentSet out;
  out.log_likelihoods.assign(n, std::numeric_limits<double>::quiet_NaN());

  // Gains are invariant to affine rescaling; standardising keeps the
  // variance floor and the prefix sums well conditioned.
  const double mu = stats::mean(series);
  const double sd = stats::stddev(series);
  if (sd == 0.0) {
    out.segments.push_back({0, n});
    return out;
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (series[i] - mu) / sd;
  const Moments m(z);

  for (std::size_t t = config.min_segment; t + config.min_segment <= n; ++t)
    out.log_likelihoods[t] = m.log_likelihood(0, t, config.variance_floor) + m.log_likelihood(t, n, config.variance_floor);

  const double penalty =
      std::isnan(config.prior_penalty) ? 0.5 * std::log(static_cast<double>(n)) : config.prior_penalty;

  std::vector<Segment> segments{{0, n}};
  std::vector<BestSplit> best{best_split(m, segments[0], config, penalty)};
  while (static_cast<int>(out.change_points.size()) < config.max_points) {
    std::size_t pick = 0;
    for (std::size_t s = 1; s < segments.size(); ++s)
      if (best[s].gain > best[pick].gain) pick = s;
    if (!(best[pick].gain > 0.0)) break;
    const auto at = best[pick].at;
    const Segment left{segments[pick].begin, at}, right{at, segments[pick].end};
    segments[pick] = left;
    best[pick] = best_split(m, left, config, penalty);
    segments.insert(segments.begin() + static_cast<std::ptrdiff_t>(pick) + 1, right);
    best.insert(best.begin() + static_cast<std::ptrdiff_t>(pick) + 1, best_split(m, right, config, penalty));
    out.change_points.push_back(at);
  }
  std::sort(out.change_points.begin(), out.change_points.end());
  out.segments = std::move(segments);
  return out;
}

SegmentSet detect_changepoints(std::span<const double> series, int max_points, double prior_penalty) {
  ChangepointConfig cfg;
  cfg.max_points = max_points;
  cfg.prior_penalty = prior_penalty;
  return detect_changepoints(series, cfg);
}

bool OutlierFlags::contains(std::size_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }

OutlierFlags iqr_flags(std::span<const double> segment, double k) {
  require(segment.size() >= 4, "iqr_flags: segment needs at least 4 values");
  std::vector<double> sorted(segment.begin(), segment.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = stats::quantile_sorted(sorted, 0.25);
  const double q3 = stats::quantile_sorted(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - k * iqr, hi = q3 + k * iqr;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < segment.size(); ++i)
    if (segment[i] < lo || segment[i] > hi) idx.push_back(i);
  return tagged(std::move(idx), FlagSource::iqr);
}

OutlierFlags hampel_flags(std::span<const double> segment, double k) {
  require(segment.size() >= 3, "hampel_flags: segment needs at least 3 values");
  const double med = stats::median(segment);
  std::vector<double> dev(segment.size());
  for (std::size_t i = 0; i < segment.size(); ++i) dev[i] = std::abs(segment[i] - med);
  const double mad = stats::median(dev);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const bool out = mad == 0.0 ? segment[i] != med : dev[i] > k * mad;
    if (out) idx.push_back(i);
  }
  return tagged(std::move(idx), FlagSource::hampel);
}

OutlierFlags combine(const OutlierFlags& iqr, const OutlierFlags& hampel, FlagPolicy policy) {
  OutlierFlags out;
  std::size_t a = 0, b = 0;
  while (a < iqr.indices.size() || b < hampel.indices.size()) {
    const bool take_a = b >= hampel.indices.size() || (a < iqr.indices.size() && iqr.indices[a] < hampel.indices[b]);
    const bool take_b = a >= iqr.indices.size() || (b < hampel.indices.size() && hampel.indices[b] < iqr.indices[a]);
    if (take_a) {
      if (policy == FlagPolicy::union_of) {
        out.indices.push_back(iqr.indices[a]);
        out.source.push_back(FlagSource::iqr);
      }
      ++a;
    } else if (take_b) {
      if (policy == FlagPolicy::union_of) {
        out.indices.push_back(hampel.indices[b]);
        out.source.push_back(FlagSource::hampel);
      }
      ++b;
    } else {
      out.indices.push_back(iqr.indices[a]);
      out.source.push_back(FlagSource::both);
      ++a;
      ++b;
    }
  }
  return out;
}

std::vector<double> median_correct(std::span<const double> series, const OutlierFlags& flags, std::size_t window) {
  require(window >= 3 && window % 2 == 1, "median_correct: window must be odd and >= 3");
  std::vector<double> out(series.begin(), series.end());
  const std::size_t half = window / 2;
  std::vector<double> buf;
  for (auto i : flags.indices) {
    require(i < series.size(), "median_correct: flag index out of range");
    const std::size_t b = i >= half ? i - half : 0;
    const std::size_t e = std::min(series.size(), i + half + 1);
    buf.assign(series.begin() + static_cast<std::ptrdiff_t>(b), series.begin() + static_cast<std::ptrdiff_t>(e));
    out[i] = stats::lower_median(buf);
  }
  return out;
}

Matrix PcaModel::project(const Matrix& X) const {
  require(X.cols() == mean.size(), "pca project: dimension mismatch");
  Matrix Z = (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  return Z * components;
}

Matrix PcaModel::reconstruct(const Matrix& Y) const {
  require(Y.cols() == components.cols(), "pca reconstruct: dimension mismatch");
  Matrix Z = Y * components.transpose();
  return (Z.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

PcaModel pca_fit(const Matrix& X, double variance_target, bool standardize) {
  require(X.rows() >= 2, "pca_fit: need at least 2 rows");
  require(variance_target > 0.0 && variance_target <= 1.0, "pca_fit: variance_target must be in (0,1]");
  PcaModel model;
  model.mean = X.colwise().mean();
  Matrix Z = X.rowwise() - model.mean.transpose();
  model.scale = Vector::Ones(X.cols());
  if (standardize) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double sd = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(X.rows() - 1));
      if (sd > 0.0) model.scale(j) = sd;
    }
    Z = Z.array().rowwise() / model.scale.transpose().array();
  }
  const Matrix cov = (Z.transpose() * Z) / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const double total = values.sum();
  if (!(total > 0.0)) {
    warn("pca_fit: data has zero variance, no components retained");
    model.components = Matrix(X.cols(), 0);
    model.explained_variance_ratio = Vector(0);
    return model;
  }
  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < values.size()) {
    cumulative += values(k) / total;
    ++k;
    if (cumulative >= variance_target - 1e-12) break;
  }
  model.components = vectors.leftCols(k);
  model.explained_variance_ratio = values.head(k) / total;
  return model;
}

BcpHiResult run_bcp_hi(std::span<const double> column, const BcpHiConfig& config) {
  BcpHiResult out;
  if (column.size() < 4) {
    out.corrected.assign(column.begin(), column.end());
    out.segments.segments.push_back({0, column.size()});
    return out;
  }
  out.segments = detect_changepoints(column, config.changepoints);
  for (const auto& seg : out.segments.segments) {
    const auto part = column.subspan(seg.begin, seg.size());
    OutlierFlags local;
    if (part.size() >= 4) {
      local = combine(iqr_flags(part, config.iqr_k), hampel_flags(part, config.hampel_k), config.policy);
    } else if (part.size() >= 3 && config.policy == FlagPolicy::union_of) {
      local = hampel_flags(part, config.hampel_k);
    }
    for (std::size_t i = 0; i < local.indices.size(); ++i) {
      out.flags.indices.push_back(local.indices[i] + seg.begin);
      out.flags.source.push_back(local.source[i]);
    }
  }
  out.corrected = median_correct(column, out.flags, config.window);
  return out;
}

ColumnBounds ColumnBounds::fit(std::span<const double> column, const BcpHiConfig& config) {
  require(column.size() >= 4, "ColumnBounds::fit: need at least 4 values");
  ColumnBounds b;
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = stats::quantile_sorted(sorted, 0.25);
  const double q3 = stats::quantile_sorted(sorted, 0.75);
  b.iqr_low = q1 - config.iqr_k * (q3 - q1);
  b.iqr_high = q3 + config.iqr_k * (q3 - q1);
  b.median = stats::quantile_sorted(sorted, 0.5);
  std::vector<double> dev(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) dev[i] = std::abs(column[i] - b.median);
  b.mad = stats::median(dev);
  b.hampel_k = config.hampel_k;
  b.policy = config.policy;
  return b;
}

OutlierFlags ColumnBounds::flag(std::span<const double> column) const {
  OutlierFlags iqr, hampel;
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double v = column[i];
    if (v < iqr_low || v > iqr_high) iqr.indices.push_back(i);
    const bool h = mad == 0.0 ? v != median : std::abs(v - median) > hampel_k * mad;
    if (h) hampel.indices.push_back(i);
  }
  iqr.source.assign(iqr.indices.size(), FlagSource::iqr);
  hampel.source.assign(hampel.indices.size(), FlagSource::hampel);
  return combine(iqr, hampel, policy);
}

}  // namespace gwe::outlier
