#include "gwe/augment.hpp"

#include "gwe/dataset.hpp"
#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <numbers>
#include <numeric>

namespace gwe::augment {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  require(p > 0.0 && p < 1.0, "inverse_normal_cdf: p must be in (0,1)");
  // Acklam's rational approximation, relative error ~1e-9 before refinement.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step on Phi(x) - p.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

QuantileTransform QuantileTransform::fit(const Matrix& X, std::vector<bool> mask) {
  require(X.rows() >= 1, "QuantileTransform: empty matrix");
  if (mask.empty()) mask.assign(static_cast<std::size_t>(X.cols()), true);
  require(mask.size() == static_cast<std::size_t>(X.cols()), "QuantileTransform: mask width mismatch");
  QuantileTransform t;
  t.mask_ = std::move(mask);
  t.n_ = static_cast<std::size_t>(X.rows());
  t.support_.resize(t.mask_.size());
  t.ranks_.resize(t.mask_.size());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (!t.mask_[ju]) continue;
    auto col = stats::column(X, j);
    std::sort(col.begin(), col.end());
    auto& sup = t.support_[ju];
    auto& rk = t.ranks_[ju];
    std::size_t i = 0;
    while (i < col.size()) {
      std::size_t k = i;
      while (k + 1 < col.size() && col[k + 1] == col[i]) ++k;
      sup.push_back(col[i]);
      rk.push_back(0.5 * static_cast<double>(i + 1 + k + 1));  // average of 1-based ranks i+1..k+1
      i = k + 1;
    }
    if (sup.size() == 1) warn("quantile transform: constant column " + std::to_string(j) + " maps to zeros");
  }
  return t;
}

Matrix QuantileTransform::transform(const Matrix& X) const {
  require(static_cast<std::size_t>(X.cols()) == mask_.size(), "QuantileTransform: column count mismatch");
  Matrix out = X;
  const double denom = static_cast<double>(n_) + 1.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (!mask_[ju]) continue;
    const auto& sup = support_[ju];
    const auto& rk = ranks_[ju];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      double r = 0.0;
      if (v <= sup.front()) {
        r = rk.front();
      } else if (v >= sup.back()) {
        r = rk.back();
      } else {
        const auto hi = static_cast<std::size_t>(std::upper_bound(sup.begin(), sup.end(), v) - sup.begin());
        const auto lo = hi - 1;
        if (sup[lo] == v) {
          r = rk[lo];
        } else {
          const double w = (v - sup[lo]) / (sup[hi] - sup[lo]);
          r = rk[lo] + w * (rk[hi] - rk[lo]);
        }
      }
      out(i, j) = sup.size() == 1 ? 0.0 : inverse_normal_cdf(r / denom);
    }
  }
  return out;
}

void QuantileTransform::save(std::ostream& out) const {
  out << "gwe-quantile 1\n" << n_ << ' ' << mask_.size() << '\n';
  for (std::size_t j = 0; j < mask_.size(); ++j) {
    out << (mask_[j] ? 1 : 0) << ' ' << support_[j].size();
    for (std::size_t k = 0; k < support_[j].size(); ++k)
      out << ' ' << data::format_double(support_[j][k]) << ' ' << data::format_double(ranks_[j][k]);
    out << '\n';
  }
}

QuantileTransform QuantileTransform::load(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  require(in && tag == "gwe-quantile" && version == 1, "quantile transform artifact: bad header");
  QuantileTransform t;
  std::size_t cols = 0;
  in >> t.n_ >> cols;
  require(static_cast<bool>(in), "quantile transform artifact: truncated");
  t.mask_.resize(cols);
  t.support_.resize(cols);
  t.ranks_.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    int m = 0;
    std::size_t k = 0;
    in >> m >> k;
    t.mask_[j] = m != 0;
    t.support_[j].resize(k);
    t.ranks_[j].resize(k);
    for (std::size_t i = 0; i < k; ++i) in >> t.support_[j][i] >> t.ranks_[j][i];
    require(static_cast<bool>(in), "quantile transform artifact: truncated");
    require(!t.mask_[j] || k > 0, "quantile transform artifact: empty support");
  }
  return t;
}

std::pair<QuantileTransform, Matrix> quantile_fit_transform(const Matrix& X, std::vector<bool> mask) {
  auto t = QuantileTransform::fit(X, std::move(mask));
  Matrix Z = t.transform(X);
  return {std::move(t), std::move(Z)};
}

int minority_label(std::span<const int> y) {
  const auto ones = stats::count_label(y, 1);
  const auto zeros = stats::count_label(y, 0);
  return ones < zeros ? 1 : 0;
}

Resampled undersample_majority(const Matrix& X, std::span<const int> y, double ratio, std::uint64_t seed) {
  require(static_cast<std::size_t>(X.rows()) == y.size(), "undersample_majority: row count mismatch");
  require(ratio > 0.0, "undersample_majority: ratio must be positive");
  const int minority = minority_label(y);
  const std::size_t m = stats::count_label(y, minority);
  require(m > 0 && m < y.size(), "undersample_majority: both classes must be present");
  std::vector<std::size_t> majority;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] != minority) majority.push_back(i);
  auto target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(m)));
  if (target > majority.size()) {
    warn("undersample_majority: ratio * minority exceeds the majority count, keeping all majority rows");
    target = majority.size();
  }
  Rng rng(derive_seed(seed, "undersample"));
  std::shuffle(majority.begin(), majority.end(), rng);
  std::vector<bool> keep(y.size(), false);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == minority) keep[i] = true;
  for (std::size_t k = 0; k < target; ++k) keep[majority[k]] = true;

  Resampled out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (keep[i]) out.rows.push_back(i);
  out.X = stats::take_rows(X, out.rows);
  out.y = stats::take(y, out.rows);
  return out;
}

Synthetic gaussian_augment(const Matrix& X_min, std::size_t count, double noise_scale, std::uint64_t seed,
                           std::vector<bool> mask) {
  require(noise_scale >= 0.0, "gaussian_augment: noise_scale must be nonnegative");
  Synthetic out;
  out.X = Matrix(static_cast<Eigen::Index>(count), X_min.cols());
  if (count == 0) return out;
  require(X_min.rows() >= 1, "gaussian_augment: no source rows");
  if (mask.empty()) mask.assign(static_cast<std::size_t>(X_min.cols()), true);
  require(mask.size() == static_cast<std::size_t>(X_min.cols()), "gaussian_augment: mask width mismatch");

  Vector sigma(X_min.cols());
  for (Eigen::Index j = 0; j < X_min.cols(); ++j)
    sigma(j) = mask[static_cast<std::size_t>(j)] ? noise_scale * stats::stddev(stats::column(X_min, j)) : 0.0;

  Rng rng(derive_seed(seed, "gaussian_augment"));
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(X_min.rows()) - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.sources.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    const auto src = pick(rng);
    out.sources[r] = src;
    for (Eigen::Index j = 0; j < X_min.cols(); ++j) {
      const double eps = gauss(rng);  // drawn for every column so masks do not shift the stream
      out.X(static_cast<Eigen::Index>(r), j) = X_min(static_cast<Eigen::Index>(src), j) + sigma(j) * eps;
    }
  }
  return out;
}

AugmentationPlan AugmentationPlan::make(std::size_t minority_count, std::size_t majority_count, double ratio,
                                        double noise_scale, std::uint64_t seed) {
  require(ratio >= 1.0, "augmentation ratio must be >= 1");
  AugmentationPlan p;
  p.minority_count = minority_count;
  p.ratio = ratio;
  p.noise_scale = noise_scale;
  p.seed = seed;
  p.majority_target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(minority_count)));
  if (p.majority_target > majority_count) p.majority_target = majority_count;
  p.synthetic_count = p.majority_target > minority_count ? p.majority_target - minority_count : 0;
  return p;
}

AugmentationPlan AugmentationPlan::make(std::span<const int> y, double ratio, double noise_scale, std::uint64_t seed) {
  const int minority = minority_label(y);
  auto p = make(stats::count_label(y, minority), stats::count_label(y, 1 - minority), ratio, noise_scale, seed);
  p.minority = minority;
  return p;
}

Balanced balance(const Matrix& X, std::span<const int> y, const AugmentationPlan& plan, std::vector<bool> mask) {
  require(static_cast<std::size_t>(X.rows()) == y.size(), "balance: row count mismatch");
  const int minority = minority_label(y);
  require(minority == plan.minority && stats::count_label(y, minority) == plan.minority_count,
          "balance: plan does not match the data");

  const auto under = undersample_majority(X, y, plan.ratio, plan.seed);
  std::vector<std::size_t> min_rows;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == minority) min_rows.push_back(i);
  const Matrix X_min = stats::take_rows(X, min_rows);
  const auto synth = gaussian_augment(X_min, plan.synthetic_count, plan.noise_scale, plan.seed, std::move(mask));

  Balanced out;
  const auto n_under = under.X.rows();
  out.X = Matrix(n_under + synth.X.rows(), X.cols());
  out.X.topRows(n_under) = under.X;
  out.X.bottomRows(synth.X.rows()) = synth.X;
  out.y = under.y;
  out.y.insert(out.y.end(), synth.sources.size(), minority);
  out.sources = under.rows;
  for (auto s : synth.sources) out.sources.push_back(min_rows[s]);
  out.synthetic.assign(static_cast<std::size_t>(n_under), false);
  out.synthetic.resize(out.sources.size(), true);
  return out;
}

}  // namespace gwe::augment
