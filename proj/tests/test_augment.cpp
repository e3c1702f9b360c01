#include "gwe/augment.hpp"
#include "gwe/stats.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace gwe;
using namespace gwe::augment;
using Catch::Approx;

namespace {

double bisect_inverse_normal(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Labels imbalanced(std::size_t zeros, std::size_t ones) {
  Labels y(zeros, 0);
  y.insert(y.end(), ones, 1);
  return y;
}

}  // namespace

TEST_CASE("inverse normal matches a bisection oracle") {
  for (double p : {1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-9})
    CHECK(inverse_normal_cdf(p) == Approx(bisect_inverse_normal(p)).margin(1e-10));
  CHECK(inverse_normal_cdf(0.5) == 0.0);
}

TEST_CASE("quantile transform of a three-row column") {
  Matrix X(3, 1);
  X << 10, 20, 30;
  const auto [qt, Z] = quantile_fit_transform(X);
  CHECK(Z(0, 0) == Approx(bisect_inverse_normal(0.25)).margin(1e-10));
  CHECK(std::abs(Z(1, 0)) < 1e-9);
  CHECK(Z(2, 0) == Approx(bisect_inverse_normal(0.75)).margin(1e-10));
  CHECK(Z(2, 0) == Approx(0.6745).margin(1e-4));
}

TEST_CASE("quantile transform preserves ranks and respects the mask") {
  const auto b = testing::make_blobs(301, 3, 1.0, 9);
  Matrix X = b.X;
  X.col(2) = X.col(2).array().exp();
  const auto [qt, Z] = quantile_fit_transform(X, {true, true, false});
  for (int j = 0; j < 2; ++j) {
    std::vector<std::size_t> a(301), c(301);
    std::iota(a.begin(), a.end(), 0);
    std::iota(c.begin(), c.end(), 0);
    std::sort(a.begin(), a.end(), [&](auto l, auto r) { return X(l, j) < X(r, j); });
    std::sort(c.begin(), c.end(), [&](auto l, auto r) { return Z(l, j) < Z(r, j); });
    CHECK(a == c);
    std::vector<double> col = stats::column(Z, j);
    std::sort(col.begin(), col.end());
    CHECK(std::abs(col[150]) < 1e-9);
  }
  CHECK(Z.col(2) == X.col(2));

  Matrix unseen(3, 3);
  unseen << -100, 0, 1, 100, 0, 1, X(5, 0), X(5, 1), 1;
  const Matrix U = qt.transform(unseen);
  CHECK(U(0, 0) == Z.col(0).minCoeff());
  CHECK(U(1, 0) == Z.col(0).maxCoeff());
  CHECK(U(2, 0) == Z(5, 0));

  std::stringstream s;
  qt.save(s);
  CHECK(QuantileTransform::load(s).transform(unseen) == U);
}

TEST_CASE("constant column maps to zeros") {
  testing::QuietWarnings quiet;
  const Matrix X = Matrix::Constant(9, 1, 4.0);
  const auto [qt, Z] = quantile_fit_transform(X);
  CHECK(Z.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(!quiet.messages.empty());
}

TEST_CASE("undersampling keeps floor(ratio * m) majority rows") {
  const auto y = imbalanced(1000, 100);
  const Matrix X = Matrix::Random(1100, 2);
  const auto r = undersample_majority(X, y, 1.5, 7);
  CHECK(stats::count_label(r.y, 1) == 100);
  CHECK(stats::count_label(r.y, 0) == 150);
  CHECK(std::is_sorted(r.rows.begin(), r.rows.end()));
  CHECK(undersample_majority(X, y, 1.5, 7).rows == r.rows);
  CHECK(undersample_majority(X, y, 1.5, 8).rows != r.rows);

  const auto at_ratio = imbalanced(150, 100);
  CHECK(stats::count_label(undersample_majority(Matrix::Zero(250, 1), at_ratio, 1.5, 1).y, 0) == 150);

  testing::QuietWarnings quiet;
  const auto short_majority = imbalanced(120, 100);
  CHECK(stats::count_label(undersample_majority(Matrix::Zero(220, 1), short_majority, 1.5, 1).y, 0) == 120);
  CHECK(!quiet.messages.empty());
}

TEST_CASE("gaussian augmentation") {
  const auto b = testing::make_blobs(200, 3, 0.0, 4);
  CHECK(gaussian_augment(b.X, 0, 0.05, 1).X.rows() == 0);
  const auto copies = gaussian_augment(b.X, 50, 0.0, 1);
  for (Eigen::Index i = 0; i < 50; ++i) CHECK(copies.X.row(i) == b.X.row(static_cast<Eigen::Index>(copies.sources[static_cast<std::size_t>(i)])));

  const auto s = gaussian_augment(b.X, 10000, 0.05, 2);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> noise(10000);
    for (std::size_t i = 0; i < noise.size(); ++i)
      noise[i] = s.X(static_cast<Eigen::Index>(i), j) - b.X(static_cast<Eigen::Index>(s.sources[i]), j);
    const double expected = 0.05 * stats::stddev(stats::column(b.X, j));
    CHECK(stats::stddev(noise) == Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("plan arithmetic") {
  const auto p = AugmentationPlan::make(66312, 329718, 1.5, 0.05, 0);
  CHECK(p.majority_target == 99468);
  CHECK(p.synthetic_count == 33156);
  CHECK(p.minority_count + p.synthetic_count == p.majority_target);

  const auto even = AugmentationPlan::make(imbalanced(50, 50), 1.0);
  CHECK(even.synthetic_count == 0);
}

TEST_CASE("balance equalises classes on random fixtures") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t minority = 20 + rng() % 200;
    const std::size_t majority = minority * 2 + rng() % 800;
    auto y = imbalanced(majority, minority);
    if (trial % 2) std::transform(y.begin(), y.end(), y.begin(), [](int v) { return 1 - v; });
    const Matrix X = Matrix::Random(static_cast<Eigen::Index>(y.size()), 3);
    const auto plan = AugmentationPlan::make(y, 1.5, 0.05, static_cast<std::uint64_t>(trial));
    const auto out = balance(X, y, plan);
    const auto c0 = stats::count_label(out.y, 0);
    const auto c1 = stats::count_label(out.y, 1);
    CHECK((c0 > c1 ? c0 - c1 : c1 - c0) <= 1);
    for (std::size_t i = 0; i < out.y.size(); ++i) CHECK(out.y[i] == y[out.sources[i]]);
  }
}
