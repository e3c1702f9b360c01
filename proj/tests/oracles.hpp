#pragma once

// Brute-force references shared by the unit tests and the acceptance binary.

#include "gwe/common.hpp"
#include "gwe/ensemble.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace gwe::testing {

// Bundle of n models on m rows whose quality varies by model.
inline ensemble::PredictionBundle random_bundle(std::uint64_t seed, int n, int m) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> strength(0.0, 2.5);
  ensemble::PredictionBundle b;
  b.P.resize(m, n);
  b.y.resize(static_cast<std::size_t>(m));
  for (auto& v : b.y) v = coin(rng) ? 1 : 0;
  for (int i = 0; i < n; ++i) {
    b.names.push_back("m" + std::to_string(i));
    const double s = strength(rng);
    const double bias = 0.5 * g(rng);
    for (int r = 0; r < m; ++r) {
      const double z = s * (2.0 * b.y[static_cast<std::size_t>(r)] - 1.0) + bias + g(rng);
      b.P(r, i) = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return b;
}

// Minimum of the regularised loss over the simplex grid with the given step.
// The loss is expanded as a quadratic form, w'(A + lambda I)w - 2 b'w + c,
// so each grid point costs O(n^2).
inline double simplex_grid_minimum(const ensemble::PredictionBundle& bundle, double lambda, double step = 0.01) {
  const auto n = bundle.P.cols();
  const double m = static_cast<double>(bundle.P.rows());
  Vector yv(bundle.P.rows());
  for (Eigen::Index r = 0; r < yv.size(); ++r) yv(r) = bundle.y[static_cast<std::size_t>(r)];
  const Matrix A = bundle.P.transpose() * bundle.P / m + lambda * Matrix::Identity(n, n);
  const Vector b = bundle.P.transpose() * yv / m;
  const double c = yv.squaredNorm() / m;
  const int units = static_cast<int>(std::lround(1.0 / step));
  double best = std::numeric_limits<double>::infinity();
  Vector w(n);
  std::function<void(Eigen::Index, int)> walk = [&](Eigen::Index i, int left) {
    if (i == n - 1) {
      w(i) = left * step;
      best = std::min(best, w.dot(A * w) - 2.0 * b.dot(w) + c);
      return;
    }
    for (int u = 0; u <= left; ++u) {
      w(i) = u * step;
      walk(i + 1, left - u);
    }
  };
  walk(0, units);
  return best;
}

// P(s+ > s-) + 0.5 P(tie) by enumerating every positive/negative pair.
inline double concordance(const Labels& y, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// ||analytic - numeric|| / (||analytic|| + ||numeric||)
inline double relative_error(const Vector& a, const Vector& n) {
  const double denom = a.norm() + n.norm();
  return denom == 0.0 ? 0.0 : (a - n).norm() / denom;
}

template <class F>
Vector central_difference(const Vector& x, F&& f, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

// Income-like linear drift with small jitter. Strongly curved stretches
// (sine crests) are not "clean" for the raw-MAD Hampel rule.
inline std::vector<double> smooth_series(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 5.0);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 50000.0 + 50.0 * static_cast<double>(i) + g(rng);
  return x;
}

}  // namespace gwe::testing
