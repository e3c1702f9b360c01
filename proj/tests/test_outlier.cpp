#include "gwe/outlier.hpp"
#include "gwe/stats.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace gwe;
using namespace gwe::outlier;
using Catch::Approx;

namespace {

// Exhaustive two-segment scan with the same Gaussian likelihood.
std::size_t best_single_split(const std::vector<double>& x, std::size_t min_segment) {
  auto ll = [](const std::vector<double>& v, std::size_t b, std::size_t e) {
    const double n = static_cast<double>(e - b);
    double m = 0.0;
    for (std::size_t i = b; i < e; ++i) m += v[i];
    m /= n;
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += (v[i] - m) * (v[i] - m);
    const double var = std::max(s / n, 1e-12);
    return -0.5 * n * (std::log(2.0 * M_PI * var) + 1.0);
  };
  std::size_t best = 0;
  double best_ll = -INFINITY;
  for (std::size_t t = min_segment; t + min_segment <= x.size(); ++t) {
    const double v = ll(x, 0, t) + ll(x, t, x.size());
    if (v > best_ll) {
      best_ll = v;
      best = t;
    }
  }
  return best;
}

std::vector<std::size_t> mad_oracle(const std::vector<double>& x, double k) {
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const double med = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  std::vector<double> d;
  for (double v : x) d.push_back(std::abs(v - med));
  std::sort(d.begin(), d.end());
  const double mad = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (mad == 0.0 ? x[i] != med : std::abs(x[i] - med) > k * mad) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("step series splits at the step") {
  std::vector<double> x(100, 0.0);
  std::fill(x.begin() + 50, x.end(), 10.0);
  const auto s = detect_changepoints(x, 10, std::numeric_limits<double>::quiet_NaN());
  REQUIRE(!s.change_points.empty());
  CHECK(std::any_of(s.change_points.begin(), s.change_points.end(),
                    [](std::size_t c) { return c >= 49 && c <= 51; }));
}

TEST_CASE("single split agrees with exhaustive scan") {
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(120);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g(rng) + (i >= 37 ? 4.0 : 0.0);
  ChangepointConfig c;
  c.max_points = 1;
  c.prior_penalty = 0.0;
  const auto s = detect_changepoints(x, c);
  REQUIRE(s.change_points.size() == 1);
  CHECK(s.change_points[0] == best_single_split(x, c.min_segment));
}

TEST_CASE("segments tile the series") {
  const auto x = testing::smooth_series(400, 1);
  const auto s = detect_changepoints(x, ChangepointConfig{});
  std::size_t at = 0;
  for (const auto& seg : s.segments) {
    CHECK(seg.begin == at);
    at = seg.end;
  }
  CHECK(at == x.size());
  CHECK(std::is_sorted(s.change_points.begin(), s.change_points.end()));
  CHECK(std::adjacent_find(s.change_points.begin(), s.change_points.end()) == s.change_points.end());
}

TEST_CASE("constant series has no change points") {
  const std::vector<double> x(64, 3.0);
  CHECK(detect_changepoints(x, 10, 0.0).change_points.empty());
}

TEST_CASE("white noise with penalty 10 rarely splits") {
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(200);
    for (auto& v : x) v = g(rng);
    if (detect_changepoints(x, 10, 10.0).change_points.empty()) ++clean;
  }
  CHECK(clean >= 95);
}

TEST_CASE("iqr flags the lone extreme") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  x.push_back(1000.0);
  const auto f = iqr_flags(x, 3.0);
  CHECK(f.indices == std::vector<std::size_t>{100});

  std::vector<double> sym = {-1, -0.5, 0, 0.5, 1};
  CHECK(iqr_flags(sym, 3.0).indices.empty());
}

TEST_CASE("smaller iqr multiplier flags a superset") {
  Rng rng(8);
  std::student_t_distribution<double> t(2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(80);
    for (auto& v : x) v = t(rng);
    const auto loose = iqr_flags(x, 1.5);
    for (auto i : iqr_flags(x, 3.0).indices) CHECK(loose.contains(i));
  }
}

TEST_CASE("hampel rules") {
  CHECK(hampel_flags(std::vector<double>{5, 5, 5, 5, 50}, 3.0).indices == std::vector<std::size_t>{4});
  CHECK(hampel_flags(std::vector<double>{2, 2, 2}, 3.0).indices.empty());
  const std::vector<double> x = {0, 0, 0, 1, 0, 0, 0, 10};
  CHECK(hampel_flags(x, 3.0).indices == mad_oracle(x, 3.0));
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> y(31);
    for (auto& v : y) v = g(rng) * (trial % 3 == 0 ? 10.0 : 1.0);
    y[5] = 40.0;
    CHECK(hampel_flags(y, 3.0).indices == mad_oracle(y, 3.0));
  }
}

TEST_CASE("flag membership depends only on values") {
  std::vector<double> x = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 80};
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), Rng(2));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[perm[i]];
  const auto fx = combine(iqr_flags(x, 3.0), hampel_flags(x, 3.0), FlagPolicy::union_of);
  const auto fy = combine(iqr_flags(y, 3.0), hampel_flags(y, 3.0), FlagPolicy::union_of);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(fy.contains(i) == fx.contains(perm[i]));
}

TEST_CASE("median correction") {
  OutlierFlags f;
  f.indices = {1};
  f.source = {FlagSource::both};
  CHECK(median_correct(std::vector<double>{1, 100, 3}, f, 3) == std::vector<double>{1, 3, 3});
  CHECK(median_correct(std::vector<double>{1, 100, 3}, OutlierFlags{}, 3) == std::vector<double>{1, 100, 3});
  OutlierFlags first;
  first.indices = {0};
  first.source = {FlagSource::iqr};
  // window {x0, x1}; lower median of {50, 2} is 2
  CHECK(median_correct(std::vector<double>{50, 2, 7}, first, 3)[0] == 2.0);
}

TEST_CASE("pca on rank-one and isotropic data") {
  Matrix R(20, 3);
  for (int i = 0; i < 20; ++i) R.row(i) = (i - 9.5) * Eigen::RowVector3d(1.0, 2.0, -0.5);
  const auto p = pca_fit(R, 0.95, false);
  REQUIRE(p.k() == 1);
  CHECK(p.explained_variance_ratio(0) == Approx(1.0));
  const Matrix back = p.reconstruct(p.project(R));
  CHECK((back - R).cwiseAbs().maxCoeff() < 1e-8);

  const auto b = testing::make_blobs(2000, 2, 0.0, 5);
  const auto q = pca_fit(b.X, 0.95, false);
  Matrix C = b.X.rowwise() - b.X.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(C.transpose() * C);
  const double top = es.eigenvalues().maxCoeff() / es.eigenvalues().sum();
  CHECK(q.k() == (top >= 0.95 ? 1 : 2));
  CHECK(q.explained_variance_ratio(0) == Approx(top).epsilon(1e-9));
  CHECK((q.components.transpose() * q.components - Matrix::Identity(q.k(), q.k())).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index i = 1; i < q.explained_variance_ratio.size(); ++i)
    CHECK(q.explained_variance_ratio(i) <= q.explained_variance_ratio(i - 1));
}

TEST_CASE("zero-variance pca keeps no components") {
  testing::QuietWarnings quiet;
  const Matrix X = Matrix::Constant(10, 3, 2.0);
  CHECK(pca_fit(X, 0.95, false).k() == 0);
  CHECK(!quiet.messages.empty());
}

TEST_CASE("injected spikes are flagged and corrected") {
  const auto clean = testing::smooth_series(600, 11);
  const double med = stats::median(clean);
  auto x = clean;
  const std::vector<std::size_t> spikes = {40, 170, 305, 420, 555};
  for (auto i : spikes) x[i] = 50.0 * med;
  const auto r = run_bcp_hi(x, BcpHiConfig{});
  for (auto i : spikes) {
    CHECK(r.flags.contains(i));
    CHECK(r.corrected[i] < 5.0 * med);
  }
  CHECK(*std::max_element(r.corrected.begin(), r.corrected.end()) < 5.0 * med);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!r.flags.contains(i)) CHECK(r.corrected[i] == x[i]);

  const auto twice = run_bcp_hi(r.corrected, BcpHiConfig{});
  CHECK(twice.flags.size() == 0);
  CHECK(twice.corrected == r.corrected);
}

TEST_CASE("clean series pass through unchanged") {
  const auto x = testing::smooth_series(600, 12);
  const auto r = run_bcp_hi(x, BcpHiConfig{});
  CHECK(r.flags.size() == 0);
  CHECK(r.corrected == x);
  const std::vector<double> flat(50, 7.0);
  CHECK(run_bcp_hi(flat, BcpHiConfig{}).corrected == flat);
}

TEST_CASE("bcp-hi flags are per-segment iqr union hampel") {
  Rng rng(21);
  std::lognormal_distribution<double> g(10.0, 0.6);
  std::vector<double> x(300);
  for (auto& v : x) v = g(rng);
  const BcpHiConfig cfg;
  const auto r = run_bcp_hi(x, cfg);
  OutlierFlags expect;
  for (const auto& seg : r.segments.segments) {
    std::vector<double> part(x.begin() + static_cast<long>(seg.begin), x.begin() + static_cast<long>(seg.end));
    const auto f = combine(iqr_flags(part, cfg.iqr_k), hampel_flags(part, cfg.hampel_k), cfg.policy);
    for (auto i : f.indices) expect.indices.push_back(i + seg.begin);
  }
  CHECK(r.flags.indices == expect.indices);
}

TEST_CASE("column bounds flag unseen rows with training fences") {
  std::vector<double> train(200);
  std::iota(train.begin(), train.end(), 0.0);
  const auto b = ColumnBounds::fit(train, BcpHiConfig{});
  CHECK(b.median == Approx(99.5));
  const auto f = b.flag(std::vector<double>{50.0, 5000.0, -4000.0});
  CHECK(f.indices == std::vector<std::size_t>{1, 2});
}
