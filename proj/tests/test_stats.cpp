#include "gwe/stats.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using namespace gwe;
using Catch::Approx;

TEST_CASE("type 7 quantile matches hand values") {
  const std::vector<double> v = {7, 1, 3, 5};
  // sorted 1 3 5 7; h = (n - 1) q
  CHECK(stats::quantile(v, 0.0) == 1.0);
  CHECK(stats::quantile(v, 1.0) == 7.0);
  CHECK(stats::quantile(v, 0.25) == Approx(2.5));
  CHECK(stats::quantile(v, 0.5) == Approx(4.0));
  CHECK(stats::median(v) == Approx(4.0));
  CHECK(stats::lower_median(v) == 3.0);
  CHECK(stats::lower_median(std::vector<double>{9, 2, 4}) == 4.0);
}

TEST_CASE("mean and sample standard deviation") {
  const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(stats::mean(v) == 5.0);
  CHECK(stats::stddev(v) == Approx(std::sqrt(32.0 / 7.0)));
  CHECK(stats::stddev(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("stratified folds balance each class") {
  const auto b = testing::make_blobs(103, 1, 1.0, 5, 0.3);
  const auto folds = stats::stratified_folds(b.y, 5, 11);
  for (int label : {0, 1}) {
    std::vector<int> count(5, 0);
    for (std::size_t i = 0; i < b.y.size(); ++i)
      if (b.y[i] == label) ++count[static_cast<std::size_t>(folds[i])];
    CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  }
  CHECK(folds == stats::stratified_folds(b.y, 5, 11));
  CHECK(folds != stats::stratified_folds(b.y, 5, 12));
}

TEST_CASE("stratified holdout takes the fraction of each class") {
  Labels y(100, 0);
  std::fill(y.begin(), y.begin() + 30, 1);
  const auto p = stats::stratified_holdout(y, 0.2, 3);
  CHECK(p.second.size() == 20);
  CHECK(stats::count_label(stats::take(y, p.second), 1) == 6);
  std::set<std::size_t> all(p.first.begin(), p.first.end());
  all.insert(p.second.begin(), p.second.end());
  CHECK(all.size() == 100);
}

TEST_CASE("grouped folds never split a group") {
  Labels y;
  std::vector<std::size_t> groups;
  for (std::size_t g = 0; g < 40; ++g)
    for (std::size_t r = 0; r <= g % 3; ++r) {
      y.push_back(g % 4 == 0 ? 1 : 0);
      groups.push_back(g);
    }
  const auto folds = stats::grouped_stratified_folds(y, groups, 4, 9);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (groups[i] == groups[j]) REQUIRE(folds[i] == folds[j]);
  const auto h = stats::grouped_stratified_holdout(y, groups, 0.25, 9);
  std::set<std::size_t> held;
  for (auto i : h.second) held.insert(groups[i]);
  for (auto i : h.first) CHECK(held.count(groups[i]) == 0);
  CHECK(h.first.size() + h.second.size() == y.size());

  groups[1] = groups[0];
  y[1] = 1 - y[0];
  CHECK_THROWS_AS(stats::grouped_stratified_folds(y, groups, 4, 9), Error);
}

TEST_CASE("derived seeds are stable and tag-sensitive") {
  CHECK(derive_seed(42, "a") == derive_seed(42, "a"));
  CHECK(derive_seed(42, "a") != derive_seed(42, "b"));
  CHECK(derive_seed(42, "a") != derive_seed(43, "a"));
  CHECK(derive_seed(42, std::uint64_t{0}) != derive_seed(42, std::uint64_t{1}));
}

TEST_CASE("row and column gathers") {
  Matrix X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  const std::vector<std::size_t> rows = {2, 0};
  const Matrix R = stats::take_rows(X, rows);
  CHECK(R(0, 0) == 5);
  CHECK(R(1, 1) == 2);
  const std::vector<std::size_t> cols = {1};
  CHECK(stats::take_cols(X, cols)(2, 0) == 6);
}
