#include "gwe/ensemble.hpp"
#include "gwe/metrics.hpp"
#include "gwe/stats.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace gwe;
using namespace gwe::ensemble;
using Catch::Approx;

namespace {

PredictionBundle bundle_of(Matrix P, Labels y) {
  PredictionBundle b;
  for (Eigen::Index i = 0; i < P.cols(); ++i) b.names.push_back("m" + std::to_string(i));
  b.P = std::move(P);
  b.y = std::move(y);
  return b;
}

void check_convex(const Vector& w) {
  CHECK(w.minCoeff() >= 0.0);
  CHECK(w.sum() == Approx(1.0).epsilon(1e-12));
}

}  // namespace

TEST_CASE("regularised loss identities") {
  Labels y = {1, 0, 1, 0};
  Matrix perfect(4, 1);
  perfect << 1, 0, 1, 0;
  CHECK(regularised_loss(bundle_of(perfect, y), Vector::Ones(1), 0.0) == 0.0);

  CHECK(regularised_loss(bundle_of(Matrix::Constant(4, 2, 0.5), y), Vector::Constant(2, 0.5), 0.0) == 0.25);

  const auto b = testing::random_bundle(3, 1, 50);
  Matrix same(50, 3);
  for (int i = 0; i < 3; ++i) same.col(i) = b.P.col(0);
  const double single = regularised_loss(b, Vector::Ones(1), 0.0);
  CHECK(regularised_loss(bundle_of(same, b.y), Vector::Constant(3, 1.0 / 3.0), 0.2) ==
        Approx(single + 0.2 / 3.0).epsilon(1e-12));
}

TEST_CASE("bundle validation") {
  auto b = testing::random_bundle(1, 2, 10);
  b.P(3, 1) = 1.5;
  CHECK_THROWS_AS(b.validate(), Error);
  auto c = testing::random_bundle(1, 2, 10);
  c.names.pop_back();
  CHECK_THROWS_AS(c.validate(), Error);
  GreedyConfig g;
  g.delta = 0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = {};
  g.min_delta = 0.1;
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("halving the increment never loses to a fixed one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto b = testing::random_bundle(200 + seed, 3, 200);
    GreedyConfig fixed;
    fixed.min_delta = fixed.delta;
    const auto coarse = greedy_weights(b, fixed);
    const auto fine = greedy_weights(b);
    CHECK(regularised_loss(b, fine.w, fixed.lambda) <= regularised_loss(b, coarse.w, fixed.lambda));
  }
}

TEST_CASE("greedy on a single model") {
  const auto w = greedy_weights(testing::random_bundle(2, 1, 40));
  CHECK(w.w.size() == 1);
  CHECK(w.w[0] == 1.0);
  CHECK(w.provenance == Provenance::greedy);
}

TEST_CASE("identical models keep uniform weights") {
  const auto b = testing::random_bundle(5, 1, 60);
  Matrix same(60, 3);
  for (int i = 0; i < 3; ++i) same.col(i) = b.P.col(0);
  const auto w = greedy_weights(bundle_of(same, b.y));
  for (int i = 0; i < 3; ++i) CHECK(w.w[i] == Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("a perfect model dominates a coin") {
  Labels y;
  Matrix P(200, 2);
  for (int r = 0; r < 200; ++r) {
    y.push_back(r % 2);
    P(r, 0) = r % 2;
    P(r, 1) = 0.5;
  }
  const auto b = bundle_of(P, y);
  GreedyConfig c;
  c.lambda = 0.0;
  const auto w = greedy_weights(b, c);
  CHECK(w.w[0] >= 0.95);
  CHECK(regularised_loss(b, w.w, 0.0) <= testing::simplex_grid_minimum(b, 0.0) + 1e-3);
}

TEST_CASE("heavy regularisation pins weights near uniform") {
  const auto b = testing::random_bundle(9, 4, 200);
  GreedyConfig c;
  c.lambda = 1e3;
  const auto w = greedy_weights(b, c);
  CHECK((w.w.array() - 0.25).abs().maxCoeff() < 0.05);
}

TEST_CASE("greedy matches the simplex grid and dominates uniform") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 2 + static_cast<int>(seed % 3);
    const auto b = testing::random_bundle(100 + seed, n, 200);
    GreedyConfig c;
    GreedyTrace trace;
    const auto w = greedy_weights(b, c, &trace);
    check_convex(w.w);
    const double loss = regularised_loss(b, w.w, c.lambda);
    CHECK(loss <= testing::simplex_grid_minimum(b, c.lambda) + 1e-3);
    CHECK(loss <= regularised_loss(b, uniform_weights(static_cast<std::size_t>(n)).w, c.lambda));
    for (std::size_t i = 1; i < trace.accepted_losses.size(); ++i)
      CHECK(trace.accepted_losses[i] < trace.accepted_losses[i - 1]);
    CHECK(trace.accepted_losses.back() == Approx(loss).epsilon(1e-12));
    CHECK(trace.passes <= c.max_passes);
  }
}

TEST_CASE("softmax weights") {
  const auto eq = softmax_weights(std::vector<double>{0.3, 0.3, 0.3});
  for (int i = 0; i < 3; ++i) CHECK(eq.w[i] == Approx(1.0 / 3.0));
  const auto two = softmax_weights(std::vector<double>{std::log(2.0), 0.0});
  CHECK(two.w[0] == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(two.w[1] == Approx(1.0 / 3.0).epsilon(1e-14));
  const std::vector<double> s = {0.81, 0.77, 0.9, 0.6};
  std::vector<double> shifted;
  for (double v : s) shifted.push_back(v + 123.4);
  CHECK((softmax_weights(s).w - softmax_weights(shifted).w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(softmax_weights(s).provenance == Provenance::softmax);
}

TEST_CASE("weighted and plain averages") {
  Matrix P(1, 2);
  P << 0.2, 0.8;
  CHECK(weighted_average(P, Vector{{0.25, 0.75}})[0] == Approx(0.65).epsilon(1e-15));
  CHECK(weighted_average(P, Vector{{0.0, 1.0}})[0] == 0.8);
  Matrix Q(1, 3);
  Q << 0.2, 0.4, 0.9;
  CHECK(plain_average(Q)[0] == Approx(0.5).epsilon(1e-15));

  const auto b = testing::random_bundle(4, 4, 100);
  const Vector wa = weighted_average(b.P, Vector{{0.1, 0.2, 0.3, 0.4}});
  for (Eigen::Index r = 0; r < 100; ++r) {
    CHECK(wa[r] >= b.P.row(r).minCoeff());
    CHECK(wa[r] <= b.P.row(r).maxCoeff());
  }
}

TEST_CASE("majority vote and vote scores") {
  Matrix L(4, 3);
  L << 1, 1, 1,  //
      0, 0, 0,   //
      1, 0, 1,   //
      0, 1, 0;
  CHECK(majority_vote(L) == Labels{1, 0, 1, 0});
  Matrix tie(1, 2);
  tie << 1, 0;
  CHECK(majority_vote(tie) == Labels{1});

  Matrix P(3, 2);
  P << 0.9, 0.6,  //
      0.9, 0.4,   //
      0.55, 0.45;
  const Vector share = vote_share(P);
  CHECK(share == Vector{{1.0, 0.5, 0.5}});
  const Vector score = vote_score(P);
  CHECK(score[0] == Approx((2 + 0.75) / 3));
  CHECK(score[1] == Approx((1 + 0.65) / 3));
  CHECK(score[2] == Approx((1 + 0.5) / 3));
  // vote count orders first, mean probability breaks ties
  CHECK(score[0] > score[1]);
  CHECK(score[1] > score[2]);
  CHECK(threshold_labels(Vector{{0.5, 0.49}}) == Labels{1, 0});
}

TEST_CASE("boosting weight update") {
  const Vector w = Vector::Constant(3, 1.0 / 3.0);
  const std::vector<double> margins = {1.0, -1.0, 1.0};
  CHECK(boosting_weight_update(w, 0.0, margins) == w);
  const Vector u = boosting_weight_update(w, 0.5, margins);
  const double e = std::exp(-0.5), f = std::exp(0.5);
  CHECK(u[0] == Approx(e / (2 * e + f)).epsilon(1e-15));
  CHECK(u[1] == Approx(f / (2 * e + f)).epsilon(1e-15));
  CHECK(u[0] < w[0]);
}

TEST_CASE("stack meta features") {
  const auto b = testing::random_bundle(6, 2, 30);
  const Matrix M = stack_meta_features(b.P, Vector{{0.3, 0.7}});
  REQUIRE(M.cols() == 4);
  CHECK(M.leftCols(2) == b.P);
  CHECK(M.col(2) == plain_average(b.P));
  CHECK(M.col(3) == weighted_average(b.P, Vector{{0.3, 0.7}}));
  const Matrix C = stack_meta_features(Matrix::Constant(5, 2, 0.4), Vector{{0.5, 0.5}});
  CHECK((C.array() == 0.4).all());
}

TEST_CASE("out-of-fold predictions never see their own row") {
  const auto blobs = testing::make_blobs(120, 3, 1.0, 8);
  const std::vector<learn::ClassifierSpec> specs = {learn::ClassifierSpec::defaults(learn::Kind::lr),
                                                    learn::ClassifierSpec::defaults(learn::Kind::knn)};
  const auto oof = out_of_fold_predictions(specs, blobs.X, blobs.y, 4, 21);
  REQUIRE(oof.P.rows() == 120);
  REQUIRE(oof.P.cols() == 2);
  // refit every fold model without the fold and compare
  for (int f = 0; f < 4; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < 120; ++i) (oof.fold_of[i] == f ? test : train).push_back(i);
    REQUIRE(!test.empty());
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto seed = derive_seed(derive_seed(21, static_cast<std::uint64_t>(f)), learn::to_string(specs[k].kind));
      const auto m = learn::fit(specs[k], stats::take_rows(blobs.X, train), stats::take(blobs.y, train), seed);
      const Vector p = m->predict_proba(stats::take_rows(blobs.X, test));
      for (std::size_t r = 0; r < test.size(); ++r)
        CHECK(oof.P(static_cast<Eigen::Index>(test[r]), static_cast<Eigen::Index>(k)) == p[static_cast<Eigen::Index>(r)]);
    }
  }
}

TEST_CASE("grouped out-of-fold predictions do not leak duplicates") {
  // labels are pure noise and every point is duplicated; ungrouped folds let
  // knn read the duplicate's label
  const auto blobs = testing::make_blobs(80, 2, 0.0, 3);
  Matrix X(160, 2);
  Labels y(160);
  std::vector<std::size_t> groups(160);
  for (Eigen::Index i = 0; i < 160; ++i) {
    X.row(i) = blobs.X.row(i / 2);
    y[static_cast<std::size_t>(i)] = blobs.y[static_cast<std::size_t>(i / 2)];
    groups[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i / 2);
  }
  const std::vector<learn::ClassifierSpec> specs = {learn::ClassifierSpec::defaults(learn::Kind::knn)};
  const auto folds = stats::grouped_stratified_folds(y, groups, 5, 4);
  const auto oof = out_of_fold_predictions(specs, X, y, folds, 4);
  for (std::size_t i = 0; i < 160; i += 2) CHECK(oof.fold_of[i] == oof.fold_of[i + 1]);
  CHECK(oof.fold_of == folds);

  auto auc_of = [&](const OutOfFold& o) {
    const std::vector<double> p(o.P.data(), o.P.data() + o.P.rows());
    return metrics::auc(y, p);
  };
  const auto leaky = out_of_fold_predictions(specs, X, y, 5, 4);
  CHECK(auc_of(oof) < 0.6);
  CHECK(auc_of(leaky) > auc_of(oof) + 0.05);
}
