#include "gwe/pso.hpp"
#include "gwe/stats.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <chrono>

using namespace gwe;
using namespace gwe::pso;

namespace {

SearchSpace box(std::size_t d, double lo, double hi) {
  SearchSpace s;
  for (std::size_t i = 0; i < d; ++i) s.dimensions.push_back({"x" + std::to_string(i), DimensionKind::real, lo, hi});
  return s;
}

double sphere(const Vector& x) { return -x.squaredNorm(); }

}  // namespace

TEST_CASE("initial swarm lies in the box") {
  SwarmConfig c;
  c.particles = 10;
  const auto space = box(3, -2, 7);
  const auto s = init_swarm(space, c);
  REQUIRE(s.particles.size() == 10);
  for (const auto& p : s.particles) {
    CHECK((p.position.array() >= -2).all());
    CHECK((p.position.array() <= 7).all());
    CHECK((p.velocity.cwiseAbs().array() <= s.v_max.array()).all());
    CHECK(p.personal_best == p.position);
  }
  CHECK(s.v_max[0] == Catch::Approx(0.2 * 9));
  const auto again = init_swarm(space, c);
  CHECK(again.particles[4].position == s.particles[4].position);
}

TEST_CASE("degenerate spaces are rejected") {
  auto s = box(2, 0, 1);
  s.dimensions[1].upper = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS(init_swarm(s, SwarmConfig{}), Error);
  CHECK_THROWS_AS(init_swarm(SearchSpace{}, SwarmConfig{}), Error);
}

TEST_CASE("snap rounds integer dimensions inside bounds") {
  SearchSpace s;
  s.dimensions = {{"k", DimensionKind::integer, 3, 20}, {"c", DimensionKind::real, 0.1, 10}};
  Vector p(2);
  p << 7.6, 2.345;
  CHECK(s.snap(p) == Vector{{8.0, 2.345}});
  p << 25, -1;
  CHECK(s.snap(p) == Vector{{20.0, 0.1}});
}

TEST_CASE("zero coefficients freeze the swarm") {
  SwarmConfig c;
  c.w = c.c1 = c.c2 = 0;
  auto s = init_swarm(box(2, -5, 5), c);
  evaluate(s, sphere);
  std::vector<Vector> before;
  for (const auto& p : s.particles) before.push_back(p.position);
  step(s, sphere, c);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(s.particles[i].velocity.isZero());
    CHECK(s.particles[i].position == before[i]);
  }
}

TEST_CASE("constant fitness keeps the first global best") {
  SwarmConfig c;
  const auto space = box(2, -5, 5);
  auto s = init_swarm(space, c);
  const Vector first = s.particles[0].position;
  evaluate(s, [](const Vector&) { return 1.0; });
  CHECK(s.global_best == first);
  for (int t = 0; t < 5; ++t) step(s, [](const Vector&) { return 1.0; }, c);
  CHECK(s.global_best == first);
}

TEST_CASE("particle at its bests moves by inertia only") {
  SwarmConfig c;
  c.particles = 1;
  c.w = 0.5;
  c.v_max = {100.0, 100.0};
  auto s = init_swarm(box(2, -50, 50), c);
  evaluate(s, sphere);
  auto& p = s.particles[0];
  p.position.setZero();
  p.personal_best.setZero();
  s.global_best.setZero();
  p.velocity << 2, -4;
  step(s, sphere, c);
  CHECK(p.velocity == Vector{{1.0, -2.0}});
  CHECK(p.position == Vector{{1.0, -2.0}});
}

TEST_CASE("velocities are clipped and positions clamped") {
  SwarmConfig c;
  c.w = 3.0;
  auto s = init_swarm(box(2, -1, 1), c);
  evaluate(s, sphere);
  for (int t = 0; t < 10; ++t) {
    step(s, sphere, c);
    for (const auto& p : s.particles) {
      CHECK((p.velocity.cwiseAbs().array() <= s.v_max.array() + 1e-15).all());
      CHECK((p.position.array().abs() <= 1.0).all());
    }
  }
}

TEST_CASE("non-finite fitness never becomes the best") {
  SwarmConfig c;
  c.iterations = 3;
  const auto r = optimize(box(1, -1, 1), [](const Vector& x) { return x[0] > 0 ? std::nan("") : x[0]; }, c);
  CHECK(r.best_position[0] <= 0);
  CHECK(std::isfinite(r.best_fitness));
}

TEST_CASE("sphere convergence over 20 seeds") {
  const auto start = std::chrono::steady_clock::now();
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SwarmConfig c;
    c.particles = 20;
    c.iterations = 50;
    c.seed = seed;
    const auto r = optimize(box(2, -5, 5), sphere, c);
    hits += r.best_position.norm() < 0.1;
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
    CHECK(r.trace.size() == 51);
    CHECK(r.evaluations == 20 * 51);
  }
  CHECK(hits >= 18);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 5.0);
}

TEST_CASE("zero iterations return the best initial particle") {
  SwarmConfig c;
  c.iterations = 0;
  const auto space = box(2, -5, 5);
  const auto r = optimize(space, sphere, c);
  auto s = init_swarm(space, c);
  double best = -1e300;
  for (const auto& p : s.particles) best = std::max(best, sphere(p.position));
  CHECK(r.best_fitness == best);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("optimisation is deterministic per seed") {
  SwarmConfig c;
  const auto a = optimize(box(3, -5, 5), sphere, c);
  const auto b = optimize(box(3, -5, 5), sphere, c);
  CHECK(a.best_position == b.best_position);
  c.seed = 43;
  CHECK(optimize(box(3, -5, 5), sphere, c).best_position != a.best_position);
}

TEST_CASE("search spaces follow the learner bounds") {
  const auto gb = SearchSpace::for_kind(learn::Kind::gb);
  REQUIRE(gb.size() == 3);
  CHECK(gb.dimensions[0].kind == DimensionKind::integer);
  CHECK(gb.dimensions[2].kind == DimensionKind::real);
  CHECK(gb.dimensions[2].lower == 0.01);
  const auto knn = SearchSpace::for_kind(learn::Kind::knn);
  CHECK(knn.dimensions[0].lower == 3);
  CHECK(knn.dimensions[0].upper == 20);
}

TEST_CASE("tuning returns in-bounds specs that beat the midpoint") {
  const auto b = testing::make_blobs(300, 4, 0.8, 15, 0.4, 2);
  SwarmConfig c;
  c.particles = 4;
  c.iterations = 3;

  const auto knn = tune_model(learn::Kind::knn, b.X, b.y, SearchSpace::for_kind(learn::Kind::knn), c, 3);
  const double k = knn.spec.get("n_neighbors");
  CHECK(k == std::round(k));
  CHECK(k >= 3);
  CHECK(k <= 20);
  CHECK_NOTHROW(knn.spec.validate());

  const auto space = SearchSpace::for_kind(learn::Kind::lr);
  const auto lr = tune_model(learn::Kind::lr, b.X, b.y, space, c, 3);
  auto mid = learn::ClassifierSpec::defaults(learn::Kind::lr);
  mid.hyperparameters["C"] = 0.5 * (space.dimensions[0].lower + space.dimensions[0].upper);
  // same folds and fit seeds as the tuner
  const auto cv_seed = derive_seed(c.seed, "tune_cv");
  const auto fold_of = stats::stratified_folds(b.y, 3, derive_seed(cv_seed, "cv_folds"));
  CHECK(lr.best_fitness >= cv_auc(mid, b.X, b.y, fold_of, cv_seed));
  for (std::size_t i = 1; i < lr.trace.size(); ++i) CHECK(lr.trace[i] >= lr.trace[i - 1]);
}

TEST_CASE("gb tuning stays inside its box") {
  const auto b = testing::make_blobs(200, 3, 1.0, 16);
  SwarmConfig c;
  c.particles = 3;
  c.iterations = 1;
  const auto r = tune_model(learn::Kind::gb, b.X, b.y, SearchSpace::for_kind(learn::Kind::gb), c, 3);
  CHECK_NOTHROW(r.spec.validate());
  CHECK(r.spec.get("max_depth") == std::round(r.spec.get("max_depth")));
}
