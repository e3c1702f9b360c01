#include "gwe/pso.hpp"

#include "gwe/metrics.hpp"
#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>

namespace gwe::pso {

SearchSpace SearchSpace::for_kind(learn::Kind kind) {
  SearchSpace s;
  for (const auto& b : learn::search_space(kind))
    s.dimensions.push_back({b.name, b.integer ? DimensionKind::integer : DimensionKind::real, b.lower, b.upper});
  return s;
}

void SearchSpace::validate() const {
  require(!dimensions.empty(), "search space has no dimensions");
  for (const auto& d : dimensions)
    require(std::isfinite(d.lower) && std::isfinite(d.upper) && d.lower < d.upper,
            "search space dimension '" + d.name + "' needs lower < upper");
}

Vector SearchSpace::snap(const Vector& position) const {
  require(static_cast<std::size_t>(position.size()) == dimensions.size(), "snap: dimension mismatch");
  Vector out = position;
  for (std::size_t j = 0; j < dimensions.size(); ++j) {
    const auto& d = dimensions[j];
    const auto k = static_cast<Eigen::Index>(j);
    out(k) = std::clamp(out(k), d.lower, d.upper);
    if (d.kind == DimensionKind::integer) out(k) = std::clamp(std::round(out(k)), std::ceil(d.lower), std::floor(d.upper));
  }
  return out;
}

Swarm init_swarm(const SearchSpace& space, const SwarmConfig& config) {
  space.validate();
  require(config.particles >= 1, "swarm needs at least one particle");
  require(config.iterations >= 0, "iterations must be >= 0");
  require(config.c1 >= 0 && config.c2 >= 0 && config.w >= 0, "c1, c2 and w must be nonnegative");
  const auto d = static_cast<Eigen::Index>(space.size());
  Swarm s;
  s.lower = Vector(d);
  s.upper = Vector(d);
  s.v_max = Vector(d);
  require(config.v_max.empty() || config.v_max.size() == space.size(), "v_max must have one entry per dimension");
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& dim = space.dimensions[static_cast<std::size_t>(j)];
    s.lower(j) = dim.lower;
    s.upper(j) = dim.upper;
    s.v_max(j) = config.v_max.empty() ? 0.2 * (dim.upper - dim.lower) : config.v_max[static_cast<std::size_t>(j)];
    require(s.v_max(j) >= 0, "v_max must be nonnegative");
  }
  s.rng.seed(derive_seed(config.seed, "pso"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.particles.resize(static_cast<std::size_t>(config.particles));
  for (auto& p : s.particles) {
    p.position = Vector(d);
    p.velocity = Vector(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      p.position(j) = s.lower(j) + unit(s.rng) * (s.upper(j) - s.lower(j));
      p.velocity(j) = (2.0 * unit(s.rng) - 1.0) * s.v_max(j);
    }
    p.personal_best = p.position;
  }
  s.global_best = s.particles.front().position;
  return s;
}

void evaluate(Swarm& swarm, const Fitness& fitness) {
  for (auto& p : swarm.particles) {
    double f = fitness(p.position);
    if (!std::isfinite(f)) f = -std::numeric_limits<double>::infinity();
    if (f > p.best_fitness) {
      p.best_fitness = f;
      p.personal_best = p.position;
    }
    if (f > swarm.global_best_fitness) {
      swarm.global_best_fitness = f;
      swarm.global_best = p.position;
    }
  }
}

void step(Swarm& swarm, const Fitness& fitness, const SwarmConfig& config) {
  const auto d = swarm.lower.size();
  const auto n = static_cast<Eigen::Index>(swarm.particles.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix r1(n, d), r2(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      r1(i, j) = unit(swarm.rng);
      r2(i, j) = unit(swarm.rng);
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = swarm.particles[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = config.w * p.velocity(j) + config.c1 * r1(i, j) * (p.personal_best(j) - p.position(j)) +
                 config.c2 * r2(i, j) * (swarm.global_best(j) - p.position(j));
      v = std::clamp(v, -swarm.v_max(j), swarm.v_max(j));
      p.velocity(j) = v;
      p.position(j) = std::clamp(p.position(j) + v, swarm.lower(j), swarm.upper(j));
    }
  }
  evaluate(swarm, fitness);
  ++swarm.iteration;
}

OptimizeResult optimize(const SearchSpace& space, const Fitness& fitness, const SwarmConfig& config) {
  OptimizeResult r;
  auto swarm = init_swarm(space, config);
  const Fitness snapped = [&](const Vector& x) {
    ++r.evaluations;
    return fitness(space.snap(x));
  };
  evaluate(swarm, snapped);
  r.trace.push_back(swarm.global_best_fitness);
  for (int t = 0; t < config.iterations; ++t) {
    step(swarm, snapped, config);
    r.trace.push_back(swarm.global_best_fitness);
  }
  r.best_position = space.snap(swarm.global_best);
  r.best_fitness = swarm.global_best_fitness;
  return r;
}

double cv_auc(const learn::ClassifierSpec& spec, const Matrix& X, std::span<const int> y, int folds,
              std::uint64_t seed) {
  require(folds >= 2, "cv_auc: folds must be >= 2");
  return cv_auc(spec, X, y, stats::stratified_folds(y, folds, derive_seed(seed, "cv_folds")), seed);
}

double cv_auc(const learn::ClassifierSpec& spec, const Matrix& X, std::span<const int> y, std::span<const int> fold_of,
              std::uint64_t seed) {
  require(fold_of.size() == y.size(), "cv_auc: fold count does not match rows");
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  require(folds >= 2, "cv_auc: folds must be >= 2");
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    const Labels ytr = stats::take(y, train);
    const Labels yte = stats::take(y, test);
    const auto model = learn::fit(spec, stats::take_rows(X, train), ytr, derive_seed(seed, static_cast<std::uint64_t>(f)));
    const Vector p = model->predict_proba(stats::take_rows(X, test));
    total += metrics::auc(yte, stats::to_std(p));
  }
  return total / folds;
}

TuneResult tune_model(learn::Kind kind, const Matrix& X, std::span<const int> y, const SearchSpace& space,
                      const SwarmConfig& config, int cv_folds, const learn::TrainingOptions& options,
                      std::span<const std::size_t> groups) {
  const auto& table = learn::search_space(kind);
  require(space.size() == table.size(), "tune_model: search space does not match the " + learn::to_string(kind) + " box");
  for (std::size_t j = 0; j < space.size(); ++j)
    require(space.dimensions[j].name == table[j].name && space.dimensions[j].lower >= table[j].lower &&
                space.dimensions[j].upper <= table[j].upper,
            "tune_model: dimension '" + space.dimensions[j].name + "' does not match the " + learn::to_string(kind) +
                " box");

  auto spec_at = [&](const Vector& x) {
    learn::ClassifierSpec spec;
    spec.kind = kind;
    spec.options = options;
    for (std::size_t j = 0; j < space.size(); ++j)
      spec.hyperparameters[space.dimensions[j].name] = x(static_cast<Eigen::Index>(j));
    return spec;
  };
  const auto cv_seed = derive_seed(config.seed, "tune_cv");
  const auto fold_of = groups.empty()
                           ? stats::stratified_folds(y, cv_folds, derive_seed(cv_seed, "cv_folds"))
                           : stats::grouped_stratified_folds(y, groups, cv_folds, derive_seed(cv_seed, "cv_folds"));
  const auto result =
      optimize(space, [&](const Vector& x) { return cv_auc(spec_at(x), X, y, fold_of, cv_seed); }, config);
  return {spec_at(result.best_position), result.best_fitness, result.trace};
}

}  // namespace gwe::pso
