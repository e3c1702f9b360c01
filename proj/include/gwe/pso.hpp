#pragma once

#include "gwe/common.hpp"
#include "gwe/learners.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gwe::pso {

enum class DimensionKind { integer, real };

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::real;
  double lower = 0.0;
  double upper = 1.0;
};

struct SearchSpace {
  std::vector<Dimension> dimensions;

  static SearchSpace for_kind(learn::Kind kind);
  std::size_t size() const { return dimensions.size(); }
  void validate() const;
  // Rounds integer dimensions (after clamping into bounds).
  Vector snap(const Vector& position) const;
};

struct SwarmConfig {
  int particles = 10;
  double c1 = 1.5;
  double c2 = 1.5;
  double w = 0.5;
  // Per-dimension velocity limit; empty selects 0.2 * (upper - lower).
  std::vector<double> v_max;
  int iterations = 10;
  std::uint64_t seed = 42;
};

struct Particle {
  Vector position;
  Vector velocity;
  Vector personal_best;
  double best_fitness = -std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  Vector global_best;
  double global_best_fitness = -std::numeric_limits<double>::infinity();
  Vector v_max;
  Vector lower;
  Vector upper;
  Rng rng;
  int iteration = 0;
};

// Maximised. Non-finite values count as -inf.
using Fitness = std::function<double(const Vector&)>;

// Positions uniform in the box, velocities uniform in [-v_max, v_max];
// personal bests are the initial positions (fitness not yet evaluated).
Swarm init_swarm(const SearchSpace& space, const SwarmConfig& config);
// Scores every particle at its current position and updates the bests.
void evaluate(Swarm& swarm, const Fitness& fitness);
// v <- w v + c1 r1 (pbest - p) + c2 r2 (gbest - p), clipped to v_max;
// p <- p + v, clamped to the box; then evaluate. r1, r2 are drawn for the
// whole swarm before any fitness call.
void step(Swarm& swarm, const Fitness& fitness, const SwarmConfig& config);

struct OptimizeResult {
  Vector best_position;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // global best after init and after every iteration
  std::size_t evaluations = 0;
};

// Evaluates the initial swarm, then runs config.iterations steps. Fitness is
// called on snapped positions.
OptimizeResult optimize(const SearchSpace& space, const Fitness& fitness, const SwarmConfig& config);

struct TuneResult {
  learn::ClassifierSpec spec;
  double best_fitness = 0.0;
  std::vector<double> trace;
};

// Fitness = mean stratified-CV AUC over cv_folds folds of (X, y), the
// folds fixed for the whole search. With `groups`, rows sharing a group id
// stay in one fold.
TuneResult tune_model(learn::Kind kind, const Matrix& X, std::span<const int> y, const SearchSpace& space,
                      const SwarmConfig& config, int cv_folds, const learn::TrainingOptions& options = {},
                      std::span<const std::size_t> groups = {});

double cv_auc(const learn::ClassifierSpec& spec, const Matrix& X, std::span<const int> y, int folds,
              std::uint64_t seed);
double cv_auc(const learn::ClassifierSpec& spec, const Matrix& X, std::span<const int> y, std::span<const int> fold_of,
              std::uint64_t seed);

}  // namespace gwe::pso
