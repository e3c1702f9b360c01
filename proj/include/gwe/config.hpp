#pragma once

#include "gwe/blendnet.hpp"
#include "gwe/dataset.hpp"
#include "gwe/ensemble.hpp"
#include "gwe/learners.hpp"
#include "gwe/metrics.hpp"
#include "gwe/outlier.hpp"
#include "gwe/pso.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gwe::pipeline {

struct DataSection {
  std::string path;
  std::string schema;
  data::LabelMapping labels;
  double test_fraction = 0.2;
};

struct OutlierSection {
  bool enabled = true;
  std::vector<std::string> columns;  // empty = every numeric column
  outlier::BcpHiConfig bcp;
  bool apply_to_test = true;
};

struct AugmentSection {
  bool quantile = true;
  double ratio = 1.5;
  double noise_scale = 0.05;
};

struct FeatureSection {
  bool enabled = true;
  int k = 10;
  learn::ClassifierSpec estimator = learn::ClassifierSpec::defaults(learn::Kind::gb);
  int cv_folds = 3;
  int k_min = 1;
  int k_max = 0;  // 0 = all features
};

struct TuneSection {
  bool enabled = true;
  pso::SwarmConfig swarm;
  int folds = 3;
  std::size_t max_rows = 0;  // 0 = tune on every training row
  std::vector<learn::Kind> models = learn::all_kinds();
};

struct TrainSection {
  std::vector<learn::Kind> models = learn::all_kinds();
  std::vector<std::string> ensembles = {"greedy", "vote", "average", "stack"};
  double validation_fraction = 0.2;
  int stack_folds = 5;
  ensemble::GreedyConfig greedy;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  DataSection data;
  OutlierSection outliers;
  AugmentSection augment;
  FeatureSection features;
  TuneSection tune;
  learn::TrainingOptions learners;
  TrainSection train;
  blendnet::BlendNetConfig blendnet;
  metrics::EvaluationOptions evaluate;

  void validate() const;
};

// INI document: `[section]` headers and `key = value` lines; `#` or `;`
// start comments. Unknown sections or keys are errors. Relative data paths
// resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});

// Canonical text of one section (or of everything when empty), with every
// key resolved. Stage cache keys hash these.
std::string dump_config(const PipelineConfig& config, const std::string& section = {});

const std::vector<std::string>& ensemble_names();

}  // namespace gwe::pipeline
