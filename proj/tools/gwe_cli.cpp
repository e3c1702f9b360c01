#include "gwe/config.hpp"
#include "gwe/dataset.hpp"
#include "gwe/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace {

using gwe::pipeline::Stage;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool force = false;
};

struct Overrides {
  std::optional<std::string> data, schema;
  std::optional<double> ratio, noise_scale;
  std::optional<std::uint64_t> augment_seed;
  std::optional<int> k;
  std::optional<std::string> estimator;
  std::vector<std::string> tune_models;
  std::optional<int> folds;
  std::optional<std::uint64_t> tune_seed;
  std::vector<std::string> ensembles;
};

gwe::pipeline::PipelineConfig build_config(const GlobalFlags& g, const Overrides& o) {
  gwe::pipeline::PipelineConfig c;
  if (!g.config.empty()) c = gwe::pipeline::load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.out_dir) c.out_dir = *g.out_dir;
  if (o.data) c.data.path = *o.data;
  if (o.schema) c.data.schema = *o.schema;
  if (o.ratio) c.augment.ratio = *o.ratio;
  if (o.noise_scale) c.augment.noise_scale = *o.noise_scale;
  if (o.augment_seed) c.seed = *o.augment_seed;
  if (o.k) c.features.k = *o.k;
  if (o.estimator) {
    const auto kind = gwe::learn::parse_kind(*o.estimator);
    if (kind != c.features.estimator.kind) c.features.estimator = gwe::learn::ClassifierSpec::defaults(kind);
  }
  if (!o.tune_models.empty()) {
    c.tune.models.clear();
    for (const auto& m : o.tune_models) c.tune.models.push_back(gwe::learn::parse_kind(m));
  }
  if (o.folds) c.tune.folds = *o.folds;
  if (o.tune_seed) c.seed = *o.tune_seed;
  if (!o.ensembles.empty()) c.train.ensembles = o.ensembles;
  c.validate();
  return c;
}

void print(const gwe::pipeline::StageOutcome& s, double seconds) {
  std::cout << gwe::pipeline::to_string(s.stage) << ": " << (s.cached ? "cached" : "done");
  if (!s.cached) std::cout << " (" << std::fixed << std::setprecision(1) << seconds << " s)";
  std::cout << " -> " << s.dir.string() << '\n';
}

int run_stages(const GlobalFlags& g, const Overrides& o, std::optional<Stage> only) {
  std::string current = only ? gwe::pipeline::to_string(*only) : "config";
  try {
    auto config = build_config(g, o);
    gwe::pipeline::Pipeline p(config);
    if (only) {
      if (*only == Stage::ingest) gwe::pipeline::check_inputs(config);
      const auto t0 = std::chrono::steady_clock::now();
      const auto s = p.run_stage(*only, g.force);
      print(s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return 0;
    }
    current = "ingest";
    gwe::pipeline::check_inputs(config);
    bool dirty = g.force;
    for (auto stage : gwe::pipeline::all_stages()) {
      current = gwe::pipeline::to_string(stage);
      const auto t0 = std::chrono::steady_clock::now();
      const auto s = p.run_stage(stage, dirty);
      dirty = dirty || !s.cached;
      print(s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return 0;
  } catch (const gwe::pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: stage '" << current << "' failed: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy-weighted ensemble pipeline for loan-default prediction"};
  app.require_subcommand(1);
  GlobalFlags g;
  Overrides o;
  std::uint64_t seed_value = 0;
  std::string out_dir_value;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed");
  auto* out_opt = app.add_option("--out-dir", out_dir_value, "Artifact directory");
  app.add_flag("--force", g.force, "Rerun stages even when cached");

  auto* ingest = app.add_subcommand("ingest", "Read, clean, encode and split the loan file");
  ingest->add_option("--data", o.data, "Loan CSV");
  ingest->add_option("--schema", o.schema, "Schema file");
  auto* outliers = app.add_subcommand("outliers", "Change-point segmentation plus IQR/Hampel correction");
  auto* augment = app.add_subcommand("augment", "Quantile transform, undersampling and noise augmentation");
  augment->add_option("--ratio", o.ratio, "Majority rows kept per minority row");
  augment->add_option("--noise-scale", o.noise_scale, "Noise standard deviation as a fraction of column sd");
  augment->add_option("--seed", o.augment_seed, "Master seed");
  auto* select = app.add_subcommand("select-features", "Recursive feature elimination");
  select->add_option("--k", o.k, "Features to keep");
  select->add_option("--estimator", o.estimator, "Importance estimator")->check(CLI::IsMember({"gb", "ert"}));
  auto* tune = app.add_subcommand("tune", "Particle swarm hyperparameter search");
  tune->add_option("--model", o.tune_models, "Model kinds to tune (repeatable)")
      ->check(CLI::IsMember({"gb", "mlp", "svm", "knn", "lr", "ert"}));
  tune->add_option("--folds", o.folds, "Cross-validation folds");
  tune->add_option("--seed", o.tune_seed, "Master seed");
  auto* train = app.add_subcommand("train", "Fit base learners, ensemble weights and the stacking network");
  train->add_option("--ensemble", o.ensembles, "Ensembles to build (repeatable)")
      ->check(CLI::IsMember({"greedy", "vote", "average", "stack"}));
  auto* evaluate = app.add_subcommand("evaluate", "Score every model on the held-out rows");
  auto* report = app.add_subcommand("report", "Write the comparison table");
  auto* run = app.add_subcommand("run", "Run every stage, reusing cached ones");
  run->add_option("--data", o.data, "Loan CSV");
  run->add_option("--schema", o.schema, "Schema file");

  auto* synth = app.add_subcommand("synth", "Write a synthetic loan file and its schema");
  gwe::data::SyntheticOptions synth_opts;
  std::string synth_out = "synthetic.csv";
  std::string synth_schema;
  synth->add_option("--rows", synth_opts.rows, "Rows to generate");
  synth->add_option("--seed", synth_opts.seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output CSV");
  synth->add_option("--schema-out", synth_schema, "Output schema file");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_value;
  if (out_opt->count()) g.out_dir = out_dir_value;

  if (synth->parsed()) {
    try {
      std::ofstream out(synth_out, std::ios::binary);
      if (!out) throw gwe::Error("cannot write " + synth_out);
      gwe::data::write_synthetic_csv(out, synth_opts);
      if (!synth_schema.empty()) {
        std::ofstream s(synth_schema, std::ios::binary);
        if (!s) throw gwe::Error("cannot write " + synth_schema);
        gwe::data::write_schema(s, gwe::data::synthetic_schema());
      }
    } catch (const std::exception& e) {
      std::cerr << "error: synth: " << e.what() << '\n';
      return 2;
    }
    return 0;
  }

  const std::pair<CLI::App*, Stage> stages[] = {
      {ingest, Stage::ingest},     {outliers, Stage::outliers}, {augment, Stage::augment},
      {select, Stage::select_features}, {tune, Stage::tune},    {train, Stage::train},
      {evaluate, Stage::evaluate}, {report, Stage::report}};
  for (const auto& [cmd, stage] : stages)
    if (cmd->parsed()) return run_stages(g, o, stage);
  return run_stages(g, o, std::nullopt);
}
