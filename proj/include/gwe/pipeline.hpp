#pragma once

#include "gwe/config.hpp"
#include "gwe/dataset.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gwe::pipeline {

enum class Stage { ingest, outliers, augment, select_features, tune, train, evaluate, report };

std::string to_string(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message);
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

// Every attempt to read the held-out rows is logged, allowed or not.
struct TestAccess {
  std::string stage;
  bool allowed = false;
};

const std::vector<TestAccess>& test_access_log();
void reset_test_access_log();

// The test split on disk. Only the evaluate stage may open it.
class SealedTestSet {
 public:
  SealedTestSet(std::filesystem::path matrix, std::filesystem::path groups);
  data::EncodedMatrix open(std::string_view stage) const;

 private:
  std::filesystem::path matrix_;
  std::filesystem::path groups_;
};

struct StageOutcome {
  Stage stage = Stage::ingest;
  bool cached = false;
  std::string key;
  std::filesystem::path dir;
};

// Stages write under <out_dir>/<stage>/. A stage whose stored key matches
// the SHA-256 of its config sections and its upstream key is skipped.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path stage_dir(Stage stage) const;

  // Throws StageError naming the stage. Upstream stages must already exist.
  StageOutcome run_stage(Stage stage, bool force = false);
  // Checks input paths before touching the output directory.
  std::vector<StageOutcome> run_all(bool force = false);

  std::string expected_key(Stage stage) const;
  std::string stored_key(Stage stage) const;

 private:
  void execute(Stage stage);
  void ingest();
  void outliers();
  void augment();
  void select_features();
  void tune();
  void train();
  void evaluate();
  void report();

  PipelineConfig config_;
};

void check_inputs(const PipelineConfig& config);

// Lower-case hex digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Hyperparameter file written by the tune stage: `kind = gb` followed by
// one `name = value` line per hyperparameter.
void write_spec(const std::filesystem::path& path, const learn::ClassifierSpec& spec);
learn::ClassifierSpec read_spec(const std::filesystem::path& path, const learn::TrainingOptions& options);

// Columns of report.csv / report.md, in order.
const std::vector<std::string>& report_columns();

}  // namespace gwe::pipeline
