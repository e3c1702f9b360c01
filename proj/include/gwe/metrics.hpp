#pragma once

#include "gwe/common.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gwe::metrics {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PrecisionRecallF1 {
  ClassScores class0;  // class 0 treated as the positive label
  ClassScores class1;
  ClassScores macro;   // unweighted mean of the two
};

// 0/0 ratios are reported as 0 with a warning.
PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<double> thresholds;  // descending; the first is +inf
  std::vector<double> fpr;
  std::vector<double> tpr;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

// One curve point per distinct score (ties share a step); trapezoid AUC.
RocResult roc_auc(std::span<const int> y_true, std::span<const double> scores);
double auc(std::span<const int> y_true, std::span<const double> scores);

struct BootstrapAuc {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation of the retained AUCs
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_boot = 0;
  std::size_t skipped = 0;  // single-class resamples
  std::uint64_t seed = 0;
};

BootstrapAuc bootstrap_auc(std::span<const int> y_true, std::span<const double> scores, int n_boot,
                           std::uint64_t seed, double level = 0.95);

double brier(std::span<const int> y_true, std::span<const double> probs);
double log_loss(std::span<const int> y_true, std::span<const double> probs, double eps = 1e-15);

struct CalibrationCurve {
  std::vector<double> edges;  // n_bins + 1 equal-width edges on [0, 1]
  std::vector<double> mean_predicted;  // 0 for empty bins
  std::vector<double> observed_rate;   // 0 for empty bins
  std::vector<std::size_t> counts;
};

// Bin b holds p in [edge_b, edge_{b+1}); p = 1 falls in the last bin.
CalibrationCurve calibration_curve(std::span<const int> y_true, std::span<const double> probs, int n_bins = 10);

struct EvaluationOptions {
  double threshold = 0.5;
  int n_boot = 1000;
  std::uint64_t seed = 42;
  int calibration_bins = 10;
};

struct Evaluation {
  ConfusionMatrix confusion;
  PrecisionRecallF1 prf;
  RocResult roc;
  BootstrapAuc bootstrap;
  double brier = 0.0;
  double log_loss = 0.0;
  CalibrationCurve calibration;
};

Evaluation evaluate(std::span<const int> y_true, std::span<const double> probs, const EvaluationOptions& options);
// Hard labels supplied by the caller instead of thresholding `probs`.
Evaluation evaluate(std::span<const int> y_true, std::span<const double> probs, std::span<const int> pred,
                    const EvaluationOptions& options);

}  // namespace gwe::metrics
