#include "gwe/metrics.hpp"

#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gwe::metrics {

namespace {

void check_labels(std::span<const int> y, std::string_view who) {
  for (std::size_t i = 0; i < y.size(); ++i)
    require(y[i] == 0 || y[i] == 1, std::string(who) + ": labels must be 0 or 1 (row " + std::to_string(i) + ")");
}

double ratio(std::size_t num, std::size_t den, std::string_view what) {
  if (den == 0) {
    warn(std::string(what) + " is 0/0, reported as 0");
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassScores scores(std::size_t tp, std::size_t fp, std::size_t fn, std::string_view label) {
  ClassScores s;
  s.precision = ratio(tp, tp + fp, std::string("precision of class ") + std::string(label));
  s.recall = ratio(tp, tp + fn, std::string("recall of class ") + std::string(label));
  const double sum = s.precision + s.recall;
  if (sum > 0) {
    s.f1 = 2.0 * s.precision * s.recall / sum;
  } else {
    warn("F1 of class " + std::string(label) + " is 0/0, reported as 0");
  }
  return s;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  require(y_true.size() == y_pred.size(), "confusion: length mismatch");
  check_labels(y_true, "confusion");
  check_labels(y_pred, "confusion");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 1) {
      (y_pred[i] == 1 ? cm.tp : cm.fn)++;
    } else {
      (y_pred[i] == 1 ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm) {
  PrecisionRecallF1 r;
  r.class1 = scores(cm.tp, cm.fp, cm.fn, "1");
  r.class0 = scores(cm.tn, cm.fn, cm.fp, "0");
  r.macro.precision = 0.5 * (r.class0.precision + r.class1.precision);
  r.macro.recall = 0.5 * (r.class0.recall + r.class1.recall);
  r.macro.f1 = 0.5 * (r.class0.f1 + r.class1.f1);
  return r;
}

RocResult roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  require(y_true.size() == scores.size(), "roc_auc: length mismatch");
  check_labels(y_true, "roc_auc");
  const std::size_t pos = stats::count_label(y_true, 1);
  const std::size_t neg = y_true.size() - pos;
  require(pos > 0 && neg > 0, "roc_auc: both classes must be present");
  for (double s : scores) require(!std::isnan(s), "roc_auc: NaN score");

  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult r;
  r.curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  r.curve.fpr.push_back(0.0);
  r.curve.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  // Twice the trapezoid area in units of one positive x one negative, kept
  // integral so the result is exact up to the final division.
  unsigned long long area2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (y_true[order[i]] == 1 ? dtp : dfp)++;
      ++i;
    }
    area2 += static_cast<unsigned long long>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    r.curve.thresholds.push_back(s);
    r.curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    r.curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
  }
  r.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return r;
}

double auc(std::span<const int> y_true, std::span<const double> scores) { return roc_auc(y_true, scores).auc; }

BootstrapAuc bootstrap_auc(std::span<const int> y_true, std::span<const double> scores, int n_boot,
                           std::uint64_t seed, double level) {
  require(n_boot >= 2, "bootstrap_auc: n_boot must be >= 2");
  require(level > 0.0 && level < 1.0, "bootstrap_auc: level must be in (0, 1)");
  require(y_true.size() == scores.size() && !y_true.empty(), "bootstrap_auc: length mismatch");
  check_labels(y_true, "bootstrap_auc");
  BootstrapAuc b;
  b.n_boot = n_boot;
  b.seed = seed;
  Rng rng(derive_seed(seed, "bootstrap_auc"));
  std::uniform_int_distribution<std::size_t> pick(0, y_true.size() - 1);
  std::vector<double> aucs;
  Labels yb(y_true.size());
  std::vector<double> sb(y_true.size());
  for (int r = 0; r < n_boot; ++r) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const auto k = pick(rng);
      yb[i] = y_true[k];
      sb[i] = scores[k];
      ones += static_cast<std::size_t>(yb[i]);
    }
    if (ones == 0 || ones == yb.size()) {
      ++b.skipped;
      continue;
    }
    aucs.push_back(auc(yb, sb));
  }
  require(!aucs.empty(), "bootstrap_auc: every resample had a single class");
  if (b.skipped > 0) warn("bootstrap_auc: skipped " + std::to_string(b.skipped) + " single-class resamples");
  b.mean = stats::mean(aucs);
  b.std = stats::stddev(aucs);
  std::sort(aucs.begin(), aucs.end());
  b.ci_low = stats::quantile_sorted(aucs, 0.5 * (1.0 - level));
  b.ci_high = stats::quantile_sorted(aucs, 1.0 - 0.5 * (1.0 - level));
  return b;
}

double brier(std::span<const int> y_true, std::span<const double> probs) {
  require(y_true.size() == probs.size() && !probs.empty(), "brier: length mismatch");
  check_labels(y_true, "brier");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    require(probs[i] >= 0.0 && probs[i] <= 1.0, "brier: probability outside [0, 1] at row " + std::to_string(i));
    const double e = probs[i] - y_true[i];
    s += e * e;
  }
  return s / static_cast<double>(probs.size());
}

double log_loss(std::span<const int> y_true, std::span<const double> probs, double eps) {
  require(y_true.size() == probs.size() && !probs.empty(), "log_loss: length mismatch");
  require(eps > 0.0 && eps < 0.5, "log_loss: eps must be in (0, 0.5)");
  check_labels(y_true, "log_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    s -= y_true[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return s / static_cast<double>(probs.size());
}

CalibrationCurve calibration_curve(std::span<const int> y_true, std::span<const double> probs, int n_bins) {
  require(n_bins >= 2, "calibration_curve: n_bins must be >= 2");
  require(y_true.size() == probs.size(), "calibration_curve: length mismatch");
  check_labels(y_true, "calibration_curve");
  const auto nb = static_cast<std::size_t>(n_bins);
  CalibrationCurve c;
  c.edges.resize(nb + 1);
  for (std::size_t b = 0; b <= nb; ++b) c.edges[b] = static_cast<double>(b) / static_cast<double>(nb);
  c.mean_predicted.assign(nb, 0.0);
  c.observed_rate.assign(nb, 0.0);
  c.counts.assign(nb, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    require(p >= 0.0 && p <= 1.0, "calibration_curve: probability outside [0, 1] at row " + std::to_string(i));
    const auto b = std::min(nb - 1, static_cast<std::size_t>(std::floor(p * static_cast<double>(nb))));
    c.mean_predicted[b] += p;
    c.observed_rate[b] += y_true[i];
    ++c.counts[b];
  }
  for (std::size_t b = 0; b < nb; ++b)
    if (c.counts[b] > 0) {
      c.mean_predicted[b] /= static_cast<double>(c.counts[b]);
      c.observed_rate[b] /= static_cast<double>(c.counts[b]);
    }
  return c;
}

Evaluation evaluate(std::span<const int> y_true, std::span<const double> probs, const EvaluationOptions& options) {
  Labels pred(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= options.threshold ? 1 : 0;
  return evaluate(y_true, probs, pred, options);
}

Evaluation evaluate(std::span<const int> y_true, std::span<const double> probs, std::span<const int> pred,
                    const EvaluationOptions& options) {
  require(pred.size() == probs.size(), "evaluate: label and score counts differ");
  Evaluation e;
  e.confusion = confusion(y_true, pred);
  e.prf = precision_recall_f1(e.confusion);
  e.roc = roc_auc(y_true, probs);
  e.bootstrap = bootstrap_auc(y_true, probs, options.n_boot, options.seed);
  e.brier = brier(y_true, probs);
  e.log_loss = log_loss(y_true, probs);
  e.calibration = calibration_curve(y_true, probs, options.calibration_bins);
  return e;
}

}  // namespace gwe::metrics
