#include "gwe/learners.hpp"
#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace gwe::learn {

namespace {

double gini(double pos, double n) {
  if (n <= 0) return 0.0;
  const double p = pos / n;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

struct Pending {
  int node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

void put_trees(std::ostream& out, const std::vector<Tree>& trees) {
  out << trees.size() << '\n';
  for (const auto& t : trees) {
    out << t.nodes.size() << '\n';
    for (const auto& n : t.nodes) {
      out << n.feature << ' ';
      io::put(out, n.threshold);
      out << ' ' << n.left << ' ' << n.right << ' ';
      for (double v : {n.value, n.grad, n.hess, n.grad_left, n.hess_left, n.grad_right, n.hess_right, n.gain,
                       n.impurity, n.fraction}) {
        io::put(out, v);
        out << ' ';
      }
      out << n.samples << '\n';
    }
  }
}

std::vector<Tree> get_trees(std::istream& in, std::size_t features) {
  std::vector<Tree> trees(static_cast<std::size_t>(io::get_int(in)));
  for (auto& t : trees) {
    t.nodes.resize(static_cast<std::size_t>(io::get_int(in)));
    const auto count = static_cast<int>(t.nodes.size());
    for (auto& n : t.nodes) {
      n.feature = static_cast<int>(io::get_int(in));
      n.threshold = io::get_double(in);
      n.left = static_cast<int>(io::get_int(in));
      n.right = static_cast<int>(io::get_int(in));
      for (double* v : {&n.value, &n.grad, &n.hess, &n.grad_left, &n.hess_left, &n.grad_right, &n.hess_right,
                        &n.gain, &n.impurity, &n.fraction})
        *v = io::get_double(in);
      n.samples = static_cast<std::size_t>(io::get_int(in));
      if (!n.is_leaf())
        require(static_cast<std::size_t>(n.feature) < features && n.left > 0 && n.left < count && n.right > 0 &&
                    n.right < count,
                "tree artifact: invalid node");
    }
    require(!t.nodes.empty(), "tree artifact: empty tree");
  }
  return trees;
}

}  // namespace

// ---------------------------------------------------------------- extra trees

ExtraTrees::ExtraTrees(ClassifierSpec spec) : Classifier(std::move(spec)) {}

void ExtraTrees::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) {
  const int n_trees = spec().get_int("n_estimators");
  const int max_depth = spec().get_int("max_depth");
  const auto min_split = static_cast<std::size_t>(spec().get_int("min_samples_split"));
  const auto d = static_cast<int>(X.cols());
  int max_features = spec().options.ert_max_features;
  if (max_features == 0) max_features = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));
  max_features = std::min(max_features, d);
  const auto total = static_cast<double>(X.rows());

  trees_.assign(static_cast<std::size_t>(n_trees), Tree{});
  std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(derive_seed(seed, "ert"), static_cast<std::uint64_t>(t)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto& nodes = trees_[static_cast<std::size_t>(t)].nodes;
    nodes.emplace_back();
    std::vector<Pending> stack = {{0, 0, rows.size(), 0}};
    while (!stack.empty()) {
      const auto job = stack.back();
      stack.pop_back();
      const auto n = static_cast<double>(job.end - job.begin);
      double pos = 0;
      for (auto k = job.begin; k < job.end; ++k) pos += y[rows[k]];
      {
        auto& node = nodes[static_cast<std::size_t>(job.node)];
        node.samples = job.end - job.begin;
        node.value = pos / n;
        node.impurity = gini(pos, n);
        node.fraction = n / total;
      }
      const double impurity = gini(pos, n);
      if (job.depth >= max_depth || job.end - job.begin < min_split || impurity <= 0.0) continue;

      std::iota(order.begin(), order.end(), 0);
      int tried = 0;
      int best_feature = -1;
      double best_threshold = 0.0;
      double best_child = std::numeric_limits<double>::infinity();
      for (int f = 0; f < d && tried < max_features; ++f) {
        std::uniform_int_distribution<int> pick(f, d - 1);
        std::swap(order[static_cast<std::size_t>(f)], order[static_cast<std::size_t>(pick(rng))]);
        const int j = order[static_cast<std::size_t>(f)];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto k = job.begin; k < job.end; ++k) {
          const double v = X(static_cast<Eigen::Index>(rows[k]), j);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (!(hi > lo)) continue;
        ++tried;
        double thr = lo + unit(rng) * (hi - lo);
        if (thr >= hi) thr = lo;
        double nl = 0, pl = 0;
        for (auto k = job.begin; k < job.end; ++k) {
          if (X(static_cast<Eigen::Index>(rows[k]), j) <= thr) {
            nl += 1;
            pl += y[rows[k]];
          }
        }
        const double child = (nl * gini(pl, nl) + (n - nl) * gini(pos - pl, n - nl)) / n;
        if (child < best_child) {
          best_child = child;
          best_feature = j;
          best_threshold = thr;
        }
      }
      if (best_feature < 0) continue;

      auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                rows.begin() + static_cast<std::ptrdiff_t>(job.end), [&](std::size_t r) {
                                  return X(static_cast<Eigen::Index>(r), best_feature) <= best_threshold;
                                });
      const auto split = static_cast<std::size_t>(mid - rows.begin());
      const int left = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      auto& node = nodes[static_cast<std::size_t>(job.node)];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = left;
      node.right = left + 1;
      node.gain = impurity - best_child;
      stack.push_back({left + 1, split, job.end, job.depth + 1});
      stack.push_back({left, job.begin, split, job.depth + 1});
    }
  }
}

Vector ExtraTrees::do_predict(const Matrix& X) const {
  Vector out = Vector::Zero(X.rows());
  for (const auto& t : trees_)
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += t.predict(X, i);
  return out / static_cast<double>(trees_.size());
}

void ExtraTrees::save_state(std::ostream& out) const { put_trees(out, trees_); }

void ExtraTrees::load_state(std::istream& in) {
  trees_ = get_trees(in, std::numeric_limits<std::size_t>::max());
  require(!trees_.empty(), "ert artifact: no trees");
}

// ---------------------------------------------------------------- gradient boosting

GradientBoosting::GradientBoosting(ClassifierSpec spec) : Classifier(std::move(spec)) {}

double GradientBoosting::split_gain(double g_left, double h_left, double g_right, double h_right, double lambda) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) - g * g / (h + lambda));
}

void GradientBoosting::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t) {
  const int n_trees = spec().get_int("n_estimators");
  const int max_depth = spec().get_int("max_depth");
  const double eta = spec().get("learning_rate");
  const auto& opt = spec().options;
  const double lambda = opt.gb_lambda;
  const auto min_leaf = static_cast<std::size_t>(opt.gb_min_samples_leaf);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());

  // Candidate cut points: distinct quantiles of each column. bin(x) counts
  // the cuts strictly below x, so bin(x) <= b  <=>  x <= cuts[b].
  std::vector<std::vector<double>> cuts(d);
  std::vector<std::uint8_t> bins(n * d);
  std::vector<std::size_t> width(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto col = stats::column(X, static_cast<Eigen::Index>(j));
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
    auto& c = cuts[j];
    if (col.size() <= static_cast<std::size_t>(opt.gb_bins)) {
      c.assign(col.begin(), col.end() - 1);  // every distinct value but the largest
    } else {
      auto full = stats::column(X, static_cast<Eigen::Index>(j));
      std::sort(full.begin(), full.end());
      for (int b = 1; b < opt.gb_bins; ++b) {
        const double q = full[static_cast<std::size_t>(
            std::floor(static_cast<double>(b) / opt.gb_bins * static_cast<double>(n - 1)))];
        if (q < col.back() && (c.empty() || q > c.back())) c.push_back(q);
      }
    }
    width[j] = c.size() + 1;
    for (std::size_t i = 0; i < n; ++i)
      bins[j * n + i] = static_cast<std::uint8_t>(
          std::lower_bound(c.begin(), c.end(), X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) -
          c.begin());
  }

  const double rate = static_cast<double>(stats::count_label(y, 1)) / static_cast<double>(n);
  base_score_ = std::log(rate / (1.0 - rate));
  Vector F = Vector::Constant(static_cast<Eigen::Index>(n), base_score_);
  std::vector<double> g(n), h(n);
  std::vector<std::size_t> rows(n);
  const std::size_t max_bins = static_cast<std::size_t>(opt.gb_bins);
  std::vector<double> hg(d * max_bins), hh(d * max_bins);
  std::vector<std::size_t> hc(d * max_bins);

  auto train_loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += softplus(F(static_cast<Eigen::Index>(i))) - y[i] * F(static_cast<Eigen::Index>(i));
    return s / static_cast<double>(n);
  };
  loss_history_.push_back(train_loss());

  trees_.assign(static_cast<std::size_t>(n_trees), Tree{});
  for (int t = 0; t < n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(F(static_cast<Eigen::Index>(i)));
      g[i] = p - y[i];
      h[i] = std::max(p * (1.0 - p), 1e-16);
    }
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    auto& nodes = trees_[static_cast<std::size_t>(t)].nodes;
    nodes.emplace_back();
    std::vector<Pending> stack = {{0, 0, n, 0}};
    while (!stack.empty()) {
      const auto job = stack.back();
      stack.pop_back();
      const std::size_t count = job.end - job.begin;
      double G = 0, H = 0;
      for (auto k = job.begin; k < job.end; ++k) {
        G += g[rows[k]];
        H += h[rows[k]];
      }
      {
        auto& node = nodes[static_cast<std::size_t>(job.node)];
        node.samples = count;
        node.grad = G;
        node.hess = H;
        node.fraction = static_cast<double>(count) / static_cast<double>(n);
        node.value = -eta * G / (H + lambda);
      }
      if (job.depth >= max_depth || count < 2 * min_leaf) continue;

      std::fill(hg.begin(), hg.end(), 0.0);
      std::fill(hh.begin(), hh.end(), 0.0);
      std::fill(hc.begin(), hc.end(), std::size_t{0});
      for (std::size_t j = 0; j < d; ++j) {
        const std::uint8_t* bj = &bins[j * n];
        double* gj = &hg[j * max_bins];
        double* hj = &hh[j * max_bins];
        std::size_t* cj = &hc[j * max_bins];
        for (auto k = job.begin; k < job.end; ++k) {
          const auto r = rows[k];
          gj[bj[r]] += g[r];
          hj[bj[r]] += h[r];
          ++cj[bj[r]];
        }
      }
      double best = 0.0;
      std::size_t best_j = 0, best_b = 0;
      double bgl = 0, bhl = 0;
      bool found = false;
      for (std::size_t j = 0; j < d; ++j) {
        double gl = 0, hl = 0;
        std::size_t cl = 0;
        for (std::size_t b = 0; b + 1 < width[j]; ++b) {
          gl += hg[j * max_bins + b];
          hl += hh[j * max_bins + b];
          cl += hc[j * max_bins + b];
          if (cl < min_leaf) continue;
          if (count - cl < min_leaf) break;
          const double gr = G - gl;
          const double hr = H - hl;
          if (hl < opt.gb_min_child_weight || hr < opt.gb_min_child_weight) continue;
          const double gain = split_gain(gl, hl, gr, hr, lambda);
          if (gain > best + 1e-12) {
            best = gain;
            best_j = j;
            best_b = b;
            bgl = gl;
            bhl = hl;
            found = true;
          }
        }
      }
      if (!found) continue;

      const std::uint8_t* bj = &bins[best_j * n];
      auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                       rows.begin() + static_cast<std::ptrdiff_t>(job.end),
                                       [&](std::size_t r) { return bj[r] <= best_b; });
      const auto split = static_cast<std::size_t>(mid - rows.begin());
      const int left = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      auto& node = nodes[static_cast<std::size_t>(job.node)];
      node.feature = static_cast<int>(best_j);
      node.threshold = cuts[best_j][best_b];
      node.left = left;
      node.right = left + 1;
      node.gain = best;
      node.grad_left = bgl;
      node.hess_left = bhl;
      node.grad_right = G - bgl;
      node.hess_right = H - bhl;
      stack.push_back({left + 1, split, job.end, job.depth + 1});
      stack.push_back({left, job.begin, split, job.depth + 1});
    }
    const auto& tree = trees_[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < n; ++i) F(static_cast<Eigen::Index>(i)) += tree.predict(X, static_cast<Eigen::Index>(i));
    loss_history_.push_back(train_loss());
  }
}

Vector GradientBoosting::decision_function(const Matrix& X) const {
  Vector F = Vector::Constant(X.rows(), base_score_);
  for (const auto& t : trees_)
    for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += t.predict(X, i);
  return F;
}

Vector GradientBoosting::do_predict(const Matrix& X) const {
  return decision_function(X).unaryExpr([](double v) { return sigmoid(v); });
}

void GradientBoosting::save_state(std::ostream& out) const {
  io::put(out, base_score_);
  out << '\n';
  put_trees(out, trees_);
}

void GradientBoosting::load_state(std::istream& in) {
  base_score_ = io::get_double(in);
  trees_ = get_trees(in, std::numeric_limits<std::size_t>::max());
}

}  // namespace gwe::learn
