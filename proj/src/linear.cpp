#include "gwe/learners.hpp"
#include "gwe/stats.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace gwe::learn {

namespace {

Vector decision(const Vector& theta, const Matrix& Z) {
  return (Z * theta.tail(theta.size() - 1)).array() + theta(0);
}

// Damped Newton with Armijo backtracking. `eval` returns the objective and
// fills gradient and Hessian.
template <class Eval, class Value>
void newton_minimize(Vector& theta, int max_iter, Eval&& eval, Value&& value, std::vector<double>& history) {
  Vector g;
  Matrix H;
  double f = eval(theta, g, H);
  history.push_back(f);
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-10) break;
    const Vector step = H.ldlt().solve(-g);
    const double slope = g.dot(step);
    if (!(slope < 0)) break;
    double t = 1.0;
    double f_new = f;
    Vector candidate;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      candidate = theta + t * step;
      f_new = value(candidate);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    theta = candidate;
    const double f_prev = f;
    f = eval(theta, g, H);
    history.push_back(f);
    if (f_prev - f <= 1e-15 * std::max(1.0, std::abs(f))) break;
  }
}

}  // namespace

LogisticRegression::LogisticRegression(ClassifierSpec spec) : Classifier(std::move(spec)) {}

double LogisticRegression::objective(const Vector& theta, const Matrix& Z, std::span<const int> y, double C,
                                     Vector* gradient) {
  const auto n = static_cast<double>(Z.rows());
  const Vector z = decision(theta, Z);
  const auto w = theta.tail(theta.size() - 1);
  double loss = 0.0;
  Vector r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    loss += softplus(z(i)) - yi * z(i);
    r(i) = sigmoid(z(i)) - yi;
  }
  loss = loss / n + w.squaredNorm() / (2.0 * C * n);
  if (gradient) {
    gradient->resize(theta.size());
    (*gradient)(0) = r.sum() / n;
    gradient->tail(theta.size() - 1) = Z.transpose() * r / n + w / (C * n);
  }
  return loss;
}

void LogisticRegression::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t) {
  scaler_ = Standardizer::fit(X);
  const Matrix Z = scaler_.apply(X);
  const double C = spec().get("C");
  const auto n = static_cast<double>(Z.rows());
  const auto d = Z.cols();
  theta_ = Vector::Zero(d + 1);
  const double rate = static_cast<double>(stats::count_label(y, 1)) / n;
  theta_(0) = std::log(rate / (1.0 - rate));

  auto eval = [&](const Vector& th, Vector& g, Matrix& H) {
    const double f = objective(th, Z, y, C, &g);
    const Vector z = decision(th, Z);
    Vector s(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = sigmoid(z(i));
      s(i) = p * (1.0 - p) / n;
    }
    H = Matrix::Zero(d + 1, d + 1);
    H(0, 0) = s.sum() + 1e-12;
    H.block(1, 0, d, 1) = Z.transpose() * s;
    H.block(0, 1, 1, d) = H.block(1, 0, d, 1).transpose();
    H.block(1, 1, d, d) = Z.transpose() * s.asDiagonal() * Z;
    H.block(1, 1, d, d).diagonal().array() += 1.0 / (C * n);
    return f;
  };
  auto value = [&](const Vector& th) { return objective(th, Z, y, C); };
  newton_minimize(theta_, spec().options.lr_max_iter, eval, value, loss_history_);
}

Vector LogisticRegression::do_predict(const Matrix& X) const {
  const Vector z = decision(theta_, scaler_.apply(X));
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

void LogisticRegression::save_state(std::ostream& out) const {
  io::put(out, scaler_.mean);
  io::put(out, scaler_.scale);
  io::put(out, theta_);
}

void LogisticRegression::load_state(std::istream& in) {
  scaler_.mean = io::get_vector(in);
  scaler_.scale = io::get_vector(in);
  theta_ = io::get_vector(in);
  require(theta_.size() == scaler_.mean.size() + 1, "lr artifact: inconsistent sizes");
}

LinearSvm::LinearSvm(ClassifierSpec spec) : Classifier(std::move(spec)) {}

double LinearSvm::objective(const Vector& theta, const Matrix& Z, std::span<const int> y, double C,
                            Vector* gradient) {
  const Vector o = decision(theta, Z);
  const auto w = theta.tail(theta.size() - 1);
  double loss = 0.5 * w.squaredNorm();
  Vector coef = Vector::Zero(o.size());  // d loss / d o_i
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    const double r = 1.0 - s * o(i);
    if (r > 0) {
      loss += C * r * r;
      coef(i) = -2.0 * C * r * s;
    }
  }
  if (gradient) {
    gradient->resize(theta.size());
    (*gradient)(0) = coef.sum();
    gradient->tail(theta.size() - 1) = w + Z.transpose() * coef;
  }
  return loss;
}

Vector LinearSvm::margin(const Matrix& X) const { return decision(theta_, scaler_.apply(X)); }

void LinearSvm::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) {
  // gamma is part of the search box but has no role for a linear kernel.
  const double C = spec().get("C");
  const auto holdout = stats::stratified_holdout(y, spec().options.svm_calibration_fraction,
                                                 derive_seed(seed, "svm_calibration"));
  const Matrix X_fit = stats::take_rows(X, holdout.first);
  const Labels y_fit = stats::take(y, holdout.first);
  require(stats::count_label(y_fit, 1) > 0 && stats::count_label(y_fit, 0) > 0,
          "svm.fit: too few rows per class to hold out a calibration fold");
  scaler_ = Standardizer::fit(X_fit);
  const Matrix Z = scaler_.apply(X_fit);
  const auto d = Z.cols();
  theta_ = Vector::Zero(d + 1);

  auto eval = [&](const Vector& th, Vector& g, Matrix& H) {
    const double f = objective(th, Z, y_fit, C, &g);
    const Vector o = decision(th, Z);
    Vector s = Vector::Zero(o.size());
    for (Eigen::Index i = 0; i < o.size(); ++i) {
      const double sign = y_fit[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
      if (1.0 - sign * o(i) > 0) s(i) = 2.0 * C;
    }
    H = Matrix::Zero(d + 1, d + 1);
    H(0, 0) = s.sum() + 1e-10;
    H.block(1, 0, d, 1) = Z.transpose() * s;
    H.block(0, 1, 1, d) = H.block(1, 0, d, 1).transpose();
    H.block(1, 1, d, d) = Z.transpose() * s.asDiagonal() * Z;
    H.block(1, 1, d, d).diagonal().array() += 1.0;
    return f;
  };
  auto value = [&](const Vector& th) { return objective(th, Z, y_fit, C); };
  newton_minimize(theta_, spec().options.svm_max_iter, eval, value, loss_history_);

  const Vector m = margin(stats::take_rows(X, holdout.second));
  const auto scores = stats::to_std(m);
  const Labels y_cal = stats::take(y, holdout.second);
  std::tie(platt_a_, platt_b_) = fit_platt(scores, y_cal);
}

Vector LinearSvm::do_predict(const Matrix& X) const {
  const Vector m = margin(X);
  return m.unaryExpr([this](double v) { return sigmoid(platt_a_ * v + platt_b_); });
}

void LinearSvm::save_state(std::ostream& out) const {
  io::put(out, scaler_.mean);
  io::put(out, scaler_.scale);
  io::put(out, theta_);
  io::put(out, platt_a_);
  out << ' ';
  io::put(out, platt_b_);
}

void LinearSvm::load_state(std::istream& in) {
  scaler_.mean = io::get_vector(in);
  scaler_.scale = io::get_vector(in);
  theta_ = io::get_vector(in);
  platt_a_ = io::get_double(in);
  platt_b_ = io::get_double(in);
  require(theta_.size() == scaler_.mean.size() + 1, "svm artifact: inconsistent sizes");
}

std::pair<double, double> fit_platt(std::span<const double> scores, std::span<const int> y) {
  require(scores.size() == y.size() && !scores.empty(), "fit_platt: size mismatch");
  const double pos = static_cast<double>(stats::count_label(y, 1));
  const double neg = static_cast<double>(y.size()) - pos;
  const double hi = (pos + 1.0) / (pos + 2.0);
  const double lo = 1.0 / (neg + 2.0);
  auto loss = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = a * scores[i] + b;
      const double t = y[i] == 1 ? hi : lo;
      f += softplus(z) - t * z;
    }
    return f;
  };
  double a = 0.0;
  double b = std::log((pos + 1.0) / (neg + 1.0));
  double f = loss(a, b);
  for (int it = 0; it < 100; ++it) {
    double ga = 0, gb = 0, haa = 1e-12, hab = 0, hbb = 1e-12;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double p = sigmoid(a * scores[i] + b);
      const double t = y[i] == 1 ? hi : lo;
      const double w = p * (1.0 - p);
      ga += (p - t) * scores[i];
      gb += p - t;
      haa += w * scores[i] * scores[i];
      hab += w * scores[i];
      hbb += w;
    }
    if (std::max(std::abs(ga), std::abs(gb)) < 1e-10) break;
    const double det = haa * hbb - hab * hab;
    if (!(det > 0)) break;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(haa * gb - hab * ga) / det;
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 50; ++k) {
      const double f_new = loss(a + t * da, b + t * db);
      if (f_new <= f + 1e-4 * t * (ga * da + gb * db)) {
        a += t * da;
        b += t * db;
        f = f_new;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return {a, b};
}

}  // namespace gwe::learn
