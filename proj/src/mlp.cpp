#include "gwe/learners.hpp"
#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace gwe::learn {

Vector MlpNetwork::forward(const Matrix& Z) const {
  const Matrix A = ((Z * W1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
  const Vector o = (A * w2).array() + b2;
  return o.unaryExpr([](double v) { return sigmoid(v); });
}

double MlpNetwork::loss(const Matrix& Z, std::span<const int> y, double alpha, Gradient* gradient) const {
  const auto n = static_cast<double>(Z.rows());
  const Matrix pre = (Z * W1.transpose()).rowwise() + b1.transpose();
  const Matrix A = pre.cwiseMax(0.0);
  const Vector o = (A * w2).array() + b2;
  double data = 0.0;
  Vector delta(o.size());
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    data += softplus(o(i)) - yi * o(i);
    delta(i) = (sigmoid(o(i)) - yi) / n;
  }
  const double penalty = alpha / (2.0 * n) * (W1.squaredNorm() + w2.squaredNorm());
  if (gradient) {
    gradient->w2 = A.transpose() * delta + (alpha / n) * w2;
    gradient->b2 = delta.sum();
    Matrix dpre = delta * w2.transpose();
    dpre.array() *= (pre.array() > 0.0).cast<double>();
    gradient->W1 = dpre.transpose() * Z + (alpha / n) * W1;
    gradient->b1 = dpre.colwise().sum().transpose();
  }
  return data / n + penalty;
}

MultilayerPerceptron::MultilayerPerceptron(ClassifierSpec spec) : Classifier(std::move(spec)) {}

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  MlpNetwork::Gradient m, v;

  void reset(const MlpNetwork& net) {
    t = 0;
    m = {Matrix::Zero(net.W1.rows(), net.W1.cols()), Vector::Zero(net.b1.size()), Vector::Zero(net.w2.size()), 0.0};
    v = m;
  }

  template <class P, class G, class S>
  void update(P& param, const G& grad, S& m1, S& m2, double c1, double c2) {
    m1 = beta1 * m1 + (1 - beta1) * grad;
    m2 = beta2 * m2 + (1 - beta2) * grad.cwiseProduct(grad);
    param -= (lr * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
  }

  void step(MlpNetwork& net, const MlpNetwork::Gradient& g) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    update(net.W1, g.W1, m.W1, v.W1, c1, c2);
    update(net.b1, g.b1, m.b1, v.b1, c1, c2);
    update(net.w2, g.w2, m.w2, v.w2, c1, c2);
    m.b2 = beta1 * m.b2 + (1 - beta1) * g.b2;
    v.b2 = beta2 * v.b2 + (1 - beta2) * g.b2 * g.b2;
    net.b2 -= lr * (m.b2 / c1) / (std::sqrt(v.b2 / c2) + eps);
  }
};

}  // namespace

void MultilayerPerceptron::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t seed) {
  const int hidden = spec().get_int("hidden_layer_sizes");
  const double alpha = spec().get("alpha");
  const auto& opt = spec().options;
  scaler_ = Standardizer::fit(X);
  const Matrix Z = scaler_.apply(X);
  const auto n = static_cast<std::size_t>(Z.rows());
  const auto d = Z.cols();

  Rng rng(derive_seed(seed, "mlp"));
  const double r1 = std::sqrt(6.0 / static_cast<double>(d));
  const double r2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  net_.W1 = Matrix(hidden, d);
  for (Eigen::Index i = 0; i < net_.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) net_.W1(i, j) = u1(rng);
  net_.b1 = Vector::Zero(hidden);
  net_.w2 = Vector(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) net_.w2(i) = u2(rng);
  const double rate = static_cast<double>(stats::count_label(y, 1)) / static_cast<double>(n);
  net_.b2 = std::log(rate / (1.0 - rate));

  Adam adam{opt.mlp_learning_rate};
  adam.reset(net_);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = std::min<std::size_t>(static_cast<std::size_t>(opt.mlp_batch_size), n);
  double best = net_.loss(Z, y, alpha);
  loss_history_.push_back(best);
  MlpNetwork::Gradient grad;
  // An epoch that raises the full-data loss is rolled back and the step
  // size halved, so the recorded loss never increases.
  for (int epoch = 0; epoch < opt.mlp_epochs; ++epoch) {
    const MlpNetwork saved = net_;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const auto stop = std::min(n, start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix Zb = stats::take_rows(Z, idx);
      const Labels yb = stats::take(y, idx);
      net_.loss(Zb, yb, alpha, &grad);
      adam.step(net_, grad);
    }
    const double current = net_.loss(Z, y, alpha);
    if (!(current <= best)) {
      net_ = saved;
      adam.lr *= 0.5;
      adam.reset(net_);
      loss_history_.push_back(best);
    } else {
      best = current;
      loss_history_.push_back(current);
    }
  }
}

Vector MultilayerPerceptron::do_predict(const Matrix& X) const { return net_.forward(scaler_.apply(X)); }

void MultilayerPerceptron::save_state(std::ostream& out) const {
  io::put(out, scaler_.mean);
  io::put(out, scaler_.scale);
  io::put(out, net_.W1);
  io::put(out, net_.b1);
  io::put(out, net_.w2);
  io::put(out, net_.b2);
}

void MultilayerPerceptron::load_state(std::istream& in) {
  scaler_.mean = io::get_vector(in);
  scaler_.scale = io::get_vector(in);
  net_.W1 = io::get_matrix(in);
  net_.b1 = io::get_vector(in);
  net_.w2 = io::get_vector(in);
  net_.b2 = io::get_double(in);
  require(net_.W1.cols() == scaler_.mean.size() && net_.W1.rows() == net_.b1.size() &&
              net_.w2.size() == net_.b1.size(),
          "mlp artifact: inconsistent sizes");
}

}  // namespace gwe::learn
