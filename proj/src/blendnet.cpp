#include "gwe/blendnet.hpp"

#include "gwe/learners.hpp"
#include "gwe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace gwe::blendnet {

namespace {

constexpr int kFormatVersion = 1;

struct BatchStats {
  Vector mean;
  Vector var;
};

}  // namespace

void BlendNetConfig::validate() const {
  require(!layer_widths.empty(), "blendnet: at least one hidden layer is required");
  for (int w : layer_widths) require(w >= 1, "blendnet: layer widths must be positive");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "blendnet: dropout_rate must be in [0, 1)");
  require(epochs >= 1, "blendnet: epochs must be >= 1");
  require(batch_size >= 1, "blendnet: batch_size must be >= 1");
  require(learning_rate > 0.0, "blendnet: learning_rate must be positive");
  require(bn_momentum >= 0.0 && bn_momentum < 1.0, "blendnet: bn_momentum must be in [0, 1)");
  require(bn_epsilon > 0.0, "blendnet: bn_epsilon must be positive");
}

BlendNet BlendNet::build(int input_dim, const BlendNetConfig& config) {
  require(input_dim >= 1, "blendnet: input dimension must be >= 1");
  config.validate();
  BlendNet net;
  net.input_dim_ = input_dim;
  net.config_ = config;
  Rng rng(derive_seed(config.seed, "blendnet_init"));
  std::vector<int> dims = {input_dim};
  dims.insert(dims.end(), config.layer_widths.begin(), config.layer_widths.end());
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / dims[l]);
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix W(dims[l], dims[l + 1]);
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = u(rng);
    net.weights.push_back(std::move(W));
    net.biases.push_back(Vector::Zero(dims[l + 1]));
  }
  const int first = config.layer_widths.front();
  net.bn_gamma = Vector::Ones(first);
  net.bn_beta = Vector::Zero(first);
  net.running_mean = Vector::Zero(first);
  net.running_var = Vector::Ones(first);
  return net;
}

std::size_t BlendNet::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(bn_gamma.size() + bn_beta.size());
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

Vector BlendNet::parameters() const {
  Vector theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  auto put = [&](const auto& m) {
    theta.segment(k, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    k += m.size();
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    put(weights[l]);
    put(biases[l]);
    if (l == 0) {
      put(bn_gamma);
      put(bn_beta);
    }
  }
  return theta;
}

void BlendNet::set_parameters(const Vector& theta) {
  require(static_cast<std::size_t>(theta.size()) == parameter_count(), "blendnet: parameter count mismatch");
  Eigen::Index k = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Vector>(m.data(), m.size()) = theta.segment(k, m.size());
    k += m.size();
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    take(weights[l]);
    take(biases[l]);
    if (l == 0) {
      take(bn_gamma);
      take(bn_beta);
    }
  }
}

namespace {

double forward_backward(const BlendNet& net, const Matrix& X, std::span<const int> y, BlendNet::Mode mode,
                        Vector* gradient, Rng* dropout_rng, BatchStats* stats_out, Vector* probs_out) {
  const auto n = static_cast<double>(X.rows());
  const auto L = net.weights.size();  // >= 2; index L - 1 is the output layer
  const double eps = net.config().bn_epsilon;
  const bool training = mode == BlendNet::Mode::training;

  const Matrix Z0 = (X * net.weights[0]).rowwise() + net.biases[0].transpose();
  const Matrix A0 = Z0.cwiseMax(0.0);
  Vector mu, var;
  if (training) {
    mu = A0.colwise().mean().transpose();
    var = (A0.rowwise() - mu.transpose()).array().square().colwise().mean().transpose();
  } else {
    mu = net.running_mean;
    var = net.running_var;
  }
  const Vector inv_std = (var.array() + eps).rsqrt();
  const Matrix xhat = ((A0.rowwise() - mu.transpose()).array().rowwise() * inv_std.transpose().array()).matrix();
  const Matrix B = ((xhat.array().rowwise() * net.bn_gamma.transpose().array()).rowwise() +
                    net.bn_beta.transpose().array())
                       .matrix();
  Matrix mask;
  const double rate = net.config().dropout_rate;
  const bool dropout = training && dropout_rng != nullptr && rate > 0.0;
  if (dropout) {
    std::bernoulli_distribution keep(1.0 - rate);
    mask = Matrix(B.rows(), B.cols());
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(*dropout_rng) ? 1.0 / (1.0 - rate) : 0.0;
  }
  std::vector<Matrix> H(L);  // H[l] is the input of layer l
  std::vector<Matrix> Z(L);
  H[1] = dropout ? Matrix(B.cwiseProduct(mask)) : B;
  for (std::size_t l = 1; l + 1 < L; ++l) {
    Z[l] = (H[l] * net.weights[l]).rowwise() + net.biases[l].transpose();
    H[l + 1] = Z[l].cwiseMax(0.0);
  }
  const Matrix& last = H[L - 1];
  const Vector o = ((last * net.weights[L - 1]).rowwise() + net.biases[L - 1].transpose()).col(0);

  double loss = 0.0;
  Vector dout(o.size());
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    const double yi = y.empty() ? 0.0 : y[static_cast<std::size_t>(i)];
    loss += learn::softplus(o(i)) - yi * o(i);
    dout(i) = (learn::sigmoid(o(i)) - yi) / n;
  }
  loss /= n;
  if (stats_out) *stats_out = {mu, var};
  if (probs_out) *probs_out = o.unaryExpr([](double v) { return learn::sigmoid(v); });
  if (!gradient) return loss;

  std::vector<Matrix> dW(L);
  std::vector<Vector> db(L);
  Matrix dH = dout;  // gradient w.r.t. the output of the layer below, n x 1
  dW[L - 1] = last.transpose() * dout;
  db[L - 1] = Vector::Constant(1, dout.sum());
  dH = dout * net.weights[L - 1].transpose();
  for (std::size_t l = L - 2; l >= 1 && l < L; --l) {
    const Matrix dZ = dH.cwiseProduct((Z[l].array() > 0.0).cast<double>().matrix());
    dW[l] = H[l].transpose() * dZ;
    db[l] = dZ.colwise().sum().transpose();
    dH = dZ * net.weights[l].transpose();
  }
  const Matrix dB = dropout ? Matrix(dH.cwiseProduct(mask)) : dH;
  const Vector dgamma = dB.cwiseProduct(xhat).colwise().sum().transpose();
  const Vector dbeta = dB.colwise().sum().transpose();
  const Matrix dxhat = (dB.array().rowwise() * net.bn_gamma.transpose().array()).matrix();
  Matrix dA0;
  if (training) {
    const Eigen::RowVectorXd s1 = dxhat.colwise().sum();
    const Eigen::RowVectorXd s2 = dxhat.cwiseProduct(xhat).colwise().sum();
    const Matrix inner = (n * dxhat).rowwise() - s1;
    const Matrix corr = (xhat.array().rowwise() * s2.array()).matrix();
    dA0 = (((inner - corr) / n).array().rowwise() * inv_std.transpose().array()).matrix();
  } else {
    dA0 = (dxhat.array().rowwise() * inv_std.transpose().array()).matrix();
  }
  const Matrix dZ0 = dA0.cwiseProduct((Z0.array() > 0.0).cast<double>().matrix());
  dW[0] = X.transpose() * dZ0;
  db[0] = dZ0.colwise().sum().transpose();

  gradient->resize(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index k = 0;
  auto put = [&](const auto& m) {
    gradient->segment(k, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    k += m.size();
  };
  for (std::size_t l = 0; l < L; ++l) {
    put(dW[l]);
    put(db[l]);
    if (l == 0) {
      put(dgamma);
      put(dbeta);
    }
  }
  return loss;
}

}  // namespace

double BlendNet::loss(const Matrix& X, std::span<const int> y, Mode mode, Vector* gradient, Rng* dropout_rng) const {
  require(X.cols() == input_dim_, "blendnet: expected " + std::to_string(input_dim_) + " input columns, got " +
                                      std::to_string(X.cols()));
  require(static_cast<std::size_t>(X.rows()) == y.size() && X.rows() >= 1, "blendnet: row count mismatch");
  return forward_backward(*this, X, y, mode, gradient, dropout_rng, nullptr, nullptr);
}

void BlendNet::train(const Matrix& X, std::span<const int> y, const Matrix* X_val, std::span<const int> y_val) {
  require(X.cols() == input_dim_, "blendnet.train: input dimension mismatch");
  require(static_cast<std::size_t>(X.rows()) == y.size() && X.rows() >= 1, "blendnet.train: row count mismatch");
  for (int v : y) require(v == 0 || v == 1, "blendnet.train: labels must be 0 or 1");
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) require(std::isfinite(X(i, j)), "blendnet.train: non-finite input");
  if (X_val) require(static_cast<std::size_t>(X_val->rows()) == y_val.size(), "blendnet.train: validation size mismatch");

  const auto n = static_cast<std::size_t>(X.rows());
  const auto batch = std::min(n, static_cast<std::size_t>(config_.batch_size));
  Rng order_rng(derive_seed(config_.seed, "blendnet_order"));
  Rng dropout_rng(derive_seed(config_.seed, "blendnet_dropout"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Vector theta = parameters();
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-7;
  long t = 0;
  Vector grad;
  BatchStats stats;
  history_.clear();
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const auto stop = std::min(n, start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix Xb = stats::take_rows(X, idx);
      const Labels yb = stats::take(y, idx);
      const double l = forward_backward(*this, Xb, yb, Mode::training, &grad, &dropout_rng, &stats, nullptr);
      if (!std::isfinite(l))
        throw Error("blendnet.train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                    std::to_string(start));
      total += l * static_cast<double>(stop - start);
      ++t;
      m = beta1 * m + (1 - beta1) * grad;
      v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      theta -= (config_.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + adam_eps)).matrix();
      set_parameters(theta);
      const double mom = config_.bn_momentum;
      running_mean = mom * running_mean + (1 - mom) * stats.mean;
      running_var = mom * running_var + (1 - mom) * stats.var;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / static_cast<double>(n);
    rec.validation_loss = std::numeric_limits<double>::quiet_NaN();
    if (X_val && X_val->rows() > 0) rec.validation_loss = loss(*X_val, y_val, Mode::inference);
    history_.push_back(rec);
  }
}

Vector BlendNet::predict_proba(const Matrix& X) const {
  require(X.cols() == input_dim_, "blendnet: expected " + std::to_string(input_dim_) + " input columns, got " +
                                      std::to_string(X.cols()));
  Vector p;
  forward_backward(*this, X, {}, Mode::inference, nullptr, nullptr, nullptr, &p);
  return p;
}

Labels BlendNet::classify(const Matrix& X) const {
  const Vector p = predict_proba(X);
  Labels out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) >= 0.5 ? 1 : 0;
  return out;
}

void BlendNet::save(std::ostream& out) const {
  using learn::io::put;
  out << "gwe-blendnet " << kFormatVersion << '\n';
  out << "widths " << config_.layer_widths.size();
  for (int w : config_.layer_widths) out << ' ' << w;
  out << "\ndropout ";
  put(out, config_.dropout_rate);
  out << "\nepochs " << config_.epochs << "\nbatch_size " << config_.batch_size << "\nlearning_rate ";
  put(out, config_.learning_rate);
  out << "\nbn_momentum ";
  put(out, config_.bn_momentum);
  out << "\nbn_epsilon ";
  put(out, config_.bn_epsilon);
  out << "\nseed " << config_.seed << "\ninput_dim " << input_dim_ << '\n';
  for (std::size_t l = 0; l < weights.size(); ++l) {
    put(out, weights[l]);
    put(out, biases[l]);
  }
  put(out, bn_gamma);
  put(out, bn_beta);
  put(out, running_mean);
  put(out, running_var);
  out << "history " << history_.size() << '\n';
  for (const auto& r : history_) {
    out << r.epoch << ' ';
    put(out, r.loss);
    out << ' ';
    put(out, r.validation_loss);
    out << '\n';
  }
  out << "end\n";
}

BlendNet BlendNet::load(std::istream& in) {
  namespace io = learn::io;
  io::expect(in, "gwe-blendnet");
  require(io::get_int(in) == kFormatVersion, "blendnet artifact: unsupported version");
  BlendNetConfig c;
  io::expect(in, "widths");
  c.layer_widths.resize(static_cast<std::size_t>(io::get_int(in)));
  for (auto& w : c.layer_widths) w = static_cast<int>(io::get_int(in));
  io::expect(in, "dropout");
  c.dropout_rate = io::get_double(in);
  io::expect(in, "epochs");
  c.epochs = static_cast<int>(io::get_int(in));
  io::expect(in, "batch_size");
  c.batch_size = static_cast<int>(io::get_int(in));
  io::expect(in, "learning_rate");
  c.learning_rate = io::get_double(in);
  io::expect(in, "bn_momentum");
  c.bn_momentum = io::get_double(in);
  io::expect(in, "bn_epsilon");
  c.bn_epsilon = io::get_double(in);
  io::expect(in, "seed");
  c.seed = std::stoull(io::get_token(in));
  io::expect(in, "input_dim");
  const int d = static_cast<int>(io::get_int(in));
  BlendNet net = build(d, c);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix W = io::get_matrix(in);
    Vector b = io::get_vector(in);
    require(W.rows() == net.weights[l].rows() && W.cols() == net.weights[l].cols() && b.size() == net.biases[l].size(),
            "blendnet artifact: layer shape mismatch");
    net.weights[l] = std::move(W);
    net.biases[l] = std::move(b);
  }
  net.bn_gamma = io::get_vector(in);
  net.bn_beta = io::get_vector(in);
  net.running_mean = io::get_vector(in);
  net.running_var = io::get_vector(in);
  require(net.bn_gamma.size() == c.layer_widths.front() && net.bn_beta.size() == c.layer_widths.front() &&
              net.running_mean.size() == c.layer_widths.front() && net.running_var.size() == c.layer_widths.front(),
          "blendnet artifact: batch-norm shape mismatch");
  io::expect(in, "history");
  net.history_.resize(static_cast<std::size_t>(io::get_int(in)));
  for (auto& r : net.history_) {
    r.epoch = static_cast<int>(io::get_int(in));
    r.loss = io::get_double(in);
    r.validation_loss = io::get_double(in);
  }
  io::expect(in, "end");
  return net;
}

void save_blendnet(const std::string& path, const BlendNet& net) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write blendnet file " + path);
  net.save(out);
}

BlendNet load_blendnet(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read blendnet file " + path);
  return BlendNet::load(in);
}

}  // namespace gwe::blendnet
