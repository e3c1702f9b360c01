#include "gwe/blendnet.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace gwe;
using namespace gwe::blendnet;
using Catch::Approx;

namespace {

BlendNetConfig tiny_config() {
  BlendNetConfig c;
  c.layer_widths = {3, 2, 2};
  c.dropout_rate = 0.0;
  c.seed = 5;
  return c;
}

// Numerical gradient of net.loss in `mode`; `dropout_seed` replays one mask.
Vector numeric_gradient(BlendNet net, const Matrix& X, const Labels& y, BlendNet::Mode mode,
                        std::uint64_t dropout_seed = 0, bool dropout = false) {
  const Vector theta = net.parameters();
  Vector g(theta.size());
  const double h = 1e-6;
  auto at = [&](const Vector& t) {
    net.set_parameters(t);
    Rng rng(dropout_seed);
    return net.loss(X, y, mode, nullptr, dropout ? &rng : nullptr);
  };
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector a = theta, b = theta;
    a[i] += h;
    b[i] -= h;
    g[i] = (at(a) - at(b)) / (2 * h);
  }
  return g;
}

// Mean and biased variance of the first block's ReLU activations.
std::pair<Vector, Vector> first_block_stats(const BlendNet& net, const Matrix& X) {
  const Matrix A = ((X * net.weights[0]).rowwise() + net.biases[0].transpose()).cwiseMax(0.0);
  const Vector mean = A.colwise().mean();
  const Vector var = (A.rowwise() - mean.transpose()).array().square().colwise().mean();
  return {mean, var};
}

}  // namespace

TEST_CASE("architecture shapes and parameter count") {
  const auto net = BlendNet::build(4, BlendNetConfig{});
  REQUIRE(net.weights.size() == 4);
  CHECK(net.weights[0].rows() == 4);
  CHECK(net.weights[0].cols() == 128);
  CHECK(net.weights[1].rows() == 128);
  CHECK(net.weights[1].cols() == 64);
  CHECK(net.weights[3].cols() == 1);
  CHECK(net.bn_gamma.size() == 128);
  const std::size_t expected = 4 * 128 + 128 + 2 * 128 + 128 * 64 + 64 + 64 * 32 + 32 + 32 * 1 + 1;
  CHECK(net.parameter_count() == expected);
  CHECK(static_cast<std::size_t>(net.parameters().size()) == expected);
}

TEST_CASE("initialisation is seeded") {
  BlendNetConfig c;
  const auto a = BlendNet::build(6, c);
  const auto b = BlendNet::build(6, c);
  CHECK(a.parameters() == b.parameters());
  c.seed = 43;
  CHECK(BlendNet::build(6, c).parameters() != a.parameters());
  CHECK(a.running_mean.isZero());
  CHECK(a.running_var == Vector::Ones(128));
}

TEST_CASE("configuration preconditions") {
  BlendNetConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(BlendNet::build(3, c), Error);
  c = {};
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(BlendNet::build(3, c), Error);
  c = {};
  c.layer_widths = {8, 0};
  CHECK_THROWS_AS(BlendNet::build(3, c), Error);
  CHECK_THROWS_AS(BlendNet::build(0, BlendNetConfig{}), Error);
}

TEST_CASE("parameter vector round trip") {
  auto net = BlendNet::build(3, tiny_config());
  const Vector theta = Vector::Random(static_cast<Eigen::Index>(net.parameter_count()));
  net.set_parameters(theta);
  CHECK(net.parameters() == theta);
  CHECK_THROWS_AS(net.set_parameters(Vector::Zero(3)), Error);
}

TEST_CASE("analytic gradients match central differences") {
  const auto b = testing::make_blobs(12, 3, 1.0, 7);
  // zero biases put dead rows exactly on a ReLU kink; move every parameter off it
  auto off_kinks = [](BlendNet& n) {
    n.set_parameters(n.parameters() + 0.1 * Vector::Random(static_cast<Eigen::Index>(n.parameter_count())));
  };
  auto net = BlendNet::build(3, tiny_config());
  off_kinks(net);
  net.running_mean = Vector::Random(3) * 0.2;
  net.running_var = Vector::Constant(3, 0.5);

  SECTION("inference-mode batch norm") {
    Vector g;
    net.loss(b.X, b.y, BlendNet::Mode::inference, &g);
    CHECK(testing::relative_error(g, numeric_gradient(net, b.X, b.y, BlendNet::Mode::inference)) < 1e-4);
  }
  SECTION("training-mode batch statistics") {
    Vector g;
    net.loss(b.X, b.y, BlendNet::Mode::training, &g);
    CHECK(testing::relative_error(g, numeric_gradient(net, b.X, b.y, BlendNet::Mode::training)) < 1e-4);
  }
  SECTION("with a fixed dropout mask") {
    auto c = tiny_config();
    c.dropout_rate = 0.3;
    auto dnet = BlendNet::build(3, c);
    off_kinks(dnet);
    Rng rng(99);
    Vector g;
    dnet.loss(b.X, b.y, BlendNet::Mode::training, &g, &rng);
    CHECK(testing::relative_error(g, numeric_gradient(dnet, b.X, b.y, BlendNet::Mode::training, 99, true)) < 1e-4);
  }
}

TEST_CASE("hand-computed forward pass of a width-1 net") {
  BlendNetConfig c;
  c.layer_widths = {1};
  auto net = BlendNet::build(1, c);
  net.weights[0](0, 0) = 2.0;
  net.biases[0](0) = 0.5;
  net.bn_gamma(0) = 1.5;
  net.bn_beta(0) = -0.2;
  net.running_mean(0) = 1.0;
  net.running_var(0) = 4.0;
  net.weights[1](0, 0) = 0.7;
  net.biases[1](0) = -0.1;
  Matrix X(2, 1);
  X << 0.3, -1.0;
  const double h = std::max(0.0, 2.0 * 0.3 + 0.5);
  const double bn = 1.5 * (h - 1.0) / std::sqrt(4.0 + c.bn_epsilon) - 0.2;
  const double p0 = 1.0 / (1.0 + std::exp(-(0.7 * bn - 0.1)));
  // x = -1 is cut by the ReLU
  const double bn1 = 1.5 * (0.0 - 1.0) / std::sqrt(4.0 + c.bn_epsilon) - 0.2;
  const double p1 = 1.0 / (1.0 + std::exp(-(0.7 * bn1 - 0.1)));
  const Vector p = net.predict_proba(X);
  CHECK(p[0] == Approx(p0).epsilon(1e-14));
  CHECK(p[1] == Approx(p1).epsilon(1e-14));
  CHECK(net.loss(X, Labels{1, 0}, BlendNet::Mode::inference) ==
        Approx(-(std::log(p0) + std::log(1 - p1)) / 2).epsilon(1e-14));
}

TEST_CASE("training batch norm agrees with inference on frozen statistics") {
  const auto b = testing::make_blobs(40, 3, 1.0, 8);
  auto c = tiny_config();
  c.layer_widths = {6, 4};
  auto net = BlendNet::build(3, c);
  const auto [mean, var] = first_block_stats(net, b.X);
  net.running_mean = mean;
  net.running_var = var;
  CHECK(net.loss(b.X, b.y, BlendNet::Mode::training) ==
        Approx(net.loss(b.X, b.y, BlendNet::Mode::inference)).margin(1e-6));
}

TEST_CASE("separable meta features are learned") {
  const auto b = testing::make_blobs(400, 2, 4.0, 9);
  BlendNetConfig c;
  c.batch_size = 200;
  c.epochs = 30;
  auto net = BlendNet::build(2, c);
  net.train(b.X, b.y);
  const auto labels = net.classify(b.X);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == b.y[i];
  CHECK(static_cast<double>(hit) / 400.0 >= 0.95);

  const auto& h = net.history();
  REQUIRE(h.size() == 30);
  CHECK(h[0].epoch == 1);
  CHECK(std::isnan(h[0].validation_loss));
  std::vector<double> smooth;
  for (std::size_t e = 4; e < h.size(); ++e)
    smooth.push_back((h[e].loss + h[e - 1].loss + h[e - 2].loss + h[e - 3].loss + h[e - 4].loss) / 5);
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1] + 1e-3);
  CHECK(h.back().loss < h.front().loss);

  const Vector p = net.predict_proba(b.X);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);
  CHECK(net.predict_proba(b.X) == p);
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(labels[static_cast<std::size_t>(i)] == (p[i] >= 0.5 ? 1 : 0));
  CHECK_THROWS_AS(net.predict_proba(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("constant labels drive the loss toward zero") {
  const auto b = testing::make_blobs(100, 3, 0.0, 10);
  BlendNetConfig c;
  c.batch_size = 32;
  c.epochs = 20;
  auto net = BlendNet::build(3, c);
  net.train(b.X, Labels(100, 1));
  CHECK(net.history().back().loss < 0.05);
  CHECK(net.history().back().loss < net.history().front().loss);
  CHECK(net.predict_proba(b.X).minCoeff() > 0.9);
}

TEST_CASE("validation loss is recorded and training is seeded") {
  const auto b = testing::make_blobs(150, 3, 1.0, 11);
  const auto v = testing::make_blobs(50, 3, 1.0, 12);
  BlendNetConfig c;
  c.batch_size = 32;
  c.epochs = 5;
  auto a = BlendNet::build(3, c);
  a.train(b.X, b.y, &v.X, v.y);
  CHECK(std::isfinite(a.history().back().validation_loss));
  CHECK(a.history().back().validation_loss == Approx(a.loss(v.X, v.y, BlendNet::Mode::inference)));
  auto again = BlendNet::build(3, c);
  again.train(b.X, b.y, &v.X, v.y);
  CHECK(again.predict_proba(v.X) == a.predict_proba(v.X));

  Labels bad = b.y;
  bad[0] = 3;
  CHECK_THROWS_AS(a.train(b.X, bad), Error);
}

TEST_CASE("artifact round trip") {
  const auto b = testing::make_blobs(80, 4, 1.0, 13);
  BlendNetConfig c;
  c.layer_widths = {16, 8};
  c.epochs = 3;
  c.batch_size = 16;
  auto net = BlendNet::build(4, c);
  net.train(b.X, b.y);
  std::stringstream s;
  net.save(s);
  const auto back = BlendNet::load(s);
  CHECK(back.predict_proba(b.X) == net.predict_proba(b.X));
  CHECK(back.config().layer_widths == c.layer_widths);
  CHECK(back.input_dim() == 4);
  std::stringstream junk("gwe-blendnet 999");
  CHECK_THROWS_AS(BlendNet::load(junk), Error);
}
