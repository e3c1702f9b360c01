#pragma once

#include "gwe/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gwe::blendnet {

struct BlendNetConfig {
  std::vector<int> layer_widths = {128, 64, 32};
  double dropout_rate = 0.3;
  int epochs = 50;
  int batch_size = 512;
  double learning_rate = 1e-3;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  std::uint64_t seed = 42;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean training cross-entropy over the epoch's batches
  double validation_loss = 0.0;  // NaN without a validation set
};

// dense(w1)+ReLU -> batch norm -> dropout -> dense(w2)+ReLU -> ... ->
// dense(1)+sigmoid. Batch norm and dropout follow the first block only.
class BlendNet {
 public:
  static BlendNet build(int input_dim, const BlendNetConfig& config);

  int input_dim() const { return input_dim_; }
  const BlendNetConfig& config() const { return config_; }
  const std::vector<EpochRecord>& history() const { return history_; }

  // weights[l] is fan_in x fan_out.
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Vector bn_gamma;
  Vector bn_beta;
  Vector running_mean;
  Vector running_var;

  std::size_t parameter_count() const;  // trainable entries only
  Vector parameters() const;
  void set_parameters(const Vector& theta);

  enum class Mode { inference, training };
  // Mean binary cross-entropy. Training mode normalises with batch
  // statistics and, when `dropout_rng` is given, applies inverted dropout.
  // The gradient is w.r.t. parameters() order.
  double loss(const Matrix& X, std::span<const int> y, Mode mode, Vector* gradient = nullptr,
              Rng* dropout_rng = nullptr) const;

  // Adam on mini-batches in a seeded order; running batch-norm statistics
  // are updated from every training batch.
  void train(const Matrix& X, std::span<const int> y, const Matrix* X_val = nullptr,
             std::span<const int> y_val = {});

  Vector predict_proba(const Matrix& X) const;
  Labels classify(const Matrix& X) const;

  void save(std::ostream& out) const;
  static BlendNet load(std::istream& in);

 private:
  int input_dim_ = 0;
  BlendNetConfig config_;
  std::vector<EpochRecord> history_;
};

void save_blendnet(const std::string& path, const BlendNet& net);
BlendNet load_blendnet(const std::string& path);

}  // namespace gwe::blendnet
