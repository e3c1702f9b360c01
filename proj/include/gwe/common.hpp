#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gwe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;
using Rng = std::mt19937_64;

// Every failure raised by the library. The message names the offending
// input (row, column, stage, ...) so callers can surface it unchanged.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(std::string_view)>;

// Non-fatal diagnostics (0/0 metrics, constant columns, ...) go through a
// process-wide sink. Default writes to stderr.
void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

// Derive an independent stream seed from a master seed and a tag, so that
// adding a consumer never shifts the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed, std::string_view tag) {
  return Rng(derive_seed(seed, tag));
}

void require(bool condition, std::string_view message);

}  // namespace gwe
