#pragma once

#include "gwe/common.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace gwe::testing {

// Two Gaussian blobs in d dimensions; the first `informative` columns carry
// a mean shift of `separation` for class 1.
struct Blobs {
  Matrix X;
  Labels y;
};

inline Blobs make_blobs(std::size_t n, int d, double separation, std::uint64_t seed, double positive_rate = 0.5,
                        int informative = -1) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(positive_rate);
  if (informative < 0) informative = d;
  Blobs b{Matrix(static_cast<Eigen::Index>(n), d), Labels(n)};
  for (std::size_t i = 0; i < n; ++i) {
    b.y[i] = coin(rng) ? 1 : 0;
    for (int j = 0; j < d; ++j)
      b.X(static_cast<Eigen::Index>(i), j) = gauss(rng) + (j < informative && b.y[i] == 1 ? separation : 0.0);
  }
  b.y[0] = 0;
  b.y[1] = 1;
  return b;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("gwe_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Silences the warning sink for the lifetime of the guard.
class QuietWarnings {
 public:
  QuietWarnings() : previous_(set_warning_sink([this](std::string_view m) { messages.emplace_back(m); })) {}
  ~QuietWarnings() { set_warning_sink(previous_); }
  std::vector<std::string> messages;

 private:
  WarningSink previous_;
};

}  // namespace gwe::testing
