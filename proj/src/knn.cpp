#include "gwe/learners.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace gwe::learn {

KNearestNeighbors::KNearestNeighbors(ClassifierSpec spec) : Classifier(std::move(spec)) {}

void KNearestNeighbors::do_fit(const Matrix& X, std::span<const int> y, std::uint64_t) {
  X_ = X;
  y_.assign(y.begin(), y.end());
}

Vector KNearestNeighbors::do_predict(const Matrix& X) const {
  const auto n = static_cast<std::size_t>(X_.rows());
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(spec().get_int("n_neighbors")), n);
  Vector out(X.rows());
  std::vector<double> dist(n);
  std::vector<double> scratch(n);
  const Matrix Xt = X_.transpose();  // column per training row for contiguous access
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Vector q = X.row(i).transpose();
    for (std::size_t r = 0; r < n; ++r) dist[r] = (Xt.col(static_cast<Eigen::Index>(r)) - q).squaredNorm();
    scratch = dist;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    const double kth = scratch[k - 1];
    std::size_t votes = 0;
    std::size_t pos = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (dist[r] <= kth) {
        ++votes;
        pos += static_cast<std::size_t>(y_[r]);
      }
    }
    out(i) = static_cast<double>(pos) / static_cast<double>(votes);
  }
  return out;
}

void KNearestNeighbors::save_state(std::ostream& out) const {
  io::put(out, X_);
  out << y_.size();
  for (int v : y_) out << ' ' << v;
  out << '\n';
}

void KNearestNeighbors::load_state(std::istream& in) {
  X_ = io::get_matrix(in);
  const auto n = io::get_int(in);
  require(n == X_.rows(), "knn artifact: inconsistent sizes");
  y_.resize(static_cast<std::size_t>(n));
  for (auto& v : y_) v = static_cast<int>(io::get_int(in));
}

}  // namespace gwe::learn
