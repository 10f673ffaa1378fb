#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace prescript {

// Sparse nonnegative weights over the n training rows, summing to one.
struct WeightVector {
  std::size_t n = 0;
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> weight;

  [[nodiscard]] std::size_t nonzeros() const { return index.size(); }

  [[nodiscard]] double sum() const {
    double s = 0.0;
    for (double w : weight) s += w;
    return s;
  }
  [[nodiscard]] double sum_squares() const {
    double s = 0.0;
    for (double w : weight) s += w * w;
    return s;
  }
  [[nodiscard]] double max() const { return weight.empty() ? 0.0 : *std::max_element(weight.begin(), weight.end()); }
  [[nodiscard]] double min() const { return weight.empty() ? 0.0 : *std::min_element(weight.begin(), weight.end()); }

  [[nodiscard]] Eigen::VectorXd dense() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < index.size(); ++k) v[index[k]] = weight[k];
    return v;
  }

  [[nodiscard]] double at(std::size_t i) const {
    auto it = std::lower_bound(index.begin(), index.end(), static_cast<std::uint32_t>(i));
    if (it == index.end() || *it != i) return 0.0;
    return weight[static_cast<std::size_t>(it - index.begin())];
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

// Dense scratch buffer for summing many sparse contributions; reset cost is
// proportional to the touched entries, not n.
class WeightAccumulator {
 public:
  explicit WeightAccumulator(std::size_t n = 0) : buffer_(n, 0.0) {}

  void resize(std::size_t n) {
    buffer_.assign(n, 0.0);
    touched_.clear();
  }
  void add(std::uint32_t i, double w) {
    if (buffer_[i] == 0.0) touched_.push_back(i);
    buffer_[i] += w;
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (auto i : touched_) fn(i, buffer_[i]);
  }
  void clear() {
    for (auto i : touched_) buffer_[i] = 0.0;
    touched_.clear();
  }
  [[nodiscard]] WeightVector to_weights() {
    std::sort(touched_.begin(), touched_.end());
    WeightVector w;
    w.n = buffer_.size();
    w.index = touched_;
    w.weight.reserve(touched_.size());
    for (auto i : touched_) w.weight.push_back(buffer_[i]);
    return w;
  }

 private:
  std::vector<double> buffer_;
  std::vector<std::uint32_t> touched_;
};

}  // namespace prescript
