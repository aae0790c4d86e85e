#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cgp {

/// Fenwick (binary indexed) tree over non-negative weights supporting
/// append, point update and inverse-prefix search in O(log n).
///
/// Floating-point drift in the partial sums is bounded by rebuilding the
/// tree from the exact weights every `rebuild_period` updates.
class WeightedSampler {
public:
  explicit WeightedSampler(std::uint64_t rebuild_period = std::uint64_t{1} << 20)
      : rebuild_period_(rebuild_period) {}

  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  double total() const { return total_; }

  void reserve(std::size_t n) {
    weights_.reserve(n);
    tree_.reserve(n + 1);
  }

  void clear() {
    weights_.clear();
    tree_.assign(1, 0.0);
    total_ = 0.0;
    updates_ = 0;
  }

  /// Appends a new item and returns its index.
  std::size_t push_back(double w) {
    if (tree_.empty()) tree_.push_back(0.0);
    weights_.push_back(w);
    const std::size_t i = weights_.size();  // 1-based node
    // node i covers (i - lowbit(i), i]
    const std::size_t low = i - (i & (~i + 1));
    double node = w;
    for (std::size_t j = i - 1; j > low; j -= j & (~j + 1)) node += tree_[j];
    tree_.push_back(node);
    total_ += w;
    tick();
    return i - 1;
  }

  void add(std::size_t idx, double delta) {
    weights_[idx] += delta;
    for (std::size_t j = idx + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
    total_ += delta;
    tick();
  }

  void set(std::size_t idx, double w) { add(idx, w - weights_[idx]); }

  /// Sum of weights [0, idx).
  double prefix(std::size_t idx) const {
    double s = 0.0;
    for (std::size_t j = idx; j > 0; j -= j & (~j + 1)) s += tree_[j];
    return s;
  }

  /// Smallest index i with prefix(i + 1) > u, for u in [0, total()).
  /// Values of u at or beyond the stored total map to the last positive item.
  std::size_t find(double u) const {
    const std::size_t n = weights_.size();
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 <= n) step *= 2;
    for (; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next <= n && tree_[next] <= u) {
        pos = next;
        u -= tree_[next];
      }
    }
    // zero-weight items can be landed on through rounding
    while (pos < n && weights_[pos] <= 0.0) ++pos;
    if (pos < n) return pos;
    pos = n;
    while (pos > 0 && weights_[pos - 1] <= 0.0) --pos;
    return pos == 0 ? 0 : pos - 1;
  }

  /// Recomputes the tree and total from the exact weights.
  void rebuild() {
    const std::size_t n = weights_.size();
    tree_.assign(n + 1, 0.0);
    total_ = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      tree_[i] += weights_[i - 1];
      total_ += weights_[i - 1];
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n) tree_[parent] += tree_[i];
    }
    updates_ = 0;
  }

  /// Sum of the stored weights, recomputed from scratch.
  double recompute_total() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

private:
  void tick() {
    if (++updates_ >= rebuild_period_) rebuild();
  }

  std::vector<double> weights_;
  std::vector<double> tree_{0.0};
  double total_ = 0.0;
  std::uint64_t updates_ = 0;
  std::uint64_t rebuild_period_;
};

}  // namespace cgp
