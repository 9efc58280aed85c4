#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace fppgeo {

/// Disjoint sets with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::int64_t n) : parent_(static_cast<size_t>(n)), size_(static_cast<size_t>(n), 1), components_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  std::int64_t find(std::int64_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Returns false when x and y were already joined (the edge closes a cycle).
  bool unite(std::int64_t x, std::int64_t y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    if (size_[x] < size_[y]) std::swap(x, y);
    parent_[y] = x;
    size_[x] += size_[y];
    --components_;
    return true;
  }

  std::int64_t size_of(std::int64_t x) { return size_[find(x)]; }
  std::int64_t components() const noexcept { return components_; }

 private:
  std::vector<std::int64_t> parent_;
  std::vector<std::int64_t> size_;
  std::int64_t components_;
};

}  // namespace fppgeo
