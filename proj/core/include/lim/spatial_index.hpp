#pragma once

#include <memory>
#include <vector>

#include "lim/types.hpp"

namespace lim {

/// Static k-nearest-neighbor index over a point set.
class PointIndex {
 public:
  explicit PointIndex(const Points& points);
  ~PointIndex();
  PointIndex(PointIndex&&) noexcept;
  PointIndex& operator=(PointIndex&&) noexcept;

  /// Row indices of the k nearest points, closest first.
  std::vector<std::size_t> nearest(const Vec3& query, std::size_t k) const;
  /// Distance to the closest indexed point; +inf for an empty index.
  double nearest_distance(const Vec3& query) const;

  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lim
