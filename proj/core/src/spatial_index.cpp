#include "lim/spatial_index.hpp"

#include <algorithm>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <limits>
#include <utility>

namespace lim {
namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using BoostPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BoostPoint, std::size_t>;

BoostPoint to_boost(const Vec3& p) { return {p.x(), p.y(), p.z()}; }

}  // namespace

struct PointIndex::Impl {
  bgi::rtree<Entry, bgi::quadratic<16>> tree;
  std::vector<Vec3> points;
};

PointIndex::PointIndex(const Points& points) : impl_(std::make_unique<Impl>()) {
  std::vector<Entry> entries;
  entries.reserve(points.rows());
  impl_->points.reserve(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec3 p = points.row(i).transpose();
    entries.emplace_back(to_boost(p), static_cast<std::size_t>(i));
    impl_->points.push_back(p);
  }
  // Range constructor uses bulk packing.
  impl_->tree = decltype(impl_->tree)(entries.begin(), entries.end());
}

PointIndex::~PointIndex() = default;
PointIndex::PointIndex(PointIndex&&) noexcept = default;
PointIndex& PointIndex::operator=(PointIndex&&) noexcept = default;

std::vector<std::size_t> PointIndex::nearest(const Vec3& query, std::size_t k) const {
  std::vector<Entry> hits;
  hits.reserve(k);
  impl_->tree.query(bgi::nearest(to_boost(query), static_cast<unsigned>(k)),
                    std::back_inserter(hits));
  std::vector<std::pair<double, std::size_t>> ordered;
  ordered.reserve(hits.size());
  for (const auto& [pt, idx] : hits) {
    ordered.emplace_back((impl_->points[idx] - query).squaredNorm(), idx);
  }
  std::sort(ordered.begin(), ordered.end());
  std::vector<std::size_t> out;
  out.reserve(ordered.size());
  for (const auto& [d, idx] : ordered) out.push_back(idx);
  return out;
}

double PointIndex::nearest_distance(const Vec3& query) const {
  if (impl_->points.empty()) return std::numeric_limits<double>::infinity();
  const auto idx = nearest(query, 1);
  return (impl_->points[idx.front()] - query).norm();
}

std::size_t PointIndex::size() const { return impl_->points.size(); }

}  // namespace lim
