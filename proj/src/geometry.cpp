#include "tractshape/geometry.hpp"

#include <algorithm>

#include "tractshape/error.hpp"

namespace tractshape {

Streamline::Streamline(std::vector<Point3> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorCode::InvalidGeometry,
                "streamline needs at least 2 points, got " + std::to_string(points_.size()));
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].is_finite()) {
      throw Error(ErrorCode::InvalidGeometry, "non-finite coordinate at point " + std::to_string(i));
    }
  }
}

FiberCluster::FiberCluster(std::string id, std::string subject_id, std::vector<Streamline> streamlines)
    : id_(std::move(id)), subject_id_(std::move(subject_id)), streamlines_(std::move(streamlines)) {
  if (streamlines_.empty()) {
    throw Error(ErrorCode::InvalidGeometry, "fiber cluster '" + id_ + "' has no streamlines");
  }
}

std::size_t FiberCluster::total_points() const noexcept {
  std::size_t n = 0;
  for (const auto& s : streamlines_) n += s.size();
  return n;
}

double streamline_length(const Streamline& s) {
  const auto& p = s.points();
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += distance(p[i - 1], p[i]);
  return total;
}

double streamline_span(const Streamline& s) { return distance(s.front(), s.back()); }

double cluster_mean_length(const FiberCluster& c) {
  double sum = 0.0;
  for (const auto& s : c.streamlines()) sum += streamline_length(s);
  return sum / static_cast<double>(c.streamlines().size());
}

double cluster_mean_span(const FiberCluster& c) {
  double sum = 0.0;
  for (const auto& s : c.streamlines()) sum += streamline_span(s);
  return sum / static_cast<double>(c.streamlines().size());
}

BoundingBox bounding_box(const FiberCluster& c) {
  BoundingBox box{c.streamlines().front().front(), c.streamlines().front().front()};
  for (const auto& s : c.streamlines()) {
    for (const auto& p : s.points()) {
      box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
      box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
    }
  }
  return box;
}

}  // namespace tractshape
