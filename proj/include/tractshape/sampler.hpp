#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractshape/geometry.hpp"

namespace tractshape {

inline constexpr std::size_t kDefaultPointCount = 1024;

/// N points drawn from a cluster, untouched (no centering or scaling).
struct PointCloudSample {
  std::vector<Point3> points;
  std::string cluster_id;
  std::uint64_t seed = 0;

  std::size_t n_points() const noexcept { return points.size(); }
};

/// Uniform draw over the pooled points of all streamlines: without
/// replacement when the cluster has at least n points, with replacement
/// otherwise. Deterministic for a fixed seed.
PointCloudSample random_sample(const FiberCluster& cluster, std::size_t n, std::uint64_t seed);

}  // namespace tractshape
