#include "tractshape/shape_oracle.hpp"

#include <cmath>
#include <numbers>

#include "tractshape/error.hpp"

namespace tractshape {

VoxelGrid::VoxelGrid(Point3 origin, double voxel_size, std::array<std::int64_t, 3> dims)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
  }
  for (const auto d : dims) {
    if (d <= 0) throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
  bits_.assign((voxel_count() + 63) / 64, 0);
}

bool VoxelGrid::occupied(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
  if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return false;
  const auto idx = linear_index(i, j, k);
  return (bits_[idx >> 6] >> (idx & 63)) & 1U;
}

void VoxelGrid::mark(std::int64_t i, std::int64_t j, std::int64_t k) noexcept {
  if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return;
  const auto idx = linear_index(i, j, k);
  bits_[idx >> 6] |= std::uint64_t{1} << (idx & 63);
}

void VoxelGrid::mark_point(const Point3& p) noexcept {
  mark(static_cast<std::int64_t>(std::floor((p.x - origin_.x) / voxel_size_)),
       static_cast<std::int64_t>(std::floor((p.y - origin_.y) / voxel_size_)),
       static_cast<std::int64_t>(std::floor((p.z - origin_.z) / voxel_size_)));
}

std::uint64_t VoxelGrid::occupied_count() const noexcept {
  std::uint64_t n = 0;
  for (const auto w : bits_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
  return n;
}

VoxelGrid voxelize(const FiberCluster& cluster, double voxel_size, std::uint64_t max_voxels) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
  }
  const auto box = bounding_box(cluster);
  // Lattice-aligned origin with one voxel of margin on every side.
  auto lo = [&](double v) { return std::floor(v / voxel_size) - 1.0; };
  auto hi = [&](double v) { return std::floor(v / voxel_size) + 1.0; };
  const std::array<double, 3> lo_idx = {lo(box.min.x), lo(box.min.y), lo(box.min.z)};
  const std::array<double, 3> hi_idx = {hi(box.max.x), hi(box.max.y), hi(box.max.z)};
  std::array<std::int64_t, 3> dims{};
  double total = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double extent = hi_idx[a] - lo_idx[a] + 1.0;
    total *= extent;
    dims[a] = static_cast<std::int64_t>(std::min(extent, 9.0e18));
  }
  if (total > static_cast<double>(max_voxels)) {
    throw Error(ErrorCode::GridTooLarge, "grid of " + std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
                                             std::to_string(dims[2]) + " voxels exceeds the cap of " +
                                             std::to_string(max_voxels));
  }
  VoxelGrid grid({lo_idx[0] * voxel_size, lo_idx[1] * voxel_size, lo_idx[2] * voxel_size}, voxel_size, dims);

  const double step = voxel_size / 2.0;
  for (const auto& s : cluster.streamlines()) {
    const auto& pts = s.points();
    grid.mark_point(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const Point3& a = pts[i - 1];
      const Point3& b = pts[i];
      const double len = distance(a, b);
      const auto n = static_cast<std::size_t>(std::ceil(len / step));
      for (std::size_t t = 1; t <= n; ++t) {
        const double u = static_cast<double>(t) / static_cast<double>(n);
        grid.mark_point(a + u * (b - a));
      }
    }
  }
  return grid;
}

double volume(const VoxelGrid& grid) {
  const double v = grid.voxel_size();
  return static_cast<double>(grid.occupied_count()) * v * v * v;
}

double surface_area(const VoxelGrid& grid) {
  std::uint64_t faces = 0;
  grid.for_each_occupied([&](std::int64_t i, std::int64_t j, std::int64_t k) {
    faces += !grid.occupied(i - 1, j, k);
    faces += !grid.occupied(i + 1, j, k);
    faces += !grid.occupied(i, j - 1, k);
    faces += !grid.occupied(i, j + 1, k);
    faces += !grid.occupied(i, j, k - 1);
    faces += !grid.occupied(i, j, k + 1);
  });
  const double v = grid.voxel_size();
  return static_cast<double>(faces) * v * v;
}

double irregularity(double volume, double area, double length) {
  if (!(volume > 0.0) || !(length > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "irregularity needs positive volume and length");
  }
  const double diameter = 2.0 * std::sqrt(volume / (std::numbers::pi * length));
  return area / (std::numbers::pi * diameter * length);
}

ShapeVector compute_shape_vector(const FiberCluster& cluster, double voxel_size, std::uint64_t max_voxels) {
  const VoxelGrid grid = voxelize(cluster, voxel_size, max_voxels);
  ShapeVector v;
  v.length = cluster_mean_length(cluster);
  v.span = cluster_mean_span(cluster);
  v.volume = volume(grid);
  v.total_surface_area = surface_area(grid);
  v.irregularity = irregularity(v.volume, v.total_surface_area, v.length);
  return v;
}

}  // namespace tractshape
