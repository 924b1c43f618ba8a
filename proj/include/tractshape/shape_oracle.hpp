#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tractshape/geometry.hpp"

namespace tractshape {

inline constexpr double kDefaultVoxelSize = 1.0;
inline constexpr std::uint64_t kDefaultMaxVoxels = std::uint64_t{1} << 28;

/// Dense isotropic occupancy grid. The origin sits on the global lattice
/// (a multiple of voxel_size), so integer-voxel translations of a cluster
/// shift the occupancy pattern without changing it.
class VoxelGrid {
 public:
  VoxelGrid(Point3 origin, double voxel_size, std::array<std::int64_t, 3> dims);

  const Point3& origin() const noexcept { return origin_; }
  double voxel_size() const noexcept { return voxel_size_; }
  const std::array<std::int64_t, 3>& dims() const noexcept { return dims_; }
  std::uint64_t voxel_count() const noexcept { return static_cast<std::uint64_t>(dims_[0] * dims_[1] * dims_[2]); }

  bool occupied(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept;
  void mark(std::int64_t i, std::int64_t j, std::int64_t k) noexcept;
  /// Marks the voxel containing p; points outside the grid are ignored.
  void mark_point(const Point3& p) noexcept;
  std::uint64_t occupied_count() const noexcept;

  template <typename F>
  void for_each_occupied(F&& f) const {
    for (std::size_t w = 0; w < bits_.size(); ++w) {
      std::uint64_t word = bits_[w];
      while (word != 0) {
        const int b = __builtin_ctzll(word);
        word &= word - 1;
        const auto linear = static_cast<std::int64_t>(w * 64 + static_cast<std::size_t>(b));
        const std::int64_t i = linear % dims_[0];
        const std::int64_t j = (linear / dims_[0]) % dims_[1];
        const std::int64_t k = linear / (dims_[0] * dims_[1]);
        f(i, j, k);
      }
    }
  }

 private:
  std::size_t linear_index(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return static_cast<std::size_t>((k * dims_[1] + j) * dims_[0] + i);
  }

  Point3 origin_;
  double voxel_size_;
  std::array<std::int64_t, 3> dims_;
  std::vector<std::uint64_t> bits_;
};

/// Rasterizes every streamline segment by sampling it at arc-length steps of
/// voxel_size / 2 (endpoints included). Throws GridTooLarge above max_voxels.
VoxelGrid voxelize(const FiberCluster& cluster, double voxel_size, std::uint64_t max_voxels = kDefaultMaxVoxels);

/// occupied voxels x voxel_size^3
double volume(const VoxelGrid& grid);

/// Exposed faces (occupied voxel next to an empty or out-of-grid 6-neighbor) x voxel_size^2.
double surface_area(const VoxelGrid& grid);

/// area / (pi * d * length), d being the diameter of the cylinder with the
/// same volume and length. 1 for the lateral surface of an ideal cylinder.
double irregularity(double volume, double area, double length);

ShapeVector compute_shape_vector(const FiberCluster& cluster, double voxel_size = kDefaultVoxelSize,
                                 std::uint64_t max_voxels = kDefaultMaxVoxels);

}  // namespace tractshape
