#include <doctest.h>

#include <chrono>
#include <numbers>
#include <set>
#include <tuple>

#include "support.hpp"
#include "tractshape/shape_oracle.hpp"
#include "tractshape/synth.hpp"

using namespace tractshape;
using namespace testing;

namespace {

using Voxel = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

// Independent marking: sample every segment at 1/64 voxel and floor.
std::set<Voxel> brute_voxels(const FiberCluster& c, double v) {
  std::set<Voxel> out;
  for (const auto& s : c.streamlines()) {
    const auto& p = s.points();
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      const int steps = std::max(1, static_cast<int>(std::ceil(distance(p[i], p[i + 1]) / v * 64)));
      for (int k = 0; k <= steps; ++k) {
        const Point3 q = p[i] + (static_cast<double>(k) / steps) * (p[i + 1] - p[i]);
        out.emplace(static_cast<std::int64_t>(std::floor(q.x / v)), static_cast<std::int64_t>(std::floor(q.y / v)),
                    static_cast<std::int64_t>(std::floor(q.z / v)));
      }
    }
  }
  return out;
}

std::size_t brute_faces(const std::set<Voxel>& vox) {
  std::size_t faces = 0;
  const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const auto& [i, j, k] : vox) {
    for (const auto& o : d) faces += vox.count({i + o[0], j + o[1], k + o[2]}) == 0;
  }
  return faces;
}

std::set<Voxel> occupied_set(const VoxelGrid& g) {
  std::set<Voxel> out;
  g.for_each_occupied([&](std::int64_t i, std::int64_t j, std::int64_t k) { out.emplace(i, j, k); });
  return out;
}

VoxelGrid grid_with(const std::vector<Voxel>& vox, std::array<std::int64_t, 3> dims, double v = 1.0) {
  VoxelGrid g({0, 0, 0}, v, dims);
  for (const auto& [i, j, k] : vox) g.mark(i, j, k);
  return g;
}

FiberCluster translated(const FiberCluster& c, Point3 t) {
  std::vector<Streamline> out;
  for (const auto& s : c.streamlines()) {
    std::vector<Point3> pts;
    for (const auto& p : s.points()) pts.push_back(p + t);
    out.emplace_back(std::move(pts));
  }
  return cluster_of(std::move(out));
}

}  // namespace

TEST_CASE("axis-aligned segment occupies ten voxels") {
  const auto c = cluster_of({line({{0.5, 0.5, 0.5}, {9.5, 0.5, 0.5}})});
  const auto g = voxelize(c, 1.0);
  CHECK(g.occupied_count() == 10);
  CHECK(g.occupied_count() == brute_voxels(c, 1.0).size());
  CHECK(volume(g) == 10.0);
  CHECK(surface_area(g) == 42.0);
}

TEST_CASE("zero-length streamline occupies one voxel") {
  const auto c = cluster_of({line({{3.2, -1.7, 8.9}, {3.2, -1.7, 8.9}})});
  const auto g = voxelize(c, 1.0);
  CHECK(g.occupied_count() == 1);
  CHECK(volume(voxelize(c, 0.5)) == 0.125);
  CHECK(surface_area(g) == 6.0);
}

TEST_CASE("grid keeps a margin and sits on the lattice") {
  const auto c = random_cluster(5, 10, 3, 12.0);
  for (const double v : {0.5, 1.0, 2.0}) {
    const auto g = voxelize(c, v);
    const auto box = bounding_box(c);
    const auto& o = g.origin();
    CHECK(o.x / v == std::round(o.x / v));
    CHECK(o.x <= box.min.x - v);
    CHECK(o.y <= box.min.y - v);
    CHECK(o.z <= box.min.z - v);
    CHECK(o.x + g.dims()[0] * v >= box.max.x + v);
    CHECK(o.y + g.dims()[1] * v >= box.max.y + v);
    CHECK(o.z + g.dims()[2] * v >= box.max.z + v);
  }
}

TEST_CASE("voxelization matches dense point marking on random clusters") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = random_cluster(4, 6, seed, 8.0);
    const auto g = voxelize(c, 1.0);
    std::set<Voxel> got;
    const auto o = g.origin();
    g.for_each_occupied([&](std::int64_t i, std::int64_t j, std::int64_t k) {
      got.emplace(i + std::llround(o.x), j + std::llround(o.y), k + std::llround(o.z));
    });
    const auto want = brute_voxels(c, 1.0);
    // Half-voxel steps can only miss corner clips that dense marking catches.
    std::size_t extra = 0;
    for (const auto& x : got) extra += want.count(x) == 0;
    CHECK(extra == 0);
    for (const auto& s : c.streamlines()) {
      for (const auto& p : s.points()) {
        CHECK(got.count({static_cast<std::int64_t>(std::floor(p.x)), static_cast<std::int64_t>(std::floor(p.y)),
                         static_cast<std::int64_t>(std::floor(p.z))}) == 1);
      }
    }
  }
}

TEST_CASE("surface area of hand-built grids") {
  CHECK(surface_area(grid_with({{1, 1, 1}}, {3, 3, 3})) == 6.0);
  std::vector<Voxel> rod;
  for (int k = 0; k < 10; ++k) rod.emplace_back(0, 0, k);
  const auto rod_grid = grid_with(rod, {1, 1, 10});  // touches the grid boundary on every side
  CHECK(surface_area(rod_grid) == 42.0);
  CHECK(brute_faces(occupied_set(rod_grid)) == 42);
  std::vector<Voxel> block;
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j)
      for (int k = 1; k <= 2; ++k) block.emplace_back(i, j, k);
  CHECK(surface_area(grid_with(block, {4, 4, 4})) == 24.0);
  CHECK(surface_area(grid_with(block, {4, 4, 4}, 0.5)) == 6.0);
  CHECK(volume(grid_with(block, {4, 4, 4}, 0.5)) == 1.0);
}

TEST_CASE("face counting agrees with a brute-force scan; area bounded by 6V/v") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Voxel> vox;
    std::uniform_int_distribution<int> u(0, 5);
    for (int n = 0; n < 40; ++n) vox.emplace_back(u(rng), u(rng), u(rng));
    const double v = trial % 2 ? 0.5 : 1.0;
    const auto g = grid_with(vox, {6, 6, 6}, v);
    CHECK(surface_area(g) == doctest::Approx(brute_faces(occupied_set(g)) * v * v));
    CHECK(surface_area(g) <= 6.0 * volume(g) / v + 1e-9);
  }
}

TEST_CASE("irregularity formula") {
  const double pi = std::numbers::pi;
  CHECK(irregularity(pi * 4 * 50, 2 * pi * 2 * 50, 50) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(irregularity(pi * 4 * 50, 2 * pi * 2 * 50 + 2 * pi * 4, 50) == doctest::Approx(1.04).epsilon(1e-12));
  CHECK_ERROR_CODE(irregularity(0, 1, 1), ErrorCode::DegenerateInput);
  CHECK_ERROR_CODE(irregularity(1, 1, 0), ErrorCode::DegenerateInput);
  CHECK_ERROR_CODE(irregularity(-1, 1, 1), ErrorCode::DegenerateInput);
}

TEST_CASE("bad voxel size and oversized grids") {
  const auto c = cluster_of({line({{0, 0, 0}, {100, 100, 100}})});
  CHECK_ERROR_CODE(voxelize(c, 0.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(voxelize(c, -1.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(voxelize(c, 0.01), ErrorCode::GridTooLarge);
  CHECK_ERROR_CODE(voxelize(c, 1.0, 1000), ErrorCode::GridTooLarge);
}

TEST_CASE("dense jitter-free cylinder at 0.5 mm") {
  BundleSpec spec;
  spec.length = 50;
  spec.tube_radius = 2;
  spec.n_streamlines = 200;
  spec.points_per_streamline = 200;
  spec.seed = 42;
  const auto bundle = generate_bundle(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const auto sv = compute_shape_vector(bundle.cluster, 0.5);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(std::abs(sv.length - 50) <= 0.5);
  CHECK(std::abs(sv.span - 50) <= 0.5);
  CHECK(std::abs(sv.volume - 628.319) <= 62.8319);
  CHECK(sv.irregularity >= 0.9);
  CHECK(sv.irregularity <= 1.6);
  CHECK(sv.length == doctest::Approx(sv.span).epsilon(1e-9));
  CHECK(secs < 5.0);
}

TEST_CASE("saturated tube volume equals the lattice-square count") {
  // Axis on a voxel corner: 0.5 mm squares meeting the r = 2 mm disk are
  // (i, j) with i^2 + j^2 < 16 per quadrant, 15 each; the top end lands on a
  // lattice plane and adds one layer, so 60 x 0.25 mm^2 x 50.5 mm.
  int squares = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) squares += i * i + j * j < 16;
  BundleSpec spec;
  spec.n_streamlines = 4000;
  spec.points_per_streamline = 2;
  spec.seed = 5;
  const auto g = voxelize(generate_bundle(spec).cluster, 0.5);
  CHECK(volume(g) == doctest::Approx(4 * squares * 0.25 * 50.5));
}

TEST_CASE("shape vector ignores streamline order") {
  auto c = random_cluster(12, 9, 77, 15.0);
  auto s = c.streamlines();
  std::reverse(s.begin(), s.end());
  std::rotate(s.begin(), s.begin() + 5, s.end());
  const auto a = compute_shape_vector(c, 1.0);
  const auto b = compute_shape_vector(cluster_of(std::move(s)), 1.0);
  CHECK(a.volume == b.volume);
  CHECK(a.total_surface_area == b.total_surface_area);
  CHECK(a.length == doctest::Approx(b.length).epsilon(1e-12));
  CHECK(a.span == doctest::Approx(b.span).epsilon(1e-12));
  CHECK(compute_shape_vector(c, 1.0) == a);
}

TEST_CASE("integer-voxel translations leave volume and area unchanged") {
  const auto c = random_cluster(10, 20, 5, 20.0);
  for (const double v : {0.5, 1.0}) {
    const auto base = compute_shape_vector(c, v);
    for (const Point3 t : {Point3{4, 0, 0}, Point3{-8, 2, 16}, Point3{64, -32, 1}}) {
      const auto moved = compute_shape_vector(translated(c, t), v);
      CHECK(moved.volume == base.volume);
      CHECK(moved.total_surface_area == base.total_surface_area);
    }
  }
}

TEST_CASE("halving the voxel size on a tube bounds the volume drop") {
  // Coarse voxels overhang the tube boundary, so refinement shrinks the
  // volume. A sweep over radii 1-4 mm bottoms out at a ratio of 0.24; each
  // coarse voxel keeps at least one of its 8 children.
  for (const double r : {1.0, 2.0, 4.0}) {
    BundleSpec spec;
    spec.tube_radius = r;
    spec.length = 30;
    spec.n_streamlines = static_cast<std::size_t>(60 * r * r);
    spec.points_per_streamline = 120;
    spec.seed = 3;
    const auto c = generate_bundle(spec).cluster;
    double prev = volume(voxelize(c, 2.0));
    for (const double v : {1.0, 0.5}) {
      const double cur = volume(voxelize(c, v));
      CHECK(cur >= prev / 8);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}
