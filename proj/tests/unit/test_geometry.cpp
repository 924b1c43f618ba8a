#include <doctest.h>

#include <numbers>

#include "support.hpp"
#include "tractshape/geometry.hpp"

using namespace tractshape;
using namespace testing;

namespace {

std::vector<Point3> quarter_circle(double r, std::size_t n) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::numbers::pi / 2 * static_cast<double>(i) / static_cast<double>(n - 1);
    pts.push_back({r * std::cos(t), r * std::sin(t), 0.0});
  }
  return pts;
}

Point3 rotate(const Point3& p, double a, double b, double c) {
  // Z-Y-X Euler rotation.
  const double ca = std::cos(a), sa = std::sin(a), cb = std::cos(b), sb = std::sin(b), cc = std::cos(c),
               sc = std::sin(c);
  Point3 q{ca * p.x - sa * p.y, sa * p.x + ca * p.y, p.z};
  q = {cb * q.x + sb * q.z, q.y, -sb * q.x + cb * q.z};
  return {q.x, cc * q.y - sc * q.z, sc * q.y + cc * q.z};
}

}  // namespace

TEST_CASE("streamline length and span on hand examples") {
  CHECK(streamline_length(line({{0, 0, 0}, {3, 4, 0}})) == doctest::Approx(5.0));
  const auto s = line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  CHECK(streamline_length(s) == doctest::Approx(2.0));
  CHECK(streamline_span(s) == doctest::Approx(2.0));
  CHECK(streamline_span(line({{0, 0, 0}, {1, 2, 3}, {4, 0, 1}, {0, 0, 0}})) == 0.0);
}

TEST_CASE("quarter circle polyline approaches arc length and chord") {
  const auto s = line(quarter_circle(10.0, 1000));
  CHECK(std::abs(streamline_length(s) - 10.0 * std::numbers::pi / 2) < 1e-3);
  CHECK(streamline_span(s) == doctest::Approx(2 * 10.0 * std::sin(std::numbers::pi / 4)).epsilon(1e-12));
  CHECK(streamline_span(s) == doctest::Approx(14.1421).epsilon(1e-5));
}

TEST_CASE("streamline validation") {
  CHECK_ERROR_CODE(Streamline({{0, 0, 0}}), ErrorCode::InvalidGeometry);
  CHECK_ERROR_CODE(Streamline({}), ErrorCode::InvalidGeometry);
  CHECK_ERROR_CODE(Streamline({{0, 0, 0}, {std::nan(""), 0, 0}}), ErrorCode::InvalidGeometry);
  CHECK_ERROR_CODE(Streamline({{0, 0, 0}, {INFINITY, 0, 0}}), ErrorCode::InvalidGeometry);
  CHECK_NOTHROW(Streamline({{1, 1, 1}, {1, 1, 1}}));
  CHECK_ERROR_CODE(FiberCluster("c", "s", {}), ErrorCode::InvalidGeometry);
}

TEST_CASE("cluster means") {
  const auto c = cluster_of({line({{0, 0, 0}, {2, 0, 0}}), line({{0, 0, 0}, {0, 4, 0}})});
  CHECK(cluster_mean_length(c) == doctest::Approx(3.0));
  CHECK(cluster_mean_span(c) == doctest::Approx(3.0));
  CHECK(c.total_points() == 4);

  const auto single = cluster_of({line({{0, 0, 0}, {1, 1, 0}, {1, 2, 0}})});
  CHECK(cluster_mean_length(single) == streamline_length(single.streamlines()[0]));
  CHECK(cluster_mean_span(single) == streamline_span(single.streamlines()[0]));
}

TEST_CASE("jittered copies of a 50 mm line") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> jitter(0.0, 0.1);
  std::vector<Streamline> lines;
  double brute_length = 0.0, brute_span = 0.0;
  for (int s = 0; s < 100; ++s) {
    std::vector<Point3> pts;
    for (int i = 0; i <= 10; ++i) pts.push_back({5.0 * i + jitter(rng), jitter(rng), jitter(rng)});
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double dx = pts[i].x - pts[i - 1].x, dy = pts[i].y - pts[i - 1].y, dz = pts[i].z - pts[i - 1].z;
      len += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    const double dx = pts.back().x - pts.front().x, dy = pts.back().y - pts.front().y,
                 dz = pts.back().z - pts.front().z;
    brute_length += len;
    brute_span += std::sqrt(dx * dx + dy * dy + dz * dz);
    lines.emplace_back(std::move(pts));
  }
  const auto c = cluster_of(std::move(lines));
  CHECK(cluster_mean_length(c) == doctest::Approx(brute_length / 100).epsilon(1e-12));
  CHECK(cluster_mean_span(c) == doctest::Approx(brute_span / 100).epsilon(1e-12));
  CHECK(std::abs(cluster_mean_length(c) - 50.0) < 0.5);
  CHECK(std::abs(cluster_mean_span(c) - 50.0) < 0.5);
}

TEST_CASE("bounding box") {
  const auto p = cluster_of({line({{1, 2, 3}, {1, 2, 3}})});
  CHECK(bounding_box(p).min == Point3{1, 2, 3});
  CHECK(bounding_box(p).max == Point3{1, 2, 3});
  const auto b = bounding_box(cluster_of({line({{0, 0, 0}, {3, 4, 0}})}));
  CHECK(b.min == Point3{0, 0, 0});
  CHECK(b.max == Point3{3, 4, 0});

  const auto c = random_cluster(10, 100, 11);
  Point3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& s : c.streamlines()) {
    for (const auto& q : s.points()) {
      lo = {std::min(lo.x, q.x), std::min(lo.y, q.y), std::min(lo.z, q.z)};
      hi = {std::max(hi.x, q.x), std::max(hi.y, q.y), std::max(hi.z, q.z)};
    }
  }
  CHECK(bounding_box(c).min == lo);
  CHECK(bounding_box(c).max == hi);
}

TEST_CASE("length properties under rigid motion, reversal and refinement") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_cluster(1, 20, 100 + static_cast<std::uint64_t>(trial));
    const auto& pts = c.streamlines()[0].points();
    const double a = u(rng), b = u(rng), g = u(rng);
    const Point3 t{u(rng) * 10, u(rng) * 10, u(rng) * 10};
    std::vector<Point3> moved, reversed(pts.rbegin(), pts.rend()), refined;
    for (const auto& p : pts) moved.push_back(rotate(p, a, b, g) + t);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      refined.push_back(pts[i]);
      if (i + 1 < pts.size()) refined.push_back(0.3 * pts[i] + 0.7 * pts[i + 1]);
    }
    const Streamline s(pts);
    const double len = streamline_length(s);
    CHECK(rel_diff(streamline_length(Streamline(moved)), len) < 1e-9);
    CHECK(rel_diff(streamline_span(Streamline(moved)), streamline_span(s)) < 1e-9);
    CHECK(rel_diff(streamline_length(Streamline(reversed)), len) < 1e-12);
    CHECK(streamline_span(Streamline(reversed)) == doctest::Approx(streamline_span(s)).epsilon(1e-14));
    CHECK(rel_diff(streamline_length(Streamline(refined)), len) < 1e-12);
    CHECK(len >= streamline_span(s));
  }
}

TEST_CASE("shape vector ordering") {
  const ShapeVector v{1, 2, 3, 4, 5};
  const auto a = v.to_array();
  for (std::size_t i = 0; i < kNumMeasures; ++i) CHECK(a[i] == static_cast<double>(i + 1));
  CHECK(ShapeVector::from_array(a) == v);
  CHECK(kMeasureKeys[0] == "length");
  CHECK(kMeasureKeys[4] == "irregularity");
}
