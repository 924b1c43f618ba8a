#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tractshape {

/// A point in RAS (right-anterior-superior) coordinates, millimeters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;

  bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

/// Ordered polyline of at least two finite points. Validated on construction.
class Streamline {
 public:
  explicit Streamline(std::vector<Point3> points);

  const std::vector<Point3>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Point3& front() const { return points_.front(); }
  const Point3& back() const { return points_.back(); }

 private:
  std::vector<Point3> points_;
};

/// A group of streamlines forming one white-matter connection.
class FiberCluster {
 public:
  FiberCluster(std::string id, std::string subject_id, std::vector<Streamline> streamlines);

  const std::string& id() const noexcept { return id_; }
  const std::string& subject_id() const noexcept { return subject_id_; }
  const std::vector<Streamline>& streamlines() const noexcept { return streamlines_; }
  std::size_t total_points() const noexcept;

 private:
  std::string id_;
  std::string subject_id_;
  std::vector<Streamline> streamlines_;
};

inline constexpr std::size_t kNumMeasures = 5;

/// Canonical order of the shape measures; used for every serialized 5-vector.
inline constexpr std::array<std::string_view, kNumMeasures> kMeasureKeys = {
    "length", "span", "volume", "total_surface_area", "irregularity"};
inline constexpr std::array<std::string_view, kNumMeasures> kMeasureLabels = {
    "Length", "Span", "Volume", "Total Surface Area", "Irregularity"};

struct ShapeVector {
  double length = 0.0;              // mm
  double span = 0.0;                // mm
  double volume = 0.0;              // mm^3
  double total_surface_area = 0.0;  // mm^2
  double irregularity = 0.0;        // dimensionless

  std::array<double, kNumMeasures> to_array() const {
    return {length, span, volume, total_surface_area, irregularity};
  }
  static ShapeVector from_array(const std::array<double, kNumMeasures>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  double operator[](std::size_t i) const { return to_array()[i]; }

  friend bool operator==(const ShapeVector&, const ShapeVector&) = default;
};

struct BoundingBox {
  Point3 min;
  Point3 max;
};

double streamline_length(const Streamline& s);
double streamline_span(const Streamline& s);
double cluster_mean_length(const FiberCluster& c);
/// Mean of per-streamline endpoint distances.
double cluster_mean_span(const FiberCluster& c);
BoundingBox bounding_box(const FiberCluster& c);

}  // namespace tractshape
