#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tractshape/geometry.hpp"
#include "tractshape/manifest.hpp"

namespace tractshape {

enum class BundleKind { Cylinder, Arc, Helix };

std::string_view bundle_kind_name(BundleKind kind);

/// Rigid placement applied after the centerline is centered on its centroid.
struct Pose {
  std::array<double, 9> rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  Point3 translation;

  Point3 apply(const Point3& p) const;
};

struct BundleSpec {
  BundleKind kind = BundleKind::Cylinder;
  double length = 50.0;                           // cylinder centerline, mm
  double arc_radius = 30.0;                       // mm
  double arc_angle = 1.5707963267948966;          // rad
  double helix_radius = 5.0;                      // mm
  double helix_pitch = 10.0;                      // mm per turn
  double helix_turns = 1.0;
  double tube_radius = 2.0;                       // mm
  std::size_t n_streamlines = 100;
  std::size_t points_per_streamline = 100;
  double jitter_sigma = 0.0;                      // mm
  std::uint64_t seed = 0;
  Pose pose;

  void validate() const;  // throws InvalidSpec
  double centerline_length() const;
  double centerline_span() const;
  /// Centerline position at t in [0, 1], in the final (centered, posed) frame.
  Point3 centerline_point(double t) const;
};

/// Closed-form measures of the generating centerline/tube. Volume, area and
/// irregularity are only known for cylinders.
struct AnalyticTruth {
  double length = 0.0;
  double span = 0.0;
  std::optional<double> volume;
  std::optional<double> total_surface_area;
  std::optional<double> irregularity;
};

struct GeneratedBundle {
  FiberCluster cluster;
  AnalyticTruth truth;
};

/// Streamlines are centerline copies shifted by a uniform-in-disk offset
/// (radius <= tube_radius, fixed per streamline) plus i.i.d. Gaussian jitter
/// per point.
GeneratedBundle generate_bundle(const BundleSpec& spec, std::string id = "bundle", std::string subject_id = {});

// ---------------------------------------------------------------------------
// Datasets

/// Downstream score: sum of a few standardized shape features plus Gaussian
/// noise. Feature column = cluster_index * 5 + measure_index.
struct ScoreConfig {
  std::vector<std::size_t> active_columns = {0, 6, 13};  // c0 length, c1 span, c2 total surface area
  double snr = 5.0;                                       // signal std : noise std
};

struct DatasetConfig {
  std::size_t n_subjects = 10;
  std::size_t first_subject = 0;  // index of the first generated subject; later indices give unseen subjects
  std::size_t clusters_per_subject = 73;
  std::uint64_t seed = 42;

  // Per-cluster parameter ranges; the three kinds are equiprobable.
  double min_length = 20.0, max_length = 120.0;       // centerline length, mm
  double min_tube_radius = 1.0, max_tube_radius = 6.0;
  double min_arc_angle = 0.7853981633974483, max_arc_angle = 3.141592653589793;
  double min_helix_turns = 0.5, max_helix_turns = 1.5;
  double streamline_density = 1.5;                    // streamlines per mm^2 of tube cross-section
  std::size_t min_streamlines = 10, max_streamlines = 200;
  double point_spacing = 1.5;                         // mm between consecutive points
  double max_jitter = 0.2;                            // jitter sigma drawn from [0, max_jitter]
  double max_translation = 20.0;                      // per axis, mm
  bool random_rotation = true;
  // Cluster c of every subject varies around one template drawn from the
  // ranges above, the way an atlas tract recurs across subjects.
  double subject_variation = 0.2;    // relative spread of size parameters around the template
  double pose_variation_deg = 10.0;  // rotation about a random axis
  double pose_variation_mm = 3.0;    // per-axis translation

  double voxel_size = 1.0;  // for the oracle ground truth stored in the manifest
  ScoreConfig score;

  nlohmann::json to_json() const;
  /// Overrides the fields present in j (keys as written by to_json).
  void merge_json(const nlohmann::json& j);
};

/// Parameters of one cluster, derived only from (seed, subject, cluster): the
/// cluster template comes from (seed, cluster), the subject's variation of it
/// from (seed, subject, cluster).
BundleSpec draw_bundle_spec(const DatasetConfig& config, std::size_t subject, std::size_t cluster);
std::string subject_name(std::size_t subject);
std::string cluster_name(std::size_t cluster, std::size_t clusters_per_subject);
GeneratedBundle generate_dataset_cluster(const DatasetConfig& config, std::size_t subject, std::size_t cluster);

/// Scores for each subject row of a (subjects x features) matrix.
std::vector<double> synthesize_scores(const Eigen::MatrixXd& features, const ScoreConfig& config, std::uint64_t seed);

/// Writes <out_dir>/<subject>/<cluster>.tck plus <out_dir>/manifest.json, with
/// oracle ground truth per cluster and a synthetic score per subject.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::string& out_dir, int threads = 1);

}  // namespace tractshape
