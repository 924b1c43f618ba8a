#include "tractshape/synth.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "tractshape/error.hpp"
#include "tractshape/shape_oracle.hpp"
#include "tractshape/tck.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

namespace fs = std::filesystem;
using std::numbers::pi;

std::string_view bundle_kind_name(BundleKind kind) {
  switch (kind) {
    case BundleKind::Cylinder: return "cylinder";
    case BundleKind::Arc: return "arc";
    case BundleKind::Helix: return "helix";
  }
  return "unknown";
}

Point3 Pose::apply(const Point3& p) const {
  const auto& r = rotation;
  return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation.x,
          r[3] * p.x + r[4] * p.y + r[5] * p.z + translation.y,
          r[6] * p.x + r[7] * p.y + r[8] * p.z + translation.z};
}

namespace {

struct Frame {
  Point3 center;
  Point3 n1;  // unit normals spanning the cross-section
  Point3 n2;
};

Point3 normalized(const Point3& p) { return (1.0 / norm(p)) * p; }

// Canonical (uncentered, unposed) centerline with a cross-section frame.
Frame canonical_frame(const BundleSpec& spec, double t) {
  switch (spec.kind) {
    case BundleKind::Cylinder:
      return {{(t - 0.5) * spec.length, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    case BundleKind::Arc: {
      const double phi = spec.arc_angle * t;
      const Point3 radial{std::cos(phi), std::sin(phi), 0.0};
      return {spec.arc_radius * radial, radial, {0.0, 0.0, 1.0}};
    }
    case BundleKind::Helix: {
      const double omega = 2.0 * pi * spec.helix_turns;
      const double angle = omega * t;
      const Point3 radial{std::cos(angle), std::sin(angle), 0.0};
      const Point3 center{spec.helix_radius * radial.x, spec.helix_radius * radial.y,
                          spec.helix_pitch * spec.helix_turns * t};
      const Point3 tangent = normalized({-spec.helix_radius * omega * radial.y, spec.helix_radius * omega * radial.x,
                                         spec.helix_pitch * spec.helix_turns});
      return {center, radial, normalized(cross(tangent, radial))};
    }
  }
  throw Error(ErrorCode::InvalidSpec, "unknown bundle kind");
}

Point3 canonical_centroid(const BundleSpec& spec) {
  constexpr int kSamples = 512;
  Point3 sum;
  for (int i = 0; i <= kSamples; ++i) sum = sum + canonical_frame(spec, static_cast<double>(i) / kSamples).center;
  return (1.0 / (kSamples + 1)) * sum;
}

std::array<double, 9> random_rotation(std::mt19937_64& rng) {
  // Uniform unit quaternion (Shoemake).
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u1 = u01(rng), u2 = u01(rng), u3 = u01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(2 * pi * u2), x = a * std::cos(2 * pi * u2);
  const double y = b * std::sin(2 * pi * u3), z = b * std::cos(2 * pi * u3);
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

Point3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Point3 p{g(rng), g(rng), g(rng)};
    if (norm(p) > 1e-9) return normalized(p);
  }
}

// Rodrigues' formula, row-major.
std::array<double, 9> axis_rotation(const Point3& k, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {t * k.x * k.x + c,       t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y,
          t * k.x * k.y + s * k.z, t * k.y * k.y + c,       t * k.y * k.z - s * k.x,
          t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c};
}

std::array<double, 9> compose(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return out;
}

}  // namespace

void BundleSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive and finite");
  };
  positive(tube_radius, "tube_radius");
  if (n_streamlines < 1) fail("n_streamlines must be >= 1");
  if (points_per_streamline < 2) fail("points_per_streamline must be >= 2");
  if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma)) fail("jitter_sigma must be >= 0");
  switch (kind) {
    case BundleKind::Cylinder: positive(length, "length"); break;
    case BundleKind::Arc:
      positive(arc_radius, "arc_radius");
      positive(arc_angle, "arc_angle");
      break;
    case BundleKind::Helix:
      positive(helix_radius, "helix_radius");
      positive(helix_pitch, "helix_pitch");
      positive(helix_turns, "helix_turns");
      break;
  }
  for (const double v : pose.rotation) {
    if (!std::isfinite(v)) fail("pose rotation must be finite");
  }
  if (!pose.translation.is_finite()) fail("pose translation must be finite");
}

double BundleSpec::centerline_length() const {
  switch (kind) {
    case BundleKind::Cylinder: return length;
    case BundleKind::Arc: return arc_radius * arc_angle;
    case BundleKind::Helix: return helix_turns * std::hypot(2.0 * pi * helix_radius, helix_pitch);
  }
  return 0.0;
}

double BundleSpec::centerline_span() const {
  switch (kind) {
    case BundleKind::Cylinder: return length;
    case BundleKind::Arc: return 2.0 * arc_radius * std::sin(arc_angle / 2.0);
    case BundleKind::Helix:
      return std::hypot(2.0 * helix_radius * std::sin(pi * helix_turns), helix_pitch * helix_turns);
  }
  return 0.0;
}

Point3 BundleSpec::centerline_point(double t) const {
  return pose.apply(canonical_frame(*this, t).center - canonical_centroid(*this));
}

GeneratedBundle generate_bundle(const BundleSpec& spec, std::string id, std::string subject_id) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const Point3 centroid = canonical_centroid(spec);
  const std::size_t n_points = spec.points_per_streamline;
  std::vector<Frame> frames(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    frames[k] = canonical_frame(spec, static_cast<double>(k) / static_cast<double>(n_points - 1));
  }

  std::vector<Streamline> streamlines;
  streamlines.reserve(spec.n_streamlines);
  for (std::size_t i = 0; i < spec.n_streamlines; ++i) {
    const double rho = spec.tube_radius * std::sqrt(u01(rng));
    const double phi = 2.0 * pi * u01(rng);
    const double a = rho * std::cos(phi), b = rho * std::sin(phi);
    std::vector<Point3> pts;
    pts.reserve(n_points);
    for (const auto& f : frames) {
      Point3 p = f.center + a * f.n1 + b * f.n2 - centroid;
      if (spec.jitter_sigma > 0.0) {
        p = p + spec.jitter_sigma * Point3{jitter(rng), jitter(rng), jitter(rng)};
      }
      pts.push_back(spec.pose.apply(p));
    }
    streamlines.emplace_back(std::move(pts));
  }

  AnalyticTruth truth;
  truth.length = spec.centerline_length();
  truth.span = spec.centerline_span();
  if (spec.kind == BundleKind::Cylinder) {
    const double r = spec.tube_radius, L = spec.length;
    truth.volume = pi * r * r * L;
    truth.total_surface_area = 2.0 * pi * r * L + 2.0 * pi * r * r;
    truth.irregularity = irregularity(*truth.volume, *truth.total_surface_area, L);
  }
  return {FiberCluster(std::move(id), std::move(subject_id), std::move(streamlines)), truth};
}

// ---------------------------------------------------------------------------

nlohmann::json DatasetConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["n_subjects"] = n_subjects;
  j["first_subject"] = first_subject;
  j["clusters_per_subject"] = clusters_per_subject;
  j["seed"] = seed;
  j["length_range_mm"] = {min_length, max_length};
  j["tube_radius_range_mm"] = {min_tube_radius, max_tube_radius};
  j["arc_angle_range_rad"] = {min_arc_angle, max_arc_angle};
  j["helix_turns_range"] = {min_helix_turns, max_helix_turns};
  j["streamline_density_per_mm2"] = streamline_density;
  j["streamline_count_range"] = {min_streamlines, max_streamlines};
  j["point_spacing_mm"] = point_spacing;
  j["max_jitter_mm"] = max_jitter;
  j["max_translation_mm"] = max_translation;
  j["random_rotation"] = random_rotation;
  j["subject_variation"] = subject_variation;
  j["pose_variation_deg"] = pose_variation_deg;
  j["pose_variation_mm"] = pose_variation_mm;
  j["voxel_size_mm"] = voxel_size;
  j["score_active_columns"] = score.active_columns;
  j["score_snr"] = score.snr;
  return j;
}

void DatasetConfig::merge_json(const nlohmann::json& j) {
  auto range = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw Error(ErrorCode::SchemaError, std::string("dataset config: ") + key + " needs 2 values");
    lo = v[0];
    hi = v[1];
  };
  try {
    if (j.contains("n_subjects")) n_subjects = j.at("n_subjects").get<std::size_t>();
    if (j.contains("first_subject")) first_subject = j.at("first_subject").get<std::size_t>();
    if (j.contains("clusters_per_subject")) clusters_per_subject = j.at("clusters_per_subject").get<std::size_t>();
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    range("length_range_mm", min_length, max_length);
    range("tube_radius_range_mm", min_tube_radius, max_tube_radius);
    range("arc_angle_range_rad", min_arc_angle, max_arc_angle);
    range("helix_turns_range", min_helix_turns, max_helix_turns);
    if (j.contains("streamline_density_per_mm2")) streamline_density = j.at("streamline_density_per_mm2").get<double>();
    if (j.contains("streamline_count_range")) {
      const auto v = j.at("streamline_count_range").get<std::vector<std::size_t>>();
      if (v.size() != 2) throw Error(ErrorCode::SchemaError, "dataset config: streamline_count_range needs 2 values");
      min_streamlines = v[0];
      max_streamlines = v[1];
    }
    if (j.contains("point_spacing_mm")) point_spacing = j.at("point_spacing_mm").get<double>();
    if (j.contains("max_jitter_mm")) max_jitter = j.at("max_jitter_mm").get<double>();
    if (j.contains("max_translation_mm")) max_translation = j.at("max_translation_mm").get<double>();
    if (j.contains("random_rotation")) random_rotation = j.at("random_rotation").get<bool>();
    if (j.contains("subject_variation")) subject_variation = j.at("subject_variation").get<double>();
    if (j.contains("pose_variation_deg")) pose_variation_deg = j.at("pose_variation_deg").get<double>();
    if (j.contains("pose_variation_mm")) pose_variation_mm = j.at("pose_variation_mm").get<double>();
    if (j.contains("voxel_size_mm")) voxel_size = j.at("voxel_size_mm").get<double>();
    if (j.contains("score_active_columns")) score.active_columns = j.at("score_active_columns").get<std::vector<std::size_t>>();
    if (j.contains("score_snr")) score.snr = j.at("score_snr").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("dataset config: ") + e.what());
  }
}

BundleSpec draw_bundle_spec(const DatasetConfig& cfg, std::size_t subject, std::size_t cluster) {
  std::mt19937_64 template_rng(derive_seed(cfg.seed, SeedDomain::Cluster, cluster));
  auto draw = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(template_rng); };
  const auto kind = static_cast<BundleKind>(std::uniform_int_distribution<int>(0, 2)(template_rng));
  const double base_length = draw(cfg.min_length, cfg.max_length);
  const double base_radius = draw(cfg.min_tube_radius, cfg.max_tube_radius);
  const double base_angle = draw(cfg.min_arc_angle, cfg.max_arc_angle);
  const double base_turns = draw(cfg.min_helix_turns, cfg.max_helix_turns);
  const double helix_fraction = draw(0.4, 1.0);
  const auto base_rotation = cfg.random_rotation ? random_rotation(template_rng) : Pose{}.rotation;
  const Point3 base_translation{draw(-cfg.max_translation, cfg.max_translation),
                                draw(-cfg.max_translation, cfg.max_translation),
                                draw(-cfg.max_translation, cfg.max_translation)};

  std::mt19937_64 rng(derive_seed(cfg.seed, SeedDomain::Cluster, subject, cluster));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double v = cfg.subject_variation;
  auto vary = [&](double base, double lo, double hi) { return std::clamp(base * uniform(1.0 - v, 1.0 + v), lo, hi); };

  BundleSpec spec;
  spec.kind = kind;
  const double target_length = vary(base_length, cfg.min_length, cfg.max_length);
  spec.tube_radius = vary(base_radius, cfg.min_tube_radius, cfg.max_tube_radius);
  switch (spec.kind) {
    case BundleKind::Cylinder:
      spec.length = target_length;
      break;
    case BundleKind::Arc:
      spec.arc_angle = vary(base_angle, cfg.min_arc_angle, cfg.max_arc_angle);
      spec.arc_radius = target_length / spec.arc_angle;
      break;
    case BundleKind::Helix: {
      spec.helix_turns = vary(base_turns, cfg.min_helix_turns, cfg.max_helix_turns);
      const double per_turn = target_length / spec.helix_turns;
      spec.helix_radius = helix_fraction * 0.8 * per_turn / (2.0 * pi);
      spec.helix_pitch = std::sqrt(per_turn * per_turn - std::pow(2.0 * pi * spec.helix_radius, 2));
      break;
    }
  }
  const double cross_section = pi * spec.tube_radius * spec.tube_radius;
  spec.n_streamlines = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.streamline_density * cross_section)), cfg.min_streamlines,
      cfg.max_streamlines);
  spec.points_per_streamline =
      std::max<std::size_t>(10, static_cast<std::size_t>(std::lround(target_length / cfg.point_spacing)) + 1);
  spec.jitter_sigma = uniform(0.0, cfg.max_jitter);
  const double tilt = uniform(0.0, cfg.pose_variation_deg) * pi / 180.0;
  spec.pose.rotation = compose(axis_rotation(random_unit_vector(rng), tilt), base_rotation);
  spec.pose.translation = base_translation + Point3{uniform(-cfg.pose_variation_mm, cfg.pose_variation_mm),
                                                    uniform(-cfg.pose_variation_mm, cfg.pose_variation_mm),
                                                    uniform(-cfg.pose_variation_mm, cfg.pose_variation_mm)};
  spec.seed = derive_seed(cfg.seed, SeedDomain::Cluster, subject, cluster, 1);
  return spec;
}

std::string subject_name(std::size_t subject) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub-%03zu", subject);
  return buf;
}

std::string cluster_name(std::size_t cluster, std::size_t clusters_per_subject) {
  const int width = clusters_per_subject > 100 ? static_cast<int>(std::to_string(clusters_per_subject - 1).size()) : 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%0*zu", width, cluster);
  return buf;
}

GeneratedBundle generate_dataset_cluster(const DatasetConfig& cfg, std::size_t subject, std::size_t cluster) {
  return generate_bundle(draw_bundle_spec(cfg, subject, cluster), cluster_name(cluster, cfg.clusters_per_subject),
                         subject_name(subject));
}

std::vector<double> synthesize_scores(const Eigen::MatrixXd& features, const ScoreConfig& config, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(features.rows());
  const auto p = static_cast<std::size_t>(features.cols());
  std::vector<double> signal(n, 0.0);
  if (p == 0 || n == 0) return signal;
  for (const auto col : config.active_columns) {
    const auto c = static_cast<Eigen::Index>(col % p);
    const double mean = features.col(c).mean();
    const double var = n > 1 ? (features.col(c).array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) signal[i] += (features(static_cast<Eigen::Index>(i), c) - mean) / sd;
  }
  double mean = 0.0;
  for (const double s : signal) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double s : signal) var += (s - mean) * (s - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
  const double noise_sd = var > 0.0 ? std::sqrt(var) / config.snr : 1.0;

  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Score));
  std::normal_distribution<double> noise(0.0, noise_sd);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = signal[i] + noise(rng);
  return scores;
}

DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::string& out_dir, int threads) {
  if (cfg.clusters_per_subject < 1) throw Error(ErrorCode::InvalidArgument, "clusters_per_subject must be >= 1");
  if (cfg.n_subjects < 1) throw Error(ErrorCode::InvalidArgument, "n_subjects must be >= 1");
  if (!(cfg.subject_variation >= 0.0 && cfg.subject_variation < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "subject_variation must be in [0, 1)");
  }
  if (out_dir.empty()) throw Error(ErrorCode::IoFailure, "empty output directory");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + out_dir + "': " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  manifest.metadata["generator"] = std::string(kToolName) + " synth";
  manifest.metadata["version"] = std::string(kToolVersion);
  manifest.metadata["config"] = cfg.to_json();
  manifest.subjects.resize(cfg.n_subjects);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    manifest.subjects[s].subject_id = subject_name(cfg.first_subject + s);
    manifest.subjects[s].clusters.resize(cfg.clusters_per_subject);
    fs::create_directories(fs::path(out_dir) / subject_name(cfg.first_subject + s), ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create subject directory: " + ec.message());
  }

  const std::map<std::string, std::string> tck_fields = {
      {"generator", std::string(kToolName) + " " + std::string(kToolVersion)}};
  const std::size_t total = cfg.n_subjects * cfg.clusters_per_subject;
  parallel_for(total, threads, [&](std::size_t flat) {
    const std::size_t s = flat / cfg.clusters_per_subject;
    const std::size_t c = flat % cfg.clusters_per_subject;
    const auto bundle = generate_dataset_cluster(cfg, cfg.first_subject + s, c);
    const std::string rel = subject_name(cfg.first_subject + s) + "/" + bundle.cluster.id() + ".tck";
    const std::string bytes = encode_tck(bundle.cluster, tck_fields);
    write_file_bytes((fs::path(out_dir) / rel).string(), bytes);
    auto& entry = manifest.subjects[s].clusters[c];
    entry.cluster_id = bundle.cluster.id();
    entry.file = rel;
    // Ground truth is measured on the float32-quantized coordinates the file stores.
    entry.ground_truth = compute_shape_vector(parse_tck(bytes, bundle.cluster.id()), cfg.voxel_size);
  });

  Eigen::MatrixXd features(static_cast<Eigen::Index>(cfg.n_subjects),
                           static_cast<Eigen::Index>(cfg.clusters_per_subject * kNumMeasures));
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    for (std::size_t c = 0; c < cfg.clusters_per_subject; ++c) {
      const auto a = manifest.subjects[s].clusters[c].ground_truth->to_array();
      for (std::size_t m = 0; m < kNumMeasures; ++m) {
        features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c * kNumMeasures + m)) = a[m];
      }
    }
  }
  const auto scores = synthesize_scores(features, cfg.score, cfg.seed);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) manifest.subjects[s].score = scores[s];

  write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace tractshape
