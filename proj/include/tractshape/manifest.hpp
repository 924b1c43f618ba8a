#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractshape/geometry.hpp"

namespace tractshape {

struct ClusterEntry {
  std::string cluster_id;
  std::string file;  // as written in the manifest, usually relative to it
  std::optional<ShapeVector> ground_truth;
};

struct SubjectEntry {
  std::string subject_id;
  std::optional<double> score;
  std::vector<ClusterEntry> clusters;
};

/// Flat handle to one cluster of a manifest.
struct ClusterRef {
  std::size_t subject = 0;
  std::size_t cluster = 0;
};

struct DatasetManifest {
  std::vector<SubjectEntry> subjects;
  nlohmann::json metadata = nlohmann::json::object();  // generator, version, effective config
  std::string base_dir;                                // directory the relative paths resolve against

  std::size_t cluster_count() const;
  /// All clusters, subject-major, in manifest order.
  std::vector<ClusterRef> all_clusters() const;
  std::vector<ClusterRef> clusters_of(const std::vector<std::size_t>& subject_indices) const;
  std::string resolve(const ClusterEntry& entry) const;
  const ClusterEntry& at(const ClusterRef& ref) const { return subjects.at(ref.subject).clusters.at(ref.cluster); }
  ClusterEntry& at(const ClusterRef& ref) { return subjects.at(ref.subject).clusters.at(ref.cluster); }
  FiberCluster load(const ClusterRef& ref) const;
};

/// Validates and loads a manifest; relative cluster paths resolve against
/// the manifest's directory. Errors are SchemaError with a JSON-path or
/// line/column diagnostic.
DatasetManifest read_manifest(const std::string& path, bool check_files = true);
DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir, bool check_files = true,
                               const std::string& source_name = "<memory>");
std::string dump_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

nlohmann::json shape_vector_to_json(const ShapeVector& v);
ShapeVector shape_vector_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace tractshape
