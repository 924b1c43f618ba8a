#include "tractshape/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "tractshape/error.hpp"
#include "tractshape/tck.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t DatasetManifest::cluster_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.clusters.size();
  return n;
}

std::vector<ClusterRef> DatasetManifest::all_clusters() const {
  std::vector<std::size_t> all(subjects.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return clusters_of(all);
}

std::vector<ClusterRef> DatasetManifest::clusters_of(const std::vector<std::size_t>& subject_indices) const {
  std::vector<ClusterRef> refs;
  for (const auto s : subject_indices) {
    for (std::size_t c = 0; c < subjects.at(s).clusters.size(); ++c) refs.push_back({s, c});
  }
  return refs;
}

std::string DatasetManifest::resolve(const ClusterEntry& entry) const {
  const fs::path p(entry.file);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).string();
}

FiberCluster DatasetManifest::load(const ClusterRef& ref) const {
  const auto& entry = at(ref);
  return read_tck(resolve(entry), entry.cluster_id, subjects.at(ref.subject).subject_id);
}

json shape_vector_to_json(const ShapeVector& v) {
  json j = json::object();
  const auto a = v.to_array();
  for (std::size_t i = 0; i < kNumMeasures; ++i) j[std::string(kMeasureKeys[i])] = a[i];
  return j;
}

ShapeVector shape_vector_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, where + ": expected an object");
  std::array<double, kNumMeasures> a{};
  for (std::size_t i = 0; i < kNumMeasures; ++i) {
    const std::string key(kMeasureKeys[i]);
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
      throw Error(ErrorCode::SchemaError, where + "." + key + ": missing or not a number");
    }
    a[i] = it->get<double>();
    if (!std::isfinite(a[i]) || a[i] < 0.0) {
      throw Error(ErrorCode::SchemaError, where + "." + key + ": must be finite and >= 0");
    }
  }
  return ShapeVector::from_array(a);
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::SchemaError, where + "." + key + ": missing field");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw Error(ErrorCode::SchemaError, where + "." + key + ": expected a non-empty string");
  }
  return v.get<std::string>();
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir, bool check_files,
                               const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann's message carries the line and column.
    throw Error(ErrorCode::SchemaError, source_name + ": " + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::SchemaError, source_name + ": top level must be an object");

  DatasetManifest m;
  m.base_dir = base_dir;
  if (const auto it = root.find("metadata"); it != root.end()) m.metadata = *it;

  const auto& subjects = require(root, "subjects", "$");
  if (!subjects.is_array()) throw Error(ErrorCode::SchemaError, "$.subjects: expected an array");

  std::set<std::string> subject_ids;
  for (std::size_t si = 0; si < subjects.size(); ++si) {
    const std::string where = "$.subjects[" + std::to_string(si) + "]";
    const auto& sj = subjects[si];
    if (!sj.is_object()) throw Error(ErrorCode::SchemaError, where + ": expected an object");

    SubjectEntry subject;
    subject.subject_id = require_string(sj, "subject_id", where);
    if (!subject_ids.insert(subject.subject_id).second) {
      throw Error(ErrorCode::SchemaError, where + ".subject_id: duplicate '" + subject.subject_id + "'");
    }
    if (const auto it = sj.find("score"); it != sj.end() && !it->is_null()) {
      if (!it->is_number() || !std::isfinite(it->get<double>())) {
        throw Error(ErrorCode::SchemaError, where + ".score: expected a finite number");
      }
      subject.score = it->get<double>();
    }

    const auto& clusters = require(sj, "clusters", where);
    if (!clusters.is_array()) throw Error(ErrorCode::SchemaError, where + ".clusters: expected an array");
    std::set<std::string> cluster_ids;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      const std::string cwhere = where + ".clusters[" + std::to_string(ci) + "]";
      const auto& cj = clusters[ci];
      if (!cj.is_object()) throw Error(ErrorCode::SchemaError, cwhere + ": expected an object");
      ClusterEntry entry;
      entry.cluster_id = require_string(cj, "cluster_id", cwhere);
      if (!cluster_ids.insert(entry.cluster_id).second) {
        throw Error(ErrorCode::SchemaError, cwhere + ".cluster_id: duplicate '" + entry.cluster_id + "'");
      }
      entry.file = require_string(cj, "file", cwhere);
      if (const auto it = cj.find("ground_truth"); it != cj.end() && !it->is_null()) {
        entry.ground_truth = shape_vector_from_json(*it, cwhere + ".ground_truth");
      }
      subject.clusters.push_back(std::move(entry));
      if (check_files) {
        const auto resolved = m.resolve(subject.clusters.back());
        if (!fs::exists(resolved)) {
          throw Error(ErrorCode::SchemaError, cwhere + ".file: '" + resolved + "' does not exist");
        }
      }
    }
    m.subjects.push_back(std::move(subject));
  }
  return m;
}

DatasetManifest read_manifest(const std::string& path, bool check_files) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoFailure, "no such file '" + path + "'");
  const auto dir = fs::path(path).parent_path().string();
  return parse_manifest(read_file_bytes(path), dir, check_files, path);
}

std::string dump_manifest(const DatasetManifest& manifest) {
  json root = json::object();
  root["format"] = "tractshape-manifest";
  root["version"] = 1;
  root["metadata"] = manifest.metadata;
  json subjects = json::array();
  for (const auto& s : manifest.subjects) {
    json sj = json::object();
    sj["subject_id"] = s.subject_id;
    if (s.score) sj["score"] = *s.score;
    json clusters = json::array();
    for (const auto& c : s.clusters) {
      json cj = json::object();
      cj["cluster_id"] = c.cluster_id;
      cj["file"] = c.file;
      if (c.ground_truth) cj["ground_truth"] = shape_vector_to_json(*c.ground_truth);
      clusters.push_back(std::move(cj));
    }
    sj["clusters"] = std::move(clusters);
    subjects.push_back(std::move(sj));
  }
  root["subjects"] = std::move(subjects);
  return root.dump(1) + "\n";
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  write_file_bytes(path, dump_manifest(manifest));
}

}  // namespace tractshape
