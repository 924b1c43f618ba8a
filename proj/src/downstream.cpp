#include "tractshape/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>

#include "tractshape/error.hpp"
#include "tractshape/metrics.hpp"
#include "tractshape/trainer.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

FeatureMatrix make_feature_matrix(const std::vector<std::vector<ShapeVector>>& rows,
                                  std::vector<std::string> subject_ids, const std::vector<std::string>& cluster_ids) {
  if (rows.size() != subject_ids.size()) throw Error(ErrorCode::ShapeMismatch, "features: subject count mismatch");
  FeatureMatrix fm;
  const std::size_t n_clusters = cluster_ids.size();
  fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_clusters * kNumMeasures));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != n_clusters) {
      throw Error(ErrorCode::SchemaError, "features: subject '" + subject_ids[s] + "' has " +
                                              std::to_string(rows[s].size()) + " clusters, expected " +
                                              std::to_string(n_clusters));
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
      const auto a = rows[s][c].to_array();
      for (std::size_t m = 0; m < kNumMeasures; ++m) {
        if (!std::isfinite(a[m])) throw Error(ErrorCode::NonFiniteValue, "features: non-finite entry");
        fm.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c * kNumMeasures + m)) = a[m];
      }
    }
  }
  for (const auto& c : cluster_ids) {
    for (const auto key : kMeasureKeys) fm.column_names.push_back(c + "." + std::string(key));
  }
  fm.subject_ids = std::move(subject_ids);
  return fm;
}

namespace {

// refs[s][c]: manifest position of column cluster c in subject s.
std::vector<std::vector<ClusterRef>> aligned_refs(const DatasetManifest& manifest, std::vector<std::string>& cluster_ids) {
  if (manifest.subjects.empty()) throw Error(ErrorCode::TooFewRows, "features: manifest has no subjects");
  cluster_ids.clear();
  for (const auto& c : manifest.subjects.front().clusters) cluster_ids.push_back(c.cluster_id);
  std::vector<std::vector<ClusterRef>> refs(manifest.subjects.size());
  for (std::size_t s = 0; s < manifest.subjects.size(); ++s) {
    const auto& subject = manifest.subjects[s];
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < subject.clusters.size(); ++c) index.emplace(subject.clusters[c].cluster_id, c);
    if (index.size() != cluster_ids.size()) {
      throw Error(ErrorCode::SchemaError, "features: subject '" + subject.subject_id + "' has a different cluster set");
    }
    for (const auto& id : cluster_ids) {
      const auto it = index.find(id);
      if (it == index.end()) {
        throw Error(ErrorCode::SchemaError, "features: subject '" + subject.subject_id + "' lacks cluster '" + id + "'");
      }
      refs[s].push_back({s, it->second});
    }
  }
  return refs;
}

std::vector<std::string> subject_ids_of(const DatasetManifest& manifest) {
  std::vector<std::string> ids;
  for (const auto& s : manifest.subjects) ids.push_back(s.subject_id);
  return ids;
}

}  // namespace

FeatureMatrix oracle_features(const DatasetManifest& manifest) {
  std::vector<std::string> cluster_ids;
  const auto refs = aligned_refs(manifest, cluster_ids);
  std::vector<std::vector<ShapeVector>> rows(refs.size());
  for (std::size_t s = 0; s < refs.size(); ++s) {
    for (const auto& ref : refs[s]) {
      const auto& entry = manifest.at(ref);
      if (!entry.ground_truth) {
        throw Error(ErrorCode::SchemaError, manifest.subjects[s].subject_id + "/" + entry.cluster_id + ": missing ground_truth");
      }
      rows[s].push_back(*entry.ground_truth);
    }
  }
  return make_feature_matrix(rows, subject_ids_of(manifest), cluster_ids);
}

FeatureMatrix model_features(const DatasetManifest& manifest, const Checkpoint& ckpt, int threads) {
  std::vector<std::string> cluster_ids;
  const auto refs = aligned_refs(manifest, cluster_ids);
  std::vector<ClusterRef> flat;
  for (const auto& r : refs) flat.insert(flat.end(), r.begin(), r.end());
  const auto predicted = predict_clusters(ckpt, manifest, flat, threads);
  std::vector<std::vector<ShapeVector>> rows(refs.size());
  std::size_t i = 0;
  for (std::size_t s = 0; s < refs.size(); ++s) {
    for (std::size_t c = 0; c < refs[s].size(); ++c) rows[s].push_back(predicted[i++]);
  }
  return make_feature_matrix(rows, subject_ids_of(manifest), cluster_ids);
}

Eigen::VectorXd manifest_scores(const DatasetManifest& manifest) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(manifest.subjects.size()));
  for (std::size_t s = 0; s < manifest.subjects.size(); ++s) {
    const auto& score = manifest.subjects[s].score;
    if (!score) throw Error(ErrorCode::SchemaError, "subject '" + manifest.subjects[s].subject_id + "': missing score");
    y[static_cast<Eigen::Index>(s)] = *score;
  }
  return y;
}

DownstreamResult downstream_eval(const FeatureMatrix& features, const Eigen::VectorXd& scores,
                                 const std::string& feature_source, std::uint64_t seed, int threads,
                                 double train_fraction, std::size_t folds) {
  const auto n = static_cast<std::size_t>(features.values.rows());
  if (scores.size() != features.values.rows()) throw Error(ErrorCode::ShapeMismatch, "downstream: score count mismatch");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "downstream: train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Split, 1));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n < 2 ? n
                                    : std::clamp<std::size_t>(
                                          static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))),
                                          1, n - 1);
  if (n_train < folds || n - n_train < 2) {
    throw Error(ErrorCode::TooFewRows, "downstream: " + std::to_string(n) + " subjects is too few for a " +
                                           std::to_string(folds) + "-fold fit and a 2-subject test split");
  }
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  auto gather = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
    X.resize(static_cast<Eigen::Index>(rows.size()), features.values.cols());
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = features.values.row(static_cast<Eigen::Index>(rows[i]));
      y[static_cast<Eigen::Index>(i)] = scores[static_cast<Eigen::Index>(rows[i])];
    }
  };
  Eigen::MatrixXd Xtr, Xte;
  Eigen::VectorXd ytr, yte;
  gather(train_rows, Xtr, ytr);
  gather(test_rows, Xte, yte);

  const auto cv = lasso_cv(Xtr, ytr, {}, folds, seed, {}, threads);
  const Eigen::VectorXd pred = cv.model.predict(Xte);

  DownstreamResult result;
  result.feature_source = feature_source;
  result.chosen_lambda = cv.best_lambda;
  result.n_nonzero = cv.model.n_nonzero();
  result.n_train = train_rows.size();
  result.n_test = test_rows.size();
  const std::vector<double> p(pred.data(), pred.data() + pred.size());
  const std::vector<double> t(yte.data(), yte.data() + yte.size());
  try {
    result.r = pearson_r(p, t);
  } catch (const Error& e) {
    // A model that selects no feature predicts a constant.
    if (e.code() != ErrorCode::ZeroVariance) throw;
    log_warning("downstream: " + feature_source + " predictions are constant; reporting r = 0");
    result.r = 0.0;
  }
  return result;
}

std::string format_downstream_csv(const std::vector<DownstreamResult>& results) {
  std::string out = "feature_source,r,chosen_lambda,n_nonzero\n";
  for (const auto& r : results) {
    out += r.feature_source + "," + format_g(r.r) + "," + format_g(r.chosen_lambda) + "," +
           std::to_string(r.n_nonzero) + "\n";
  }
  return out;
}

std::string format_downstream_table(const std::vector<DownstreamResult>& results) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s | %-8s | %-12s | %s\n", "Features", "r", "lambda", "nonzero");
  out += line;
  out += std::string(52, '-') + "\n";
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-16s | %-8.3f | %-12.4g | %zu\n", r.feature_source.c_str(), r.r,
                  r.chosen_lambda, r.n_nonzero);
    out += line;
  }
  return out;
}

}  // namespace tractshape
