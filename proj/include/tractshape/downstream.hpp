#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tractshape/lasso.hpp"
#include "tractshape/manifest.hpp"
#include "tractshape/model.hpp"

namespace tractshape {

/// One row per subject; column c * 5 + m holds measure m of the c-th cluster.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> subject_ids;
  std::vector<std::string> column_names;  // "<cluster_id>.<measure key>"
};

/// rows[s][c] is the shape vector of cluster c of subject s.
FeatureMatrix make_feature_matrix(const std::vector<std::vector<ShapeVector>>& rows,
                                  std::vector<std::string> subject_ids, const std::vector<std::string>& cluster_ids);

/// Features from the manifest's ground truth. Every subject must carry the
/// same cluster ids; columns follow the first subject's cluster order.
FeatureMatrix oracle_features(const DatasetManifest& manifest);
/// Features from network predictions on every cluster.
FeatureMatrix model_features(const DatasetManifest& manifest, const Checkpoint& ckpt, int threads = 1);

/// Per-subject scores; SchemaError when one is missing.
Eigen::VectorXd manifest_scores(const DatasetManifest& manifest);

struct DownstreamResult {
  std::string feature_source;
  double r = 0.0;
  double chosen_lambda = 0.0;
  std::size_t n_nonzero = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// 80/20 subject split drawn from the seed, lasso_cv on the training rows,
/// Pearson r between predicted and true scores on the held-out rows. The
/// split depends only on the row count and seed, so two feature sources over
/// the same subjects see the same split.
DownstreamResult downstream_eval(const FeatureMatrix& features, const Eigen::VectorXd& scores,
                                 const std::string& feature_source, std::uint64_t seed, int threads = 1,
                                 double train_fraction = 0.8, std::size_t folds = 5);

/// CSV: feature_source,r,chosen_lambda,n_nonzero
std::string format_downstream_csv(const std::vector<DownstreamResult>& results);
std::string format_downstream_table(const std::vector<DownstreamResult>& results);

}  // namespace tractshape
