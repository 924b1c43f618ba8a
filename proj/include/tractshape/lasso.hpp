#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace tractshape {

/// sign(z) * max(|z| - gamma, 0)
double soft_threshold(double z, double gamma);

struct LassoOptions {
  double tol = 1e-8;           // max absolute coefficient change per sweep
  std::size_t max_iter = 20000;  // coordinate-descent sweeps
};

struct LassoModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  bool converged = false;  // false: max_iter reached first (soft NotConverged)
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  // objective after each sweep

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  std::size_t n_nonzero() const;
};

/// Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lambda * ||w||_1,
/// with the intercept handled by centering. Columns with zero variance keep
/// a zero weight. warm_start, when given, seeds the weights.
LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                     const LassoOptions& options = {}, const Eigen::VectorXd* warm_start = nullptr);

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoModel& model, double lambda);

/// Largest violation of the optimality conditions: |g_j| <= lambda for zero
/// weights and g_j = lambda * sign(w_j) otherwise, where
/// g_j = X_j^T (y - Xw - b) / n.
double kkt_violation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoModel& model, double lambda);

/// max_j |X_j^T (y - mean(y))| / n, the smallest lambda giving w = 0.
double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// count values from lambda_max down `decades` decades, log-spaced, descending.
std::vector<double> lambda_grid(double lambda_max, std::size_t count = 20, double decades = 3.0);

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population; 1 for constant columns

  static Standardization fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

/// Fits on columns standardized with the rows' own statistics and maps the
/// solution back to the original feature scale.
LassoModel lasso_fit_standardized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                  const LassoOptions& options = {});

/// Fold index per row: a seeded permutation dealt round-robin into k folds.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct LassoCvResult {
  double best_lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> cv_error;  // mean held-out MSE per lambda
  std::vector<std::size_t> folds;
  LassoModel model;  // refit on every row at best_lambda, original feature scale
};

/// k-fold cross-validation on mean squared error. Each fold standardizes
/// with its own training rows. An empty grid uses lambda_grid() over the
/// standardized data. Throws TooFewRows when there are fewer than k rows.
LassoCvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<double> grid = {},
                       std::size_t k = 5, std::uint64_t seed = 42, const LassoOptions& options = {}, int threads = 1);

}  // namespace tractshape
