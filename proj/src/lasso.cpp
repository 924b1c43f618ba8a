#include "tractshape/lasso.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tractshape/error.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

Eigen::VectorXd LassoModel::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != weights.size()) throw Error(ErrorCode::ShapeMismatch, "lasso predict: feature count mismatch");
  return (X * weights).array() + intercept;
}

std::size_t LassoModel::n_nonzero() const {
  std::size_t n = 0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) n += weights[j] != 0.0 ? 1 : 0;
  return n;
}

namespace {

void check_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (X.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "lasso: X and y differ in row count");
  if (X.rows() < 2) throw Error(ErrorCode::TooFewRows, "lasso: need at least 2 rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lasso: lambda must be >= 0");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::NonFiniteValue, "lasso: non-finite input");
}

}  // namespace

LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, const LassoOptions& options,
                     const Eigen::VectorXd* warm_start) {
  check_problem(X, y, lambda);
  const Eigen::Index n = X.rows(), p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose() * inv_n;

  LassoModel model;
  model.weights = Eigen::VectorXd::Zero(p);
  if (warm_start != nullptr) {
    if (warm_start->size() != p) throw Error(ErrorCode::ShapeMismatch, "lasso: warm start has wrong length");
    model.weights = *warm_start;
  }
  // Columns with (numerically) zero variance carry no information.
  const double var_floor = 1e-24 * std::max(1.0, col_sq.size() > 0 ? col_sq.maxCoeff() : 1.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (col_sq[j] <= var_floor) model.weights[j] = 0.0;
  }
  Eigen::VectorXd residual = yc - Xc * model.weights;

  auto objective = [&] {
    return 0.5 * inv_n * residual.squaredNorm() + lambda * model.weights.lpNorm<1>();
  };
  for (std::size_t sweep = 0; sweep < options.max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] <= var_floor) continue;
      const double old = model.weights[j];
      const double rho = inv_n * Xc.col(j).dot(residual) + col_sq[j] * old;
      const double updated = soft_threshold(rho, lambda) / col_sq[j];
      if (updated != old) {
        residual.noalias() -= (updated - old) * Xc.col(j);
        model.weights[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    model.objective_trace.push_back(objective());
    model.iterations = sweep + 1;
#ifndef NDEBUG
    if (model.objective_trace.size() >= 2) {
      const double prev = model.objective_trace[model.objective_trace.size() - 2];
      assert(model.objective_trace.back() <= prev + 1e-12 * std::max(1.0, std::abs(prev)));
    }
#endif
    if (max_change < options.tol) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged) {
    log_warning("lasso: NotConverged after " + std::to_string(model.iterations) + " sweeps (lambda " +
                format_g(lambda) + ")");
  }
  model.intercept = y_mean - x_mean.dot(model.weights);
  return model;
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoModel& model, double lambda) {
  const Eigen::VectorXd r = y - model.predict(X);
  return 0.5 * r.squaredNorm() / static_cast<double>(X.rows()) + lambda * model.weights.lpNorm<1>();
}

double kkt_violation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoModel& model, double lambda) {
  const Eigen::VectorXd r = y - model.predict(X);
  const Eigen::VectorXd g = X.transpose() * r / static_cast<double>(X.rows());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double w = model.weights[j];
    const double v = w == 0.0 ? std::max(0.0, std::abs(g[j]) - lambda) : std::abs(g[j] - lambda * (w > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "lambda_max: X and y differ in row count");
  if (X.rows() == 0 || X.cols() == 0) return 0.0;
  // Same arithmetic as the first coordinate update from w = 0, so lambda_max
  // itself already yields the zero solution.
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  double best = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) best = std::max(best, std::abs(inv_n * Xc.col(j).dot(yc)));
  return best;
}

std::vector<double> lambda_grid(double lmax, std::size_t count, double decades) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "lambda_grid: count must be positive");
  if (!(lmax > 0.0) || !std::isfinite(lmax)) throw Error(ErrorCode::InvalidArgument, "lambda_grid: lambda_max must be positive");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = lmax * std::pow(10.0, -decades * t);
  }
  return grid;
}

Standardization Standardization::fit(const Eigen::MatrixXd& X) {
  Standardization s;
  s.mean = X.colwise().mean().transpose();
  s.stddev.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.mean[j]).square().mean());
    s.stddev[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) throw Error(ErrorCode::ShapeMismatch, "standardize: feature count mismatch");
  return (X.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
}

namespace {

LassoModel to_original_scale(LassoModel m, const Standardization& s) {
  m.weights = m.weights.cwiseQuotient(s.stddev);
  m.intercept -= s.mean.dot(m.weights);
  return m;
}

}  // namespace

LassoModel lasso_fit_standardized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                  const LassoOptions& options) {
  const auto s = Standardization::fit(X);
  return to_original_scale(lasso_fit(s.apply(X), y, lambda, options), s);
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "folds: k must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Folds));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> folds(n);
  for (std::size_t i = 0; i < n; ++i) folds[order[i]] = i % k;
  return folds;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

}  // namespace

LassoCvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<double> grid, std::size_t k,
                       std::uint64_t seed, const LassoOptions& options, int threads) {
  if (X.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "lasso_cv: X and y differ in row count");
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "lasso_cv: need at least 2 folds");
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < k || n < 3) {
    throw Error(ErrorCode::TooFewRows, "lasso_cv: " + std::to_string(n) + " rows is too few for " + std::to_string(k) +
                                           " folds");
  }
  const auto full_std = Standardization::fit(X);
  if (grid.empty()) grid = lambda_grid(std::max(lambda_max(full_std.apply(X), y), 1e-12));
  for (const double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::InvalidArgument, "lasso_cv: lambdas must be >= 0");
  }

  LassoCvResult result;
  result.lambdas = grid;
  result.folds = fold_assignment(n, k, seed);
  std::vector<std::vector<double>> fold_err(k, std::vector<double>(grid.size(), 0.0));

  // Each fold walks the grid from large to small lambda with warm starts.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });
  parallel_for(k, threads, [&](std::size_t f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i) (result.folds[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd Xtr = take_rows(X, train_rows);
    const Eigen::VectorXd ytr = take_rows(y, train_rows);
    const Eigen::MatrixXd Xte = take_rows(X, test_rows);
    const Eigen::VectorXd yte = take_rows(y, test_rows);
    const auto s = Standardization::fit(Xtr);
    const Eigen::MatrixXd Ztr = s.apply(Xtr);
    const Eigen::MatrixXd Zte = s.apply(Xte);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(X.cols());
    for (const std::size_t g : order) {
      const auto m = lasso_fit(Ztr, ytr, grid[g], options, &warm);
      warm = m.weights;
      fold_err[f][g] = (yte - m.predict(Zte)).squaredNorm() / static_cast<double>(test_rows.size());
    }
  });

  result.cv_error.assign(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t f = 0; f < k; ++f) result.cv_error[g] += fold_err[f][g];
    result.cv_error[g] /= static_cast<double>(k);
  }
  // Ties go to the larger lambda (sparser model).
  std::size_t best = order.front();
  for (const std::size_t g : order) {
    if (result.cv_error[g] < result.cv_error[best]) best = g;
  }
  result.best_lambda = grid[best];
  result.model = to_original_scale(lasso_fit(full_std.apply(X), y, result.best_lambda, options), full_std);
  return result;
}

}  // namespace tractshape
