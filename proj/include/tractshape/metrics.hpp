#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "tractshape/geometry.hpp"

namespace tractshape {

/// Pearson correlation. Throws ZeroVariance when either input is constant
/// and InvalidArgument for fewer than 2 pairs.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

/// sum (pred - gt)^2 / sum (gt - mean(gt))^2: 0 for a perfect predictor,
/// 1 for predicting the ground-truth mean.
double nmse(std::span<const double> pred, std::span<const double> gt);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

MeanStd mean_and_sample_std(std::span<const double> values);

struct MetricsReport {
  std::array<double, kNumMeasures> pearson{};
  std::array<double, kNumMeasures> nmse{};
  MeanStd pearson_average;
  MeanStd nmse_average;
  std::size_t n_clusters = 0;
};

MetricsReport evaluate_predictions(std::span<const ShapeVector> predicted, std::span<const ShapeVector> truth);

/// CSV: measure,pearson_r,pearson_r_std,nmse,nmse_std (the std columns are
/// filled on the Average row only).
std::string format_metrics_csv(const MetricsReport& report);
/// Aligned text table with one row per measure plus "Average  mean ± std".
std::string format_metrics_table(const MetricsReport& report, const std::string& method_name = "TractShapeNet");

}  // namespace tractshape
