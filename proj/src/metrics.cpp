#include "tractshape/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "tractshape/error.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::ShapeMismatch, "pearson_r: inputs differ in length");
  if (xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "pearson_r: need at least 2 pairs");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::ZeroVariance, "pearson_r: an input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double nmse(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::ShapeMismatch, "nmse: inputs differ in length");
  if (gt.empty()) throw Error(ErrorCode::InvalidArgument, "nmse: empty input");
  double mean = 0.0;
  for (const double g : gt) mean += g;
  mean /= static_cast<double>(gt.size());
  double err = 0.0, var = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    err += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    var += (gt[i] - mean) * (gt[i] - mean);
  }
  if (!(var > 0.0)) throw Error(ErrorCode::ZeroVariance, "nmse: ground truth has zero variance");
  return err / var;
}

MeanStd mean_and_sample_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  for (const double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

MetricsReport evaluate_predictions(std::span<const ShapeVector> predicted, std::span<const ShapeVector> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::ShapeMismatch, "evaluate: prediction and truth counts differ");
  }
  MetricsReport report;
  report.n_clusters = truth.size();
  std::vector<double> p(truth.size()), t(truth.size());
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      p[i] = predicted[i][m];
      t[i] = truth[i][m];
    }
    try {
      report.pearson[m] = pearson_r(p, t);
      report.nmse[m] = nmse(p, t);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(kMeasureLabels[m]) + ": " + e.what());
    }
  }
  report.pearson_average = mean_and_sample_std(report.pearson);
  report.nmse_average = mean_and_sample_std(report.nmse);
  return report;
}

std::string format_metrics_csv(const MetricsReport& report) {
  std::string out = "measure,pearson_r,pearson_r_std,nmse,nmse_std\n";
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    out += std::string(kMeasureLabels[m]) + "," + format_g(report.pearson[m]) + ",," + format_g(report.nmse[m]) + ",\n";
  }
  out += "Average," + format_g(report.pearson_average.mean) + "," + format_g(report.pearson_average.stddev) + "," +
         format_g(report.nmse_average.mean) + "," + format_g(report.nmse_average.stddev) + "\n";
  return out;
}

std::string format_metrics_table(const MetricsReport& report, const std::string& method_name) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-20s | %-17s | %-17s\n", "Shapes", (method_name + " r").c_str(),
                (method_name + " nMSE").c_str());
  out += line;
  out += std::string(60, '-') + "\n";
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    std::snprintf(line, sizeof line, "%-20s | %-17.3f | %-17.3f\n", std::string(kMeasureLabels[m]).c_str(),
                  report.pearson[m], report.nmse[m]);
    out += line;
  }
  char r_avg[64], e_avg[64];
  std::snprintf(r_avg, sizeof r_avg, "%.3f ± %.3f", report.pearson_average.mean, report.pearson_average.stddev);
  std::snprintf(e_avg, sizeof e_avg, "%.3f ± %.3f", report.nmse_average.mean, report.nmse_average.stddev);
  std::snprintf(line, sizeof line, "%-20s | %-18s | %-18s\n", "Average", r_avg, e_avg);
  out += line;
  return out;
}

}  // namespace tractshape
