#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "tractshape/metrics.hpp"

using namespace tractshape;

namespace {

// Textbook forms, written independently of the library's two-pass sums.
double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy));
}

double brute_nmse(const std::vector<double>& p, const std::vector<double>& g) {
  double mean = 0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    num += std::pow(p[i] - g[i], 2);
    den += std::pow(g[i] - mean, 2);
  }
  return num / den;
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(pearson_r(a, std::vector<double>{2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_r(a, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pearson_r(a, std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_ERROR_CODE(pearson_r(a, std::vector<double>{1, 1, 1, 1}), ErrorCode::ZeroVariance);
  CHECK_ERROR_CODE(pearson_r(a, std::vector<double>{1, 2}), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(pearson_r(std::vector<double>{1}, std::vector<double>{2}), ErrorCode::InvalidArgument);
}

TEST_CASE("nmse examples") {
  const std::vector<double> g{1, 2, 3, 4};
  CHECK(nmse(g, g) == 0.0);
  CHECK(nmse(std::vector<double>{2.5, 2.5, 2.5, 2.5}, g) == doctest::Approx(1.0).epsilon(1e-12));
  // errors 1,0,0,1 over variance sum 5
  CHECK(nmse(std::vector<double>{2, 2, 3, 3}, g) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_ERROR_CODE(nmse(g, std::vector<double>{7, 7, 7, 7}), ErrorCode::ZeroVariance);
}

TEST_CASE("metrics match brute-force formulas on random vectors") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(3, 40);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = nd(rng);
      y[i] = 0.5 * x[i] + nd(rng);
    }
    CHECK(std::abs(pearson_r(x, y) - brute_pearson(x, y)) < 1e-9);
    CHECK(std::abs(nmse(x, y) - brute_nmse(x, y)) < 1e-9);
  }
}

TEST_CASE("affine invariance") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(20), y(20), xa(20), ya(20), ya_neg(20);
    const double a = 0.1 + std::abs(nd(rng)) * 5, b = nd(rng) * 10;
    const double c = 0.1 + std::abs(nd(rng)) * 5, d = nd(rng) * 10;
    for (std::size_t i = 0; i < 20; ++i) {
      x[i] = nd(rng);
      y[i] = x[i] + nd(rng);
      xa[i] = a * x[i] + b;
      ya[i] = c * y[i] + d;
      ya_neg[i] = -c * y[i] + d;
    }
    const double r = pearson_r(x, y);
    CHECK(pearson_r(xa, ya) == doctest::Approx(r).epsilon(1e-9));
    CHECK(pearson_r(xa, ya_neg) == doctest::Approx(-r).epsilon(1e-9));
    CHECK(pearson_r(x, y) == doctest::Approx(pearson_r(y, x)).epsilon(1e-12));
    // nMSE is scale-free: scaling prediction and truth together leaves it unchanged,
    // and so does a common shift.
    std::vector<double> xs(20), ys(20);
    for (std::size_t i = 0; i < 20; ++i) {
      xs[i] = a * x[i] + b;
      ys[i] = a * y[i] + b;
    }
    CHECK(nmse(xs, ys) == doctest::Approx(nmse(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("evaluate_predictions averages with the sample standard deviation") {
  std::vector<ShapeVector> truth, pred;
  for (int i = 0; i < 6; ++i) {
    std::array<double, kNumMeasures> t{}, p{};
    for (std::size_t m = 0; m < kNumMeasures; ++m) {
      t[m] = i + static_cast<double>(m);
      p[m] = t[m] + ((i % 2) ? 0.1 * static_cast<double>(m) : -0.1 * static_cast<double>(m));
    }
    truth.push_back(ShapeVector::from_array(t));
    pred.push_back(ShapeVector::from_array(p));
  }
  const auto rep = evaluate_predictions(pred, truth);
  CHECK(rep.n_clusters == 6);
  CHECK(rep.pearson[0] == doctest::Approx(1.0));
  CHECK(rep.nmse[0] == 0.0);
  double mean = 0;
  for (double v : rep.nmse) mean += v;
  mean /= kNumMeasures;
  double ss = 0;
  for (double v : rep.nmse) ss += (v - mean) * (v - mean);
  CHECK(rep.nmse_average.mean == doctest::Approx(mean));
  CHECK(rep.nmse_average.stddev == doctest::Approx(std::sqrt(ss / (kNumMeasures - 1))));

  const auto csv = format_metrics_csv(rep);
  CHECK(csv.rfind("measure,pearson_r,pearson_r_std,nmse,nmse_std\n", 0) == 0);
  CHECK(format_metrics_table(rep).find("Average") != std::string::npos);
  pred.pop_back();
  CHECK_ERROR_CODE(evaluate_predictions(pred, truth), ErrorCode::ShapeMismatch);
}
