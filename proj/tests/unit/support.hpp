#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tractshape/error.hpp"
#include "tractshape/geometry.hpp"

namespace testing {

using tractshape::FiberCluster;
using tractshape::Point3;
using tractshape::Streamline;

inline Streamline line(std::vector<Point3> pts) { return Streamline(std::move(pts)); }

inline FiberCluster cluster_of(std::vector<Streamline> s, std::string id = "c", std::string subject = "s") {
  return FiberCluster(std::move(id), std::move(subject), std::move(s));
}

inline FiberCluster random_cluster(std::size_t n_streamlines, std::size_t points, std::uint64_t seed,
                                   double scale = 30.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Streamline> out;
  for (std::size_t s = 0; s < n_streamlines; ++s) {
    std::vector<Point3> pts;
    for (std::size_t p = 0; p < points; ++p) pts.push_back({u(rng), u(rng), u(rng)});
    out.emplace_back(std::move(pts));
  }
  return cluster_of(std::move(out));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tractshape_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace testing

/// Runs stmt and checks that it throws tractshape::Error with the given code.
#define CHECK_ERROR_CODE(stmt, expected_code)                              \
  do {                                                                     \
    bool thrown_ = false;                                                  \
    try {                                                                  \
      stmt;                                                                \
    } catch (const tractshape::Error& e_) {                                \
      thrown_ = true;                                                      \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());              \
    }                                                                      \
    CHECK_MESSAGE(thrown_, "expected " #expected_code " from " #stmt);     \
  } while (0)
