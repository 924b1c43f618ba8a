#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tractshape/bench.hpp"
#include "tractshape/model.hpp"
#include "tractshape/synth.hpp"

using namespace tractshape;

namespace {

Checkpoint small_checkpoint() {
  SubnetworkConfig cfg;
  cfg.trunk_widths = {8, 16};
  cfg.head_widths = {8};
  const TractShapeNet net(cfg, 1);
  return make_checkpoint(net, 64, TargetStandardizer{}, 42, nlohmann::json::object());
}

FiberCluster tube(std::size_t streamlines, std::uint64_t seed) {
  BundleSpec spec;
  spec.n_streamlines = streamlines;
  spec.points_per_streamline = 40;
  spec.seed = seed;
  return generate_bundle(spec).cluster;
}

}  // namespace

TEST_CASE("timing summary uses the population standard deviation") {
  const auto s = summarize_timings({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean_ms == doctest::Approx(2.5));
  CHECK(s.std_ms == doctest::Approx(std::sqrt(1.25)));
  const auto one = summarize_timings({7.0});
  CHECK(one.mean_ms == 7.0);
  CHECK(one.std_ms == 0.0);
}

TEST_CASE("bench on in-memory clusters") {
  const auto ckpt = small_checkpoint();
  const std::vector<FiberCluster> clusters{tube(10, 1), tube(40, 2)};

  SUBCASE("structure") {
    const auto r = bench_clusters(ckpt, clusters, 1.0, 3);
    CHECK(r.repetitions == 3);
    CHECK(r.neural.samples_ms.size() == 6);
    CHECK(r.oracle.samples_ms.size() == 6);
    REQUIRE(r.clusters.size() == 2);
    CHECK(r.clusters[1].n_streamlines == 40);
    CHECK(r.clusters[1].n_points == 1600);
    for (double t : r.neural.samples_ms) CHECK(t > 0.0);
    for (double t : r.oracle.samples_ms) CHECK(t > 0.0);
    const auto direct = summarize_timings(r.oracle.samples_ms);
    CHECK(r.oracle.std_ms == doctest::Approx(direct.std_ms));

    CHECK(format_bench_csv(r).rfind("method,mean_ms,std_ms,n_measurements\n", 0) == 0);
    CHECK(format_bench_clusters_csv(r).rfind("subject_id,cluster_id,n_streamlines,n_points,neural_ms,oracle_ms\n", 0) ==
          0);
    CHECK(format_bench_table(r).find("±") != std::string::npos);
  }
  SUBCASE("a single measurement has zero spread") {
    const auto r = bench_clusters(ckpt, {clusters[0]}, 1.0, 1);
    CHECK(r.neural.std_ms == 0.0);
    CHECK(r.oracle.std_ms == 0.0);
  }
  SUBCASE("invalid requests") {
    CHECK_ERROR_CODE(bench_clusters(ckpt, clusters, 1.0, 0), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(bench_clusters(ckpt, {}, 1.0, 2), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(bench_clusters(ckpt, clusters, 0.0, 2), ErrorCode::InvalidArgument);
  }
}
