#include "tractshape/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "tractshape/error.hpp"
#include "tractshape/sampler.hpp"
#include "tractshape/shape_oracle.hpp"
#include "tractshape/trainer.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

TimingStats summarize_timings(std::vector<double> samples_ms) {
  TimingStats s;
  s.samples_ms = std::move(samples_ms);
  if (s.samples_ms.empty()) return s;
  for (const double v : s.samples_ms) s.mean_ms += v;
  s.mean_ms /= static_cast<double>(s.samples_ms.size());
  double ss = 0.0;
  for (const double v : s.samples_ms) ss += (v - s.mean_ms) * (v - s.mean_ms);
  s.std_ms = std::sqrt(ss / static_cast<double>(s.samples_ms.size()));
  return s;
}

namespace {

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

// Keeps the optimizer from discarding timed work.
volatile double g_sink = 0.0;

void time_cluster(const Predictor& predictor, const FiberCluster& cluster, std::uint64_t sample_seed,
                  std::size_t n_points, double voxel_size, std::size_t repetitions, ClusterTiming& row,
                  std::vector<double>& neural, std::vector<double>& oracle) {
  auto run_neural = [&] { g_sink = g_sink + predictor.predict(random_sample(cluster, n_points, sample_seed)).length; };
  auto run_oracle = [&] { g_sink = g_sink + compute_shape_vector(cluster, voxel_size).volume; };
  run_neural();
  run_oracle();
  double n_sum = 0.0, o_sum = 0.0;
  for (std::size_t r = 0; r < repetitions; ++r) {
    const double tn = time_ms(run_neural);
    const double to = time_ms(run_oracle);
    neural.push_back(tn);
    oracle.push_back(to);
    n_sum += tn;
    o_sum += to;
  }
  row.n_streamlines = cluster.streamlines().size();
  row.n_points = cluster.total_points();
  row.neural_ms = n_sum / static_cast<double>(repetitions);
  row.oracle_ms = o_sum / static_cast<double>(repetitions);
}

void check_args(std::size_t count, std::size_t repetitions, double voxel_size) {
  if (repetitions == 0) throw Error(ErrorCode::InvalidArgument, "bench: repetitions must be positive");
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "bench: no clusters to time");
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCode::InvalidArgument, "bench: voxel size must be positive");
  }
}

}  // namespace

BenchResult bench(const Checkpoint& ckpt, const DatasetManifest& manifest, const std::vector<ClusterRef>& refs,
                  double voxel_size, std::size_t repetitions) {
  check_args(refs.size(), repetitions, voxel_size);
  const Predictor predictor(ckpt);
  BenchResult result;
  result.repetitions = repetitions;
  result.voxel_size = voxel_size;
  std::vector<double> neural, oracle;
  for (const auto& ref : refs) {
    const auto cluster = manifest.load(ref);
    ClusterTiming row;
    row.subject_id = manifest.subjects[ref.subject].subject_id;
    row.cluster_id = manifest.at(ref).cluster_id;
    time_cluster(predictor, cluster, eval_sample_seed(ckpt.seed, ref), ckpt.n_points, voxel_size, repetitions, row,
                 neural, oracle);
    result.clusters.push_back(std::move(row));
  }
  result.neural = summarize_timings(std::move(neural));
  result.oracle = summarize_timings(std::move(oracle));
  return result;
}

BenchResult bench_clusters(const Checkpoint& ckpt, const std::vector<FiberCluster>& clusters, double voxel_size,
                           std::size_t repetitions) {
  check_args(clusters.size(), repetitions, voxel_size);
  const Predictor predictor(ckpt);
  BenchResult result;
  result.repetitions = repetitions;
  result.voxel_size = voxel_size;
  std::vector<double> neural, oracle;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    ClusterTiming row;
    row.subject_id = clusters[i].subject_id();
    row.cluster_id = clusters[i].id();
    time_cluster(predictor, clusters[i], derive_seed(ckpt.seed, SeedDomain::EvalSample, i), ckpt.n_points, voxel_size,
                 repetitions, row, neural, oracle);
    result.clusters.push_back(std::move(row));
  }
  result.neural = summarize_timings(std::move(neural));
  result.oracle = summarize_timings(std::move(oracle));
  return result;
}

std::string format_bench_table(const BenchResult& result) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s | %s\n", "Methods", "Runtime (ms)");
  out += line;
  out += std::string(40, '-') + "\n";
  std::snprintf(line, sizeof line, "%-16s | %.2f ± %.4f\n", "Voxel oracle", result.oracle.mean_ms, result.oracle.std_ms);
  out += line;
  std::snprintf(line, sizeof line, "%-16s | %.2f ± %.4f\n", "TractShapeNet", result.neural.mean_ms, result.neural.std_ms);
  out += line;
  return out;
}

std::string format_bench_csv(const BenchResult& result) {
  std::string out = "method,mean_ms,std_ms,n_measurements\n";
  out += "voxel_oracle," + format_g(result.oracle.mean_ms) + "," + format_g(result.oracle.std_ms) + "," +
         std::to_string(result.oracle.samples_ms.size()) + "\n";
  out += "tractshapenet," + format_g(result.neural.mean_ms) + "," + format_g(result.neural.std_ms) + "," +
         std::to_string(result.neural.samples_ms.size()) + "\n";
  return out;
}

std::string format_bench_clusters_csv(const BenchResult& result) {
  std::string out = "subject_id,cluster_id,n_streamlines,n_points,neural_ms,oracle_ms\n";
  for (const auto& c : result.clusters) {
    out += c.subject_id + "," + c.cluster_id + "," + std::to_string(c.n_streamlines) + "," +
           std::to_string(c.n_points) + "," + format_g(c.neural_ms) + "," + format_g(c.oracle_ms) + "\n";
  }
  return out;
}

}  // namespace tractshape
