#pragma once

#include <string>
#include <vector>

#include "tractshape/manifest.hpp"
#include "tractshape/model.hpp"

namespace tractshape {

struct TimingStats {
  std::vector<double> samples_ms;  // one entry per (cluster, repetition)
  double mean_ms = 0.0;
  double std_ms = 0.0;  // population standard deviation
};

/// Population mean and standard deviation of the samples.
TimingStats summarize_timings(std::vector<double> samples_ms);

struct ClusterTiming {
  std::string subject_id;
  std::string cluster_id;
  std::size_t n_streamlines = 0;
  std::size_t n_points = 0;
  double neural_ms = 0.0;  // mean over repetitions
  double oracle_ms = 0.0;
};

struct BenchResult {
  TimingStats neural;
  TimingStats oracle;
  std::vector<ClusterTiming> clusters;
  std::size_t repetitions = 0;
  double voxel_size = 0.0;
};

/// Times point sampling plus network inference against the voxel oracle on
/// every listed cluster, single-threaded. One untimed warm-up call per
/// method and cluster precedes the timed repetitions.
BenchResult bench(const Checkpoint& ckpt, const DatasetManifest& manifest, const std::vector<ClusterRef>& refs,
                  double voxel_size, std::size_t repetitions);

/// Same timing loop on in-memory clusters.
BenchResult bench_clusters(const Checkpoint& ckpt, const std::vector<FiberCluster>& clusters, double voxel_size,
                           std::size_t repetitions);

/// Aligned two-row runtime table (mean ± std in ms).
std::string format_bench_table(const BenchResult& result);
/// CSV: method,mean_ms,std_ms,n_measurements
std::string format_bench_csv(const BenchResult& result);
/// CSV: subject_id,cluster_id,n_streamlines,n_points,neural_ms,oracle_ms
std::string format_bench_clusters_csv(const BenchResult& result);

}  // namespace tractshape
