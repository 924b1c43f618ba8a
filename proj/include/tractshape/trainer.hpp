#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tractshape/manifest.hpp"
#include "tractshape/metrics.hpp"
#include "tractshape/model.hpp"

namespace tractshape {

struct TrainConfig {
  std::size_t batch_size = 128;  // pairs per optimizer step
  std::size_t epochs = 200;
  double learning_rate = 5e-4;
  double weight_decay = 5e-3;
  double gamma = 0.1;
  std::size_t step_size = 200;  // scheduler period, in epochs
  double alpha = 3.0;
  std::size_t n_points = kDefaultPointCount;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  bool resample_each_epoch = true;  // fresh random point draw per cluster per epoch
  SubnetworkConfig model;
  int threads = 1;  // not part of the serialized config: outputs do not depend on it

  /// Full-scale hyperparameters (batch 128, 200 epochs).
  static TrainConfig full();
  /// Scaled-down configuration for a desktop CPU.
  static TrainConfig desk();

  void validate() const;
  nlohmann::json to_json() const;
  /// Overrides the fields present in j.
  void merge_json(const nlohmann::json& j);
};

struct DatasetSplit {
  std::vector<std::size_t> train_subjects;
  std::vector<std::size_t> test_subjects;
};

/// Subject-level split: every cluster of a subject lands on the same side.
DatasetSplit split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

/// Shuffles item positions [0, n) with a stream seeded by (seed, epoch) and
/// pairs neighbours; an odd leftover pairs with the first shuffled item.
std::vector<std::pair<std::size_t, std::size_t>> make_pairs(std::size_t n, std::size_t epoch, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double lsf = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  DatasetSplit split;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Requires ground truth on every cluster. Deterministic for a fixed config
/// regardless of config.threads.
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const EpochCallback& on_epoch = {});

std::string format_history_csv(const std::vector<EpochRecord>& history);

/// Fills missing ground truth with the voxel oracle.
void ensure_ground_truth(DatasetManifest& manifest, double voxel_size, int threads);

/// Point-sample seed used for inference on a manifest cluster.
std::uint64_t eval_sample_seed(std::uint64_t seed, const ClusterRef& ref);

/// Predicted shape vectors (physical units) for the given clusters.
std::vector<ShapeVector> predict_clusters(const Checkpoint& ckpt, const DatasetManifest& manifest,
                                          const std::vector<ClusterRef>& refs, int threads);

MetricsReport evaluate(const Checkpoint& ckpt, const DatasetManifest& manifest,
                       const std::vector<std::size_t>& test_subjects, int threads = 1);

}  // namespace tractshape
