#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractshape/autodiff.hpp"
#include "tractshape/geometry.hpp"
#include "tractshape/sampler.hpp"

namespace tractshape {

/// PointNet-style subnetwork without the spatial transformer: a per-point
/// MLP shared across points, a column-wise max pool, then a head MLP.
struct SubnetworkConfig {
  std::size_t input_width = 3;
  std::vector<std::size_t> trunk_widths = {64, 128, 1024};
  std::vector<std::size_t> head_widths = {512, 256};
  std::size_t output_width = kNumMeasures;

  void validate() const;
  nlohmann::json to_json() const;
  static SubnetworkConfig from_json(const nlohmann::json& j);
  friend bool operator==(const SubnetworkConfig&, const SubnetworkConfig&) = default;
};

struct LossConfig {
  double alpha = 3.0;  // weight of the Siamese-Fourier term
};

struct Linear {
  ad::Tensor weight;  // (in x out)
  ad::Tensor bias;    // (out)
};

class TractShapeNet {
 public:
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and biases.
  TractShapeNet(SubnetworkConfig config, std::uint64_t init_seed);
  /// Rebuilds a network from flat parameter buffers (parameters() order).
  TractShapeNet(SubnetworkConfig config, const std::vector<std::vector<float>>& values, bool requires_grad);

  const SubnetworkConfig& config() const noexcept { return config_; }

  /// points: (N x 3) -> standardized shape vector (1 x 5).
  ad::Tensor forward(const ad::Tensor& points) const;

  /// Trunk layers first, then head layers; weight before bias in each.
  std::vector<ad::Tensor> parameters() const;
  std::vector<std::vector<float>> parameter_values() const;
  void set_parameter_values(const std::vector<std::vector<float>>& values);
  std::size_t parameter_count() const;

 private:
  SubnetworkConfig config_;
  std::vector<Linear> trunk_;
  std::vector<Linear> head_;  // last entry is the output layer
};

/// (N x 3) float tensor of a sample's coordinates in mm.
ad::Tensor points_tensor(const PointCloudSample& sample);

struct SiameseOutputs {
  ad::Tensor first;
  ad::Tensor second;
};

/// Both branches run through the very same parameter tensors.
SiameseOutputs forward_pair(const TractShapeNet& net, const ad::Tensor& points_a, const ad::Tensor& points_b);

/// Siamese-Fourier loss: mean_k (|DFT(O1 - O2)_k| - |DFT(GT1 - GT2)_k|)^2,
/// with the DFT along the measure axis. Rows are pairs; the mean runs over
/// pairs and frequencies.
ad::Tensor loss_sf(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2);

struct LossTerms {
  ad::Tensor l1;
  ad::Tensor l2;
  ad::Tensor lsf;
  ad::Tensor total;  // l1 + l2 + alpha * lsf
};

LossTerms loss_terms(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2,
                     const LossConfig& cfg);
ad::Tensor loss_total(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2,
                      const LossConfig& cfg);

/// Per-measure z-scoring fitted on the training split.
struct TargetStandardizer {
  std::array<double, kNumMeasures> mean{};
  std::array<double, kNumMeasures> stddev{1, 1, 1, 1, 1};

  static TargetStandardizer fit(std::span<const ShapeVector> targets);
  std::array<double, kNumMeasures> standardize(const ShapeVector& v) const;
  ShapeVector destandardize(std::span<const double> z) const;
  ShapeVector destandardize(std::span<const float> z) const;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::string_view kCheckpointMagic = "TSNCKPT1";

struct Checkpoint {
  SubnetworkConfig model;
  std::size_t n_points = kDefaultPointCount;
  TargetStandardizer standardizer;
  std::uint64_t seed = 0;
  nlohmann::json train_config = nlohmann::json::object();
  std::vector<ad::Shape> shapes;
  std::vector<std::vector<float>> values;
};

Checkpoint make_checkpoint(const TractShapeNet& net, std::size_t n_points, const TargetStandardizer& standardizer,
                           std::uint64_t seed, nlohmann::json train_config);

/// Layout (all little-endian): magic "TSNCKPT1"; u32 length + JSON config
/// echo; u32 tensor count; per tensor u32 rank, u32 dims, f32 values;
/// 5 f64 means; 5 f64 standard deviations; u64 training seed.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source_name = "<memory>");
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Inference wrapper holding a network rebuilt from a checkpoint.
class Predictor {
 public:
  explicit Predictor(const Checkpoint& ckpt);
  /// Standardized output followed by de-standardization. Throws
  /// CheckpointMismatch when the sample size differs from the checkpoint's.
  ShapeVector predict(const PointCloudSample& sample) const;
  std::size_t n_points() const noexcept { return n_points_; }

 private:
  TractShapeNet net_;
  TargetStandardizer standardizer_;
  std::size_t n_points_;
};

ShapeVector predict(const PointCloudSample& sample, const Checkpoint& ckpt);

}  // namespace tractshape
