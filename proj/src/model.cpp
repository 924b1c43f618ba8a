#include "tractshape/model.hpp"

#include <cmath>
#include <random>

#include "tractshape/error.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

void SubnetworkConfig::validate() const {
  if (input_width != 3) throw Error(ErrorCode::InvalidArgument, "subnetwork input width must be 3");
  if (output_width != kNumMeasures) throw Error(ErrorCode::InvalidArgument, "subnetwork output width must be 5");
  if (trunk_widths.empty()) throw Error(ErrorCode::InvalidArgument, "subnetwork needs at least one trunk layer");
  for (const auto w : trunk_widths) {
    if (w == 0) throw Error(ErrorCode::InvalidArgument, "layer widths must be positive");
  }
  for (const auto w : head_widths) {
    if (w == 0) throw Error(ErrorCode::InvalidArgument, "layer widths must be positive");
  }
}

nlohmann::json SubnetworkConfig::to_json() const {
  return {{"input_width", input_width},
          {"trunk_widths", trunk_widths},
          {"head_widths", head_widths},
          {"output_width", output_width}};
}

SubnetworkConfig SubnetworkConfig::from_json(const nlohmann::json& j) {
  SubnetworkConfig c;
  try {
    c.input_width = j.at("input_width").get<std::size_t>();
    c.trunk_widths = j.at("trunk_widths").get<std::vector<std::size_t>>();
    c.head_widths = j.at("head_widths").get<std::vector<std::size_t>>();
    c.output_width = j.at("output_width").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const SubnetworkConfig& c) {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t in = c.input_width;
  for (const auto w : c.trunk_widths) {
    dims.emplace_back(in, w);
    in = w;
  }
  for (const auto w : c.head_widths) {
    dims.emplace_back(in, w);
    in = w;
  }
  dims.emplace_back(in, c.output_width);
  return dims;
}

}  // namespace

TractShapeNet::TractShapeNet(SubnetworkConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(derive_seed(init_seed, SeedDomain::Init));
  const auto dims = layer_dims(config_);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<float> w(in * out), b(out);
    for (auto& v : w) v = static_cast<float>(dist(rng));
    for (auto& v : b) v = static_cast<float>(dist(rng));
    Linear layer{ad::Tensor::from({in, out}, std::move(w), true), ad::Tensor::from({out}, std::move(b), true)};
    (l < config_.trunk_widths.size() ? trunk_ : head_).push_back(std::move(layer));
  }
}

TractShapeNet::TractShapeNet(SubnetworkConfig config, const std::vector<std::vector<float>>& values,
                             bool requires_grad)
    : config_(std::move(config)) {
  config_.validate();
  const auto dims = layer_dims(config_);
  if (values.size() != 2 * dims.size()) {
    throw Error(ErrorCode::CheckpointMismatch, "expected " + std::to_string(2 * dims.size()) +
                                                   " parameter tensors, got " + std::to_string(values.size()));
  }
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    if (values[2 * l].size() != in * out || values[2 * l + 1].size() != out) {
      throw Error(ErrorCode::CheckpointMismatch, "parameter sizes of layer " + std::to_string(l) + " do not match");
    }
    Linear layer{ad::Tensor::from({in, out}, values[2 * l], requires_grad),
                 ad::Tensor::from({out}, values[2 * l + 1], requires_grad)};
    (l < config_.trunk_widths.size() ? trunk_ : head_).push_back(std::move(layer));
  }
}

ad::Tensor TractShapeNet::forward(const ad::Tensor& points) const {
  if (points.rank() != 2 || points.cols() != config_.input_width) {
    throw Error(ErrorCode::ShapeMismatch, "subnetwork input must be (N x 3), got " + ad::shape_string(points.shape()));
  }
  ad::Tensor h = points;
  for (std::size_t l = 0; l + 1 < trunk_.size(); ++l) {
    h = ad::relu(ad::add_bias(ad::matmul(h, trunk_[l].weight), trunk_[l].bias));
  }
  h = ad::dense_relu_max(h, trunk_.back().weight, trunk_.back().bias).values;
  for (std::size_t l = 0; l < head_.size(); ++l) {
    h = ad::add_bias(ad::matmul(h, head_[l].weight), head_[l].bias);
    if (l + 1 < head_.size()) h = ad::relu(h);
  }
  return h;
}

std::vector<ad::Tensor> TractShapeNet::parameters() const {
  std::vector<ad::Tensor> params;
  for (const auto* group : {&trunk_, &head_}) {
    for (const auto& layer : *group) {
      params.push_back(layer.weight);
      params.push_back(layer.bias);
    }
  }
  return params;
}

std::vector<std::vector<float>> TractShapeNet::parameter_values() const {
  std::vector<std::vector<float>> values;
  for (const auto& p : parameters()) values.emplace_back(p.values().begin(), p.values().end());
  return values;
}

void TractShapeNet::set_parameter_values(const std::vector<std::vector<float>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].mutable_values();
    if (dst.size() != values[i].size()) throw Error(ErrorCode::ShapeMismatch, "parameter size mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::size_t TractShapeNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

ad::Tensor points_tensor(const PointCloudSample& sample) {
  std::vector<float> v;
  v.reserve(sample.points.size() * 3);
  for (const auto& p : sample.points) {
    v.push_back(static_cast<float>(p.x));
    v.push_back(static_cast<float>(p.y));
    v.push_back(static_cast<float>(p.z));
  }
  return ad::Tensor::from({sample.points.size(), 3}, std::move(v));
}

SiameseOutputs forward_pair(const TractShapeNet& net, const ad::Tensor& points_a, const ad::Tensor& points_b) {
  return {net.forward(points_a), net.forward(points_b)};
}

ad::Tensor loss_sf(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2) {
  return ad::mse(ad::dft_magnitude(ad::sub(o1, o2)), ad::dft_magnitude(ad::sub(gt1, gt2)));
}

LossTerms loss_terms(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2,
                     const LossConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  LossTerms t;
  t.l1 = ad::mse(o1, gt1);
  t.l2 = ad::mse(o2, gt2);
  t.lsf = loss_sf(o1, o2, gt1, gt2);
  t.total = ad::add(ad::add(t.l1, t.l2), ad::scale(t.lsf, static_cast<float>(cfg.alpha)));
  return t;
}

ad::Tensor loss_total(const ad::Tensor& o1, const ad::Tensor& o2, const ad::Tensor& gt1, const ad::Tensor& gt2,
                      const LossConfig& cfg) {
  return loss_terms(o1, o2, gt1, gt2, cfg).total;
}

// ---------------------------------------------------------------------------

TargetStandardizer TargetStandardizer::fit(std::span<const ShapeVector> targets) {
  if (targets.size() < 2) throw Error(ErrorCode::ZeroVariance, "need at least 2 targets to standardize");
  TargetStandardizer s;
  const auto n = static_cast<double>(targets.size());
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    double mean = 0.0;
    for (const auto& t : targets) mean += t[m];
    mean /= n;
    double var = 0.0;
    for (const auto& t : targets) var += (t[m] - mean) * (t[m] - mean);
    var /= n;
    if (!(var > 0.0)) {
      throw Error(ErrorCode::ZeroVariance, "measure '" + std::string(kMeasureKeys[m]) + "' is constant on the training set");
    }
    s.mean[m] = mean;
    s.stddev[m] = std::sqrt(var);
  }
  return s;
}

std::array<double, kNumMeasures> TargetStandardizer::standardize(const ShapeVector& v) const {
  std::array<double, kNumMeasures> z{};
  const auto a = v.to_array();
  for (std::size_t m = 0; m < kNumMeasures; ++m) z[m] = (a[m] - mean[m]) / stddev[m];
  return z;
}

ShapeVector TargetStandardizer::destandardize(std::span<const double> z) const {
  if (z.size() != kNumMeasures) throw Error(ErrorCode::ShapeMismatch, "expected 5 standardized values");
  std::array<double, kNumMeasures> a{};
  for (std::size_t m = 0; m < kNumMeasures; ++m) a[m] = z[m] * stddev[m] + mean[m];
  return ShapeVector::from_array(a);
}

ShapeVector TargetStandardizer::destandardize(std::span<const float> z) const {
  std::array<double, kNumMeasures> d{};
  if (z.size() != kNumMeasures) throw Error(ErrorCode::ShapeMismatch, "expected 5 standardized values");
  for (std::size_t m = 0; m < kNumMeasures; ++m) d[m] = z[m];
  return destandardize(std::span<const double>(d));
}

// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(const TractShapeNet& net, std::size_t n_points, const TargetStandardizer& standardizer,
                           std::uint64_t seed, nlohmann::json train_config) {
  Checkpoint c;
  c.model = net.config();
  c.n_points = n_points;
  c.standardizer = standardizer;
  c.seed = seed;
  c.train_config = std::move(train_config);
  for (const auto& p : net.parameters()) {
    c.shapes.push_back(p.shape());
    c.values.emplace_back(p.values().begin(), p.values().end());
  }
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json echo = nlohmann::json::object();
  echo["tool"] = std::string(kToolName);
  echo["version"] = std::string(kToolVersion);
  echo["model"] = ckpt.model.to_json();
  echo["n_points"] = ckpt.n_points;
  echo["seed"] = ckpt.seed;
  echo["train_config"] = ckpt.train_config;
  const std::string text = echo.dump();

  std::string out(kCheckpointMagic);
  append_le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  append_le(out, static_cast<std::uint32_t>(ckpt.values.size()));
  for (std::size_t i = 0; i < ckpt.values.size(); ++i) {
    const auto& shape = ckpt.shapes.at(i);
    if (ad::shape_numel(shape) != ckpt.values[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor " + std::to_string(i) + " shape/value mismatch");
    }
    append_le(out, static_cast<std::uint32_t>(shape.size()));
    for (const auto d : shape) append_le(out, static_cast<std::uint32_t>(d));
    for (const float v : ckpt.values[i]) append_le(out, v);
  }
  for (const double v : ckpt.standardizer.mean) append_le(out, v);
  for (const double v : ckpt.standardizer.stddev) append_le(out, v);
  append_le(out, ckpt.seed);
  return out;
}

namespace {

class ByteReader {
 public:
  ByteReader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    const T v = load_le<T>(reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedPayload, source_ + ": checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source_name) {
  ByteReader r(bytes, source_name);
  if (bytes.size() < kCheckpointMagic.size() || r.take(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCode::MissingMagic, source_name + ": not a TSNCKPT1 checkpoint");
  }
  const auto json_len = r.read<std::uint32_t>();
  nlohmann::json echo;
  try {
    echo = nlohmann::json::parse(r.take(json_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, source_name + ": bad config echo: " + e.what());
  }

  Checkpoint c;
  try {
    c.model = SubnetworkConfig::from_json(echo.at("model"));
    c.n_points = echo.at("n_points").get<std::size_t>();
    c.train_config = echo.value("train_config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, source_name + ": " + e.what());
  }

  const auto n_tensors = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto rank = r.read<std::uint32_t>();
    if (rank == 0 || rank > 8) throw Error(ErrorCode::SchemaError, source_name + ": bad tensor rank");
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.read<std::uint32_t>();
    const auto numel = ad::shape_numel(shape);
    if (numel * 4 > r.remaining()) throw Error(ErrorCode::TruncatedPayload, source_name + ": checkpoint is truncated");
    std::vector<float> values(numel);
    for (auto& v : values) v = r.read<float>();
    c.shapes.push_back(std::move(shape));
    c.values.push_back(std::move(values));
  }
  for (auto& v : c.standardizer.mean) v = r.read<double>();
  for (auto& v : c.standardizer.stddev) v = r.read<double>();
  c.seed = r.read<std::uint64_t>();
  if (r.remaining() != 0) throw Error(ErrorCode::SchemaError, source_name + ": trailing bytes after checkpoint");

  // Validate against the declared architecture.
  (void)TractShapeNet(c.model, c.values, false);
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path), path); }

Predictor::Predictor(const Checkpoint& ckpt)
    : net_(ckpt.model, ckpt.values, false), standardizer_(ckpt.standardizer), n_points_(ckpt.n_points) {}

ShapeVector Predictor::predict(const PointCloudSample& sample) const {
  if (sample.n_points() != n_points_) {
    throw Error(ErrorCode::CheckpointMismatch, "sample has " + std::to_string(sample.n_points()) +
                                                   " points, checkpoint expects " + std::to_string(n_points_));
  }
  const auto out = net_.forward(points_tensor(sample));
  return standardizer_.destandardize(out.values());
}

ShapeVector predict(const PointCloudSample& sample, const Checkpoint& ckpt) { return Predictor(ckpt).predict(sample); }

}  // namespace tractshape
