#include "tractshape/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tractshape/error.hpp"
#include "tractshape/optim.hpp"
#include "tractshape/sampler.hpp"
#include "tractshape/shape_oracle.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

TrainConfig TrainConfig::full() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 50;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "train config: " + what); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(weight_decay >= 0.0)) fail("weight decay must be >= 0");
  if (!(gamma > 0.0)) fail("gamma must be positive");
  if (step_size == 0) fail("step_size must be positive");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (n_points == 0) fail("n_points must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train fraction must lie in (0, 1)");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"gamma", gamma},
          {"step_size", step_size},
          {"alpha", alpha},
          {"n_points", n_points},
          {"train_fraction", train_fraction},
          {"test_fraction", 1.0 - train_fraction},
          {"seed", seed},
          {"resample_each_epoch", resample_each_epoch},
          {"model", model.to_json()}};
}

void TrainConfig::merge_json(const nlohmann::json& j) {
  try {
    if (j.contains("batch_size")) batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("epochs")) epochs = j["epochs"].get<std::size_t>();
    if (j.contains("learning_rate")) learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) weight_decay = j["weight_decay"].get<double>();
    if (j.contains("gamma")) gamma = j["gamma"].get<double>();
    if (j.contains("step_size")) step_size = j["step_size"].get<std::size_t>();
    if (j.contains("alpha")) alpha = j["alpha"].get<double>();
    if (j.contains("n_points")) n_points = j["n_points"].get<std::size_t>();
    if (j.contains("train_fraction")) train_fraction = j["train_fraction"].get<double>();
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("resample_each_epoch")) resample_each_epoch = j["resample_each_epoch"].get<bool>();
    if (j.contains("model")) model = SubnetworkConfig::from_json(j["model"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("train config: ") + e.what());
  }
}

DatasetSplit split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  const std::size_t n = manifest.subjects.size();
  if (n < 2) throw Error(ErrorCode::TooFewSubjects, "need at least 2 subjects to split, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Split));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);
  DatasetSplit split;
  split.train_subjects.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_subjects.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train_subjects.begin(), split.train_subjects.end());
  std::sort(split.test_subjects.begin(), split.test_subjects.end());
  return split;
}

std::vector<std::pair<std::size_t, std::size_t>> make_pairs(std::size_t n, std::size_t epoch, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, SeedDomain::Pairing, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve((n + 1) / 2);
  for (std::size_t i = 0; i + 1 < n; i += 2) pairs.emplace_back(order[i], order[i + 1]);
  if (n % 2 == 1) pairs.emplace_back(order[n - 1], order[0]);
  return pairs;
}

namespace {

struct TrainingItem {
  ClusterRef ref;
  FiberCluster cluster;
  std::array<float, kNumMeasures> target{};
};

struct PairStats {
  double l1 = 0.0, l2 = 0.0, lsf = 0.0, total = 0.0;
};

std::string first_nonfinite_measure(const ad::Tensor& t) {
  const auto v = t.values();
  for (std::size_t m = 0; m < v.size() && m < kNumMeasures; ++m) {
    if (!std::isfinite(v[m])) return std::string(kMeasureKeys[m]);
  }
  return "loss";
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result;
  result.split = split_dataset(manifest, config.train_fraction, config.seed);

  // Load the training clusters and standardize their targets.
  const auto refs = manifest.clusters_of(result.split.train_subjects);
  if (refs.size() < 2) throw Error(ErrorCode::TooFewRows, "training split has fewer than 2 clusters");
  std::vector<ShapeVector> targets;
  targets.reserve(refs.size());
  for (const auto& ref : refs) {
    const auto& entry = manifest.at(ref);
    if (!entry.ground_truth) {
      throw Error(ErrorCode::SchemaError, manifest.subjects[ref.subject].subject_id + "/" + entry.cluster_id +
                                              ": missing ground_truth");
    }
    targets.push_back(*entry.ground_truth);
  }
  const auto standardizer = TargetStandardizer::fit(targets);

  std::vector<std::optional<TrainingItem>> loaded(refs.size());
  parallel_for(refs.size(), config.threads, [&](std::size_t i) {
    TrainingItem item{refs[i], manifest.load(refs[i]), {}};
    const auto z = standardizer.standardize(targets[i]);
    for (std::size_t m = 0; m < kNumMeasures; ++m) item.target[m] = static_cast<float>(z[m]);
    loaded[i] = std::move(item);
  });
  std::vector<TrainingItem> items;
  items.reserve(loaded.size());
  for (auto& it : loaded) items.push_back(std::move(*it));
  loaded.clear();

  TractShapeNet master(config.model, config.seed);
  auto master_params = master.parameters();
  ad::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  adam_cfg.weight_decay = config.weight_decay;
  auto adam = ad::make_adam_state(master_params, adam_cfg);
  const LossConfig loss_cfg{config.alpha};

  const int workers = std::max(1, config.threads);
  std::vector<TractShapeNet> replicas;
  for (int w = 0; w < workers; ++w) replicas.emplace_back(config.model, master.parameter_values(), true);

  auto sample_for = [&](std::size_t item, std::size_t epoch) {
    const auto& ref = items[item].ref;
    const std::uint64_t s = config.resample_each_epoch
                                ? derive_seed(config.seed, SeedDomain::TrainSample, epoch, ref.subject, ref.cluster)
                                : derive_seed(config.seed, SeedDomain::TrainSample, ref.subject, ref.cluster);
    return points_tensor(random_sample(items[item].cluster, config.n_points, s));
  };
  auto target_tensor = [&](std::size_t item) {
    const auto& t = items[item].target;
    return ad::Tensor::from({1, kNumMeasures}, std::vector<float>(t.begin(), t.end()));
  };

  const std::size_t n_params = master_params.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    adam.config.learning_rate = ad::scheduler_lr(config.learning_rate, epoch, config.gamma, config.step_size);
    const auto pairs = make_pairs(items.size(), epoch, config.seed);
    EpochRecord record;
    record.epoch = epoch + 1;
    record.lr = adam.config.learning_rate;

    for (std::size_t start = 0, batch = 0; start < pairs.size(); start += config.batch_size, ++batch) {
      const std::size_t count = std::min(config.batch_size, pairs.size() - start);
      const auto current = master.parameter_values();
      for (auto& r : replicas) r.set_parameter_values(current);

      // Per-pair gradients, summed afterwards in pair order so the result
      // does not depend on how pairs were distributed over threads.
      std::vector<std::vector<std::vector<float>>> pair_grads(count);
      std::vector<PairStats> stats(count);
      const std::size_t chunk = (count + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
      parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
        const TractShapeNet& net = replicas[w];
        auto params = net.parameters();
        for (std::size_t i = w * chunk; i < std::min(count, (w + 1) * chunk); ++i) {
          const auto [a, b] = pairs[start + i];
          const auto out = forward_pair(net, sample_for(a, epoch), sample_for(b, epoch));
          for (const auto* o : {&out.first, &out.second}) {
            for (const float v : o->values()) {
              if (!std::isfinite(v)) {
                throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ", batch " +
                                                          std::to_string(batch + 1) + ": non-finite output for '" +
                                                          first_nonfinite_measure(*o) + "'");
              }
            }
          }
          const auto terms = loss_terms(out.first, out.second, target_tensor(a), target_tensor(b), loss_cfg);
          if (!std::isfinite(terms.total.item())) {
            throw Error(ErrorCode::NonFiniteLoss,
                        "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch + 1) + ": loss is not finite");
          }
          for (auto& p : params) p.zero_grad();
          terms.total.backward(1.0f / static_cast<float>(count));
          stats[i] = {terms.l1.item(), terms.l2.item(), terms.lsf.item(), terms.total.item()};
          auto& g = pair_grads[i];
          g.reserve(params.size());
          for (const auto& p : params) g.emplace_back(p.grad().begin(), p.grad().end());
        }
      });

      std::vector<std::vector<float>> grads = std::move(pair_grads[0]);
      for (std::size_t i = 1; i < count; ++i) {
        for (std::size_t p = 0; p < n_params; ++p) {
          auto& dst = grads[p];
          const auto& src = pair_grads[i][p];
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      }
      ad::adam_step(master_params, grads, adam);

      for (const auto& s : stats) {
        record.l1 += s.l1;
        record.l2 += s.l2;
        record.lsf += s.lsf;
        record.total += s.total;
      }
    }
    const auto n_pairs = static_cast<double>(pairs.size());
    record.l1 /= n_pairs;
    record.l2 /= n_pairs;
    record.lsf /= n_pairs;
    record.total /= n_pairs;
    for (const auto& p : master_params) {
      for (const float v : p.values()) {
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ": parameters became non-finite");
        }
      }
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }

  result.checkpoint = make_checkpoint(master, config.n_points, standardizer, config.seed, config.to_json());
  return result;
}

std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,mean_l1,mean_l2,mean_lsf,mean_total\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_g(r.lr, 9) + "," + format_g(r.l1, 9) + "," + format_g(r.l2, 9) +
           "," + format_g(r.lsf, 9) + "," + format_g(r.total, 9) + "\n";
  }
  return out;
}

void ensure_ground_truth(DatasetManifest& manifest, double voxel_size, int threads) {
  const auto refs = manifest.all_clusters();
  parallel_for(refs.size(), threads, [&](std::size_t i) {
    auto& entry = manifest.at(refs[i]);
    if (!entry.ground_truth) entry.ground_truth = compute_shape_vector(manifest.load(refs[i]), voxel_size);
  });
}

std::uint64_t eval_sample_seed(std::uint64_t seed, const ClusterRef& ref) {
  return derive_seed(seed, SeedDomain::EvalSample, ref.subject, ref.cluster);
}

std::vector<ShapeVector> predict_clusters(const Checkpoint& ckpt, const DatasetManifest& manifest,
                                          const std::vector<ClusterRef>& refs, int threads) {
  const Predictor predictor(ckpt);
  std::vector<ShapeVector> out(refs.size());
  parallel_for(refs.size(), threads, [&](std::size_t i) {
    const auto cluster = manifest.load(refs[i]);
    out[i] = predictor.predict(random_sample(cluster, ckpt.n_points, eval_sample_seed(ckpt.seed, refs[i])));
  });
  return out;
}

MetricsReport evaluate(const Checkpoint& ckpt, const DatasetManifest& manifest,
                       const std::vector<std::size_t>& test_subjects, int threads) {
  const auto refs = manifest.clusters_of(test_subjects);
  std::vector<ShapeVector> truth;
  truth.reserve(refs.size());
  for (const auto& ref : refs) {
    const auto& entry = manifest.at(ref);
    if (!entry.ground_truth) {
      throw Error(ErrorCode::SchemaError, manifest.subjects[ref.subject].subject_id + "/" + entry.cluster_id +
                                              ": missing ground_truth");
    }
    truth.push_back(*entry.ground_truth);
  }
  const auto predicted = predict_clusters(ckpt, manifest, refs, threads);
  return evaluate_predictions(predicted, truth);
}

}  // namespace tractshape
