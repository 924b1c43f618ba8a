// tractshape command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// Settings resolve as defaults < --config file < TRACTSHAPE_SEED < flags.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractshape/bench.hpp"
#include "tractshape/downstream.hpp"
#include "tractshape/error.hpp"
#include "tractshape/manifest.hpp"
#include "tractshape/metrics.hpp"
#include "tractshape/shape_oracle.hpp"
#include "tractshape/shape_table.hpp"
#include "tractshape/synth.hpp"
#include "tractshape/tck.hpp"
#include "tractshape/trainer.hpp"
#include "tractshape/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tractshape;

namespace {

// A flag that may also be supplied by the config file.
struct Binding {
  std::string key;
  CLI::Option* option = nullptr;
  bool from_file = false;
  std::function<void(const json&)> assign;
  std::function<json()> value;

  bool from_cli() const { return option->count() > 0; }
  bool provided() const { return from_cli() || from_file; }
};

class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {}

  template <typename T>
  Binding& add(const std::string& flag, const std::string& key, T& target, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->option = app_->add_option(flag, target, help);
    b->assign = [&target, key](const json& j) {
      try {
        target = j.get<T>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': " + e.what());
      }
    };
    b->value = [&target] { return json(target); };
    bindings_.push_back(std::move(b));
    return *bindings_.back();
  }

  Binding& flag(const std::string& name, const std::string& key, bool& target, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->option = app_->add_flag(name, target, help);
    b->assign = [&target, key](const json& j) {
      if (!j.is_boolean()) throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be a boolean");
      target = j.get<bool>();
    };
    b->value = [&target] { return json(target); };
    bindings_.push_back(std::move(b));
    return *bindings_.back();
  }

  const Binding* find(const std::string& key) const {
    for (const auto& b : bindings_) {
      if (b->key == key) return b.get();
    }
    return nullptr;
  }
  bool provided(const std::string& key) const {
    const auto* b = find(key);
    return b != nullptr && b->provided();
  }

  /// Fills flags not given on the command line from the config file: top
  /// level keys first, then the section named after the subcommand.
  void apply_file(const json& root, const std::string& section) {
    auto apply = [&](const json& obj) {
      for (const auto& [key, val] : obj.items()) {
        if (key == section && val.is_object()) continue;
        Binding* b = nullptr;
        for (auto& e : bindings_) {
          if (e->key == key) b = e.get();
        }
        if (b == nullptr) continue;
        if (b->from_cli()) continue;
        b->assign(val);
        b->from_file = true;
      }
    };
    apply(root);
    if (const auto it = root.find(section); it != root.end() && it->is_object()) apply(*it);
  }

  json effective() const {
    json j = json::object();
    for (const auto& b : bindings_) {
      if (b->key != "threads" && b->key != "config") j[b->key] = b->value();
    }
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::unique_ptr<Binding>> bindings_;
};

struct Common {
  std::uint64_t seed = 42;
  int threads = default_thread_count();
  std::string config_path;
  bool quiet = false;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Settings> settings;
  Common common;
};

Command make_command(CLI::App& root, const std::string& name, const std::string& help, bool with_seed = true) {
  Command c;
  c.app = root.add_subcommand(name, help);
  c.settings = std::make_unique<Settings>(c.app);
  if (with_seed) c.settings->add("--seed", "seed", c.common.seed, "Seed for all randomness (default 42)");
  c.settings->add("--threads", "threads", c.common.threads, "Worker threads for parallel stages");
  c.app->add_option("--config", c.common.config_path, "JSON config file")->check(CLI::ExistingFile);
  c.app->add_flag("--quiet", c.common.quiet, "Suppress progress messages");
  return c;
}

std::uint64_t parse_env_seed(const char* text) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || text[pos] != '\0') {
    throw Error(ErrorCode::InvalidArgument, std::string("TRACTSHAPE_SEED is not an unsigned integer: '") + text + "'");
  }
  return v;
}

/// Config file, then environment seed; echoes the effective settings.
json resolve(Command& c, const std::string& name) {
  if (!c.common.config_path.empty()) {
    json root;
    try {
      root = json::parse(read_file_bytes(c.common.config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InvalidArgument, "config file " + c.common.config_path + ": " + e.what());
    }
    if (!root.is_object()) throw Error(ErrorCode::InvalidArgument, "config file must hold a JSON object");
    c.settings->apply_file(root, name);
  }
  const auto* seed = c.settings->find("seed");
  if (seed != nullptr && !seed->from_cli()) {
    if (const char* env = std::getenv("TRACTSHAPE_SEED"); env != nullptr && *env != '\0') {
      c.common.seed = parse_env_seed(env);
    }
  }
  if (c.common.threads < 1) throw Error(ErrorCode::InvalidArgument, "--threads must be at least 1");
  set_quiet(c.common.quiet);
  json eff = c.settings->effective();
  std::cerr << kToolName << " " << name << " config: " << eff.dump() << "\n";
  return eff;
}

json output_config(const std::string& name, const json& eff) {
  return {{"subcommand", name}, {"settings", eff}};
}

void write_text(const std::string& path, const std::string& text) { write_file_bytes(path, text); }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
}

bool looks_like_manifest(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ext == ".json";
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t subjects = 10;
  std::size_t clusters = 73;
  std::size_t first_subject = 0;
  std::string out_dir;
  double voxel_size = kDefaultVoxelSize;
};

int run_synth(Command& c, const SynthArgs& a, const std::string& name) {
  resolve(c, name);
  const auto& s = *c.settings;
  // Generator ranges come from the config file's "dataset" object.
  DatasetConfig cfg;
  if (!c.common.config_path.empty()) {
    const json root = json::parse(read_file_bytes(c.common.config_path));
    if (const auto it = root.find("dataset"); it != root.end()) cfg.merge_json(*it);
  }
  if (s.provided("subjects")) cfg.n_subjects = a.subjects;
  if (s.provided("clusters_per_subject")) cfg.clusters_per_subject = a.clusters;
  if (s.provided("first_subject")) cfg.first_subject = a.first_subject;
  if (s.provided("voxel_size")) cfg.voxel_size = a.voxel_size;
  cfg.seed = c.common.seed;
  if (a.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--out-dir is required");
  std::cerr << kToolName << " synth: dataset config: " << cfg.to_json().dump() << "\n";
  const auto manifest = generate_dataset(cfg, a.out_dir, c.common.threads);
  log_info("wrote " + std::to_string(manifest.cluster_count()) + " clusters to " + a.out_dir);
  return 0;
}

struct ShapesArgs {
  std::string input;
  std::string out;
  double voxel_size = kDefaultVoxelSize;
  std::string subject_id;
};

int run_shapes(Command& c, const ShapesArgs& a, const std::string& name) {
  const json eff = resolve(c, name);
  if (a.input.empty()) throw Error(ErrorCode::InvalidArgument, "--input is required");
  if (a.out.empty()) throw Error(ErrorCode::InvalidArgument, "--out is required");
  if (!fs::exists(a.input)) throw Error(ErrorCode::IoFailure, "input not found: " + a.input);
  std::vector<ShapeRow> rows;
  if (looks_like_manifest(a.input)) {
    const auto manifest = read_manifest(a.input);
    const auto refs = manifest.all_clusters();
    rows.resize(refs.size());
    parallel_for(refs.size(), c.common.threads, [&](std::size_t i) {
      const auto cluster = manifest.load(refs[i]);
      rows[i] = {manifest.subjects[refs[i].subject].subject_id, manifest.at(refs[i]).cluster_id,
                 compute_shape_vector(cluster, a.voxel_size)};
    });
    std::sort(rows.begin(), rows.end(), [](const ShapeRow& x, const ShapeRow& y) {
      return std::tie(x.subject_id, x.cluster_id) < std::tie(y.subject_id, y.cluster_id);
    });
  } else {
    const auto cluster = read_tck(a.input, {}, a.subject_id);
    rows.push_back({cluster.subject_id(), cluster.id(), compute_shape_vector(cluster, a.voxel_size)});
  }
  ensure_parent(a.out);
  write_shape_csv(rows, a.out);
  write_sidecar(a.out, output_config(name, eff));
  log_info("wrote " + std::to_string(rows.size()) + " rows to " + a.out);
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string history;
  std::string preset = "desk";
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double alpha = 0.0;
  std::size_t n_points = 0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  double train_fraction = 0.0;
  double voxel_size = kDefaultVoxelSize;
};

int run_train(Command& c, const TrainArgs& a, const std::string& name) {
  resolve(c, name);
  const auto& s = *c.settings;
  if (a.manifest.empty()) throw Error(ErrorCode::InvalidArgument, "--manifest is required");
  if (a.out.empty()) throw Error(ErrorCode::InvalidArgument, "--out is required");
  TrainConfig cfg;
  if (a.preset == "desk") {
    cfg = TrainConfig::desk();
  } else if (a.preset == "full") {
    cfg = TrainConfig::full();
  } else {
    throw Error(ErrorCode::InvalidArgument, "--preset must be 'desk' or 'full'");
  }
  if (s.provided("epochs")) cfg.epochs = a.epochs;
  if (s.provided("batch_size")) cfg.batch_size = a.batch_size;
  if (s.provided("alpha")) cfg.alpha = a.alpha;
  if (s.provided("n_points")) cfg.n_points = a.n_points;
  if (s.provided("learning_rate")) cfg.learning_rate = a.learning_rate;
  if (s.provided("weight_decay")) cfg.weight_decay = a.weight_decay;
  if (s.provided("train_fraction")) cfg.train_fraction = a.train_fraction;
  cfg.seed = c.common.seed;
  cfg.threads = c.common.threads;
  cfg.validate();
  std::cerr << kToolName << " train: effective training config: " << cfg.to_json().dump() << "\n";

  auto manifest = read_manifest(a.manifest);
  ensure_ground_truth(manifest, a.voxel_size, c.common.threads);
  const auto result = train(cfg, manifest, [](const EpochRecord& r) {
    log_info("epoch " + std::to_string(r.epoch) + " lr " + format_g(r.lr, 3) + " loss " + format_g(r.total, 5) +
             " (l1 " + format_g(r.l1, 4) + ", l2 " + format_g(r.l2, 4) + ", lsf " + format_g(r.lsf, 4) + ")");
  });
  ensure_parent(a.out);
  write_checkpoint(result.checkpoint, a.out);
  const std::string history = a.history.empty() ? a.out + ".history.csv" : a.history;
  ensure_parent(history);
  write_text(history, format_history_csv(result.history));
  json meta = output_config(name, c.settings->effective());
  meta["train_config"] = cfg.to_json();
  write_sidecar(history, meta);
  log_info("wrote checkpoint " + a.out + " and history " + history);
  return 0;
}

struct EvalArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string table;
  double voxel_size = kDefaultVoxelSize;
};

DatasetSplit checkpoint_split(const Checkpoint& ckpt, const DatasetManifest& manifest) {
  double fraction = 0.8;
  if (ckpt.train_config.contains("train_fraction")) fraction = ckpt.train_config["train_fraction"].get<double>();
  return split_dataset(manifest, fraction, ckpt.seed);
}

int run_eval(Command& c, const EvalArgs& a, const std::string& name) {
  const json eff = resolve(c, name);
  if (a.manifest.empty() || a.checkpoint.empty()) {
    throw Error(ErrorCode::InvalidArgument, "--manifest and --checkpoint are required");
  }
  const auto ckpt = read_checkpoint(a.checkpoint);
  auto manifest = read_manifest(a.manifest);
  ensure_ground_truth(manifest, a.voxel_size, c.common.threads);
  const auto split = checkpoint_split(ckpt, manifest);
  const auto report = evaluate(ckpt, manifest, split.test_subjects, c.common.threads);
  const auto table = format_metrics_table(report);
  std::cout << table;
  json meta = output_config(name, eff);
  meta["checkpoint_seed"] = ckpt.seed;
  meta["n_test_subjects"] = split.test_subjects.size();
  meta["n_test_clusters"] = report.n_clusters;
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_text(a.out, format_metrics_csv(report));
    write_sidecar(a.out, meta);
  }
  if (!a.table.empty()) {
    ensure_parent(a.table);
    write_text(a.table, table);
  }
  return 0;
}

struct BenchArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string table;
  std::string clusters_out;
  double voxel_size = kDefaultVoxelSize;
  std::size_t repetitions = 10;
  std::size_t max_clusters = 100;
};

int run_bench(Command& c, const BenchArgs& a, const std::string& name) {
  const json eff = resolve(c, name);
  if (a.manifest.empty() || a.checkpoint.empty()) {
    throw Error(ErrorCode::InvalidArgument, "--manifest and --checkpoint are required");
  }
  const auto ckpt = read_checkpoint(a.checkpoint);
  const auto manifest = read_manifest(a.manifest);
  auto refs = manifest.all_clusters();
  if (a.max_clusters > 0 && refs.size() > a.max_clusters) refs.resize(a.max_clusters);
  const auto result = bench(ckpt, manifest, refs, a.voxel_size, a.repetitions);
  const auto table = format_bench_table(result);
  std::cout << table;
  json meta = output_config(name, eff);
  meta["n_clusters"] = refs.size();
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_text(a.out, format_bench_csv(result));
    write_sidecar(a.out, meta);
  }
  if (!a.clusters_out.empty()) {
    ensure_parent(a.clusters_out);
    write_text(a.clusters_out, format_bench_clusters_csv(result));
    write_sidecar(a.clusters_out, meta);
  }
  if (!a.table.empty()) {
    ensure_parent(a.table);
    write_text(a.table, table);
  }
  return 0;
}

struct DownstreamArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string table;
};

int run_downstream(Command& c, const DownstreamArgs& a, const std::string& name) {
  const json eff = resolve(c, name);
  if (a.manifest.empty()) throw Error(ErrorCode::InvalidArgument, "--manifest is required");
  const auto manifest = read_manifest(a.manifest);
  const auto scores = manifest_scores(manifest);
  std::vector<DownstreamResult> results;
  results.push_back(downstream_eval(oracle_features(manifest), scores, "oracle", c.common.seed, c.common.threads));
  if (!a.checkpoint.empty()) {
    const auto ckpt = read_checkpoint(a.checkpoint);
    results.push_back(
        downstream_eval(model_features(manifest, ckpt, c.common.threads), scores, "model", c.common.seed, c.common.threads));
  }
  const auto table = format_downstream_table(results);
  std::cout << table;
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_text(a.out, format_downstream_csv(results));
    write_sidecar(a.out, output_config(name, eff));
  }
  if (!a.table.empty()) {
    ensure_parent(a.table);
    write_text(a.table, table);
  }
  return 0;
}

int exit_code_for(const Error& e) {
  switch (error_category(e.code())) {
    case ErrorCategory::Usage:
      return 1;
    case ErrorCategory::Numeric:
      return 3;
    case ErrorCategory::Data:
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape measures of white-matter fiber clusters from point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  SynthArgs synth_args;
  auto synth = make_command(app, "synth", "Generate a synthetic cluster dataset");
  synth.settings->add("--subjects", "subjects", synth_args.subjects, "Number of subjects");
  synth.settings->add("--clusters-per-subject", "clusters_per_subject", synth_args.clusters, "Clusters per subject");
  synth.settings->add("--first-subject", "first_subject", synth_args.first_subject,
                      "Index of the first subject (later indices are new subjects of the same clusters)");
  synth.settings->add("--out-dir", "out_dir", synth_args.out_dir, "Output directory");
  synth.settings->add("--voxel-size", "voxel_size", synth_args.voxel_size, "Voxel size (mm) for the ground truth");

  ShapesArgs shapes_args;
  auto shapes = make_command(app, "shapes", "Compute voxel-oracle shape measures", false);
  shapes.settings->add("--input", "input", shapes_args.input, "TCK file or manifest.json");
  shapes.settings->add("--out", "out", shapes_args.out, "Output CSV");
  shapes.settings->add("--voxel-size", "voxel_size", shapes_args.voxel_size, "Voxel size in mm");
  shapes.settings->add("--subject-id", "subject_id", shapes_args.subject_id, "Subject id for a single TCK input");

  TrainArgs train_args;
  auto trainc = make_command(app, "train", "Train the Siamese point-cloud regressor");
  {
    auto& s = *trainc.settings;
    s.add("--manifest", "manifest", train_args.manifest, "Dataset manifest");
    s.add("--out", "out", train_args.out, "Checkpoint path");
    s.add("--history", "history", train_args.history, "History CSV (default <out>.history.csv)");
    s.add("--preset", "preset", train_args.preset, "desk | full");
    s.add("--epochs", "epochs", train_args.epochs, "Epochs");
    s.add("--batch-size", "batch_size", train_args.batch_size, "Pairs per optimizer step");
    s.add("--alpha", "alpha", train_args.alpha, "Weight of the Siamese-Fourier loss");
    s.add("--n-points", "n_points", train_args.n_points, "Points sampled per cluster");
    s.add("--lr", "learning_rate", train_args.learning_rate, "Initial learning rate");
    s.add("--weight-decay", "weight_decay", train_args.weight_decay, "Adam weight decay");
    s.add("--train-fraction", "train_fraction", train_args.train_fraction, "Fraction of subjects used for training");
    s.add("--voxel-size", "voxel_size", train_args.voxel_size, "Voxel size for missing ground truth");
  }

  EvalArgs eval_args;
  auto evalc = make_command(app, "eval", "Evaluate a checkpoint on the held-out subjects", false);
  evalc.settings->add("--manifest", "manifest", eval_args.manifest, "Dataset manifest");
  evalc.settings->add("--checkpoint", "checkpoint", eval_args.checkpoint, "Checkpoint");
  evalc.settings->add("--out", "out", eval_args.out, "Metrics CSV");
  evalc.settings->add("--table", "table", eval_args.table, "Aligned text table");
  evalc.settings->add("--voxel-size", "voxel_size", eval_args.voxel_size, "Voxel size for missing ground truth");

  BenchArgs bench_args;
  auto benchc = make_command(app, "bench", "Time network inference against the voxel oracle", false);
  benchc.settings->add("--manifest", "manifest", bench_args.manifest, "Dataset manifest");
  benchc.settings->add("--checkpoint", "checkpoint", bench_args.checkpoint, "Checkpoint");
  benchc.settings->add("--out", "out", bench_args.out, "Summary CSV");
  benchc.settings->add("--clusters-out", "clusters_out", bench_args.clusters_out, "Per-cluster timing CSV");
  benchc.settings->add("--table", "table", bench_args.table, "Aligned text table");
  benchc.settings->add("--voxel-size", "voxel_size", bench_args.voxel_size, "Oracle voxel size in mm");
  benchc.settings->add("--repetitions", "repetitions", bench_args.repetitions, "Timed repetitions per cluster");
  benchc.settings->add("--max-clusters", "max_clusters", bench_args.max_clusters, "Clusters to time (0 = all)");

  DownstreamArgs ds_args;
  auto dsc = make_command(app, "downstream", "LASSO prediction of subject scores from shape features");
  dsc.settings->add("--manifest", "manifest", ds_args.manifest, "Dataset manifest with scores");
  dsc.settings->add("--checkpoint", "checkpoint", ds_args.checkpoint, "Checkpoint for model-predicted features");
  dsc.settings->add("--out", "out", ds_args.out, "Report CSV");
  dsc.settings->add("--table", "table", ds_args.table, "Aligned text table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth.app->parsed()) return run_synth(synth, synth_args, "synth");
    if (shapes.app->parsed()) return run_shapes(shapes, shapes_args, "shapes");
    if (trainc.app->parsed()) return run_train(trainc, train_args, "train");
    if (evalc.app->parsed()) return run_eval(evalc, eval_args, "eval");
    if (benchc.app->parsed()) return run_bench(benchc, bench_args, "bench");
    if (dsc.app->parsed()) return run_downstream(dsc, ds_args, "downstream");
  } catch (const Error& e) {
    std::cerr << kToolName << ": error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const json::exception& e) {
    std::cerr << kToolName << ": error: SchemaError: " << e.what() << "\n";
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << kToolName << ": error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << kToolName << ": error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
