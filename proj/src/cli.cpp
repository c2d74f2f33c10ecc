#include "kae/cli.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "kae/checkpoint.hpp"
#include "kae/data.hpp"
#include "kae/detection.hpp"
#include "kae/errors.hpp"
#include "kae/eval.hpp"
#include "kae/model.hpp"
#include "kae/ops.hpp"
#include "kae/training.hpp"

namespace kae {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

bool looks_numeric(const std::string& s) {
  double v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  return !s.empty() && ec == std::errc() && ptr == end;
}

json value_json(const std::string& s) { return looks_numeric(s) ? json::parse(s) : json(s); }

// Flat {"<subcommand>.<option>": value} of every option of `sub`, given or
// defaulted. Loading it back through --config reproduces the invocation.
json effective_config(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt == sub.get_help_ptr() || opt->get_lnames().empty()) continue;
    const std::string key = sub.get_name() + "." + opt->get_lnames().front();
    if (opt->get_expected_min() == 0) {
      const std::string d = opt->get_default_str();
      out[key] = opt->count() > 0 || d == "true" || d == "1";
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty() && !opt->get_default_str().empty()) values = {opt->get_default_str()};
    if (values.empty()) {
      out[key] = nullptr;
    } else if (opt->get_items_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(value_json(v));
      out[key] = std::move(arr);
    } else {
      out[key] = value_json(values.front());
    }
  }
  return out;
}

// JSON configuration: flat dotted keys ("train.epochs": 100) or nested
// objects ({"train": {"epochs": 100}}). Arrays map to multi-value options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    json out = json::object();
    for (const CLI::App* sub : app->get_subcommands()) out.update(effective_config(*sub));
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [raw_key, value] : obj.items()) {
      std::vector<std::string> path = parents;
      std::size_t start = 0;
      while (true) {
        const auto dot = raw_key.find('.', start);
        path.push_back(raw_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      if (value.is_object()) {
        collect(value, path, items);
        continue;
      }
      if (value.is_null()) continue;
      CLI::ConfigItem item;
      item.name = path.back();
      path.pop_back();
      item.parents = path;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

NmsFallback parse_fallback(const std::string& s) {
  if (s == "top-up") return NmsFallback::kTopUp;
  if (s == "shrink-radius") return NmsFallback::kShrinkRadius;
  throw ConfigError("unknown NMS fallback '" + s + "' (expected top-up or shrink-radius)");
}

// ---- synth ----

struct SynthArgs {
  std::vector<std::string> classes{"sphere", "box", "torus"};
  std::size_t train = 50;
  std::size_t test = 20;
  std::size_t n = 256;
  std::uint64_t seed = 0;
  double noise = 0.01;
  bool no_rotation = false;
  std::string out = "kae-out";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synth", "Generate a labeled synthetic shape dataset");
  sub->add_option("--classes", a.classes, "Shape classes (sphere, box, cylinder, torus, two-spheres)")
      ->delimiter(',');
  sub->add_option("--train", a.train, "Training clouds per class");
  sub->add_option("--test", a.test, "Test clouds per class");
  sub->add_option("--n", a.n, "Points per cloud");
  sub->add_option("--seed", a.seed, "Random seed");
  sub->add_option("--noise", a.noise, "Gaussian jitter sigma before normalization");
  sub->add_flag("--no-rotation", a.no_rotation, "Keep shapes axis-aligned");
  sub->add_option("--out", a.out, "Output directory");
}

int cmd_synth(const CLI::App& sub, const SynthArgs& a) {
  DatasetSpec spec;
  for (const auto& name : a.classes) spec.classes.push_back(parse_shape(name));
  if (spec.classes.size() < 2) throw ConfigError("synth: need at least two classes");
  if (a.n < 8) throw ConfigError("synth: --n must be at least 8");
  if (a.train < 1) throw ConfigError("synth: --train must be at least 1");
  if (!(a.noise >= 0.0)) throw ConfigError("synth: --noise must be >= 0");
  spec.per_class_train = a.train;
  spec.per_class_test = a.test;
  spec.n_points = a.n;
  spec.seed = a.seed;
  spec.noise_sigma = a.noise;
  spec.random_rotation = !a.no_rotation;

  const DatasetPair data = make_dataset(spec);
  const fs::path out = a.out;
  write_manifest(data, out);
  write_json(out / "effective-config.json", effective_config(sub));
  std::cout << "wrote " << data.train.clouds.size() << " train and " << data.test.clouds.size()
            << " test clouds to " << out.string() << '\n';
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string manifest;
  std::size_t k = 8;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double tau = 1.0;
  double aux_weight = 0.0;
  std::size_t checkpoint_every = 0;
  bool no_shuffle = false;
  std::string resume;
  bool quiet = false;
  std::string out = "kae-out";
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train a keypoint autoencoder on a manifest");
  sub->add_option("--manifest", a.manifest, "Dataset manifest JSON");
  sub->add_option("--k", a.k, "Number of keypoints");
  sub->add_option("--epochs", a.epochs, "Total epochs");
  sub->add_option("--seed", a.seed, "Seed for initialization and shuffling");
  sub->add_option("--lr", a.lr, "Adam learning rate");
  sub->add_option("--beta1", a.beta1, "Adam beta1");
  sub->add_option("--beta2", a.beta2, "Adam beta2");
  sub->add_option("--adam-eps", a.adam_eps, "Adam epsilon");
  sub->add_option("--tau", a.tau, "Encoder softmax temperature");
  sub->add_option("--aux-weight", a.aux_weight,
                  "Auxiliary classification weight; > 0 enables the AC-KAE branch");
  sub->add_option("--checkpoint-every", a.checkpoint_every, "Also checkpoint every n epochs");
  sub->add_flag("--no-shuffle", a.no_shuffle, "Visit samples in manifest order");
  sub->add_option("--resume", a.resume, "Continue from a checkpoint");
  sub->add_flag("--quiet", a.quiet, "No per-epoch progress output");
  sub->add_option("--out", a.out, "Output directory");
}

template <typename T>
void require_same(const CLI::App& sub, const char* flag, const T& given, const T& stored) {
  if (sub.count(flag) > 0 && !(given == stored)) {
    throw ConfigError(std::string("--resume: ") + flag + " differs from the checkpoint");
  }
}

int cmd_train(const CLI::App& sub, const TrainArgs& a) {
  if (a.manifest.empty()) throw ConfigError("train: --manifest is required");
  if (!(a.aux_weight >= 0.0)) throw ConfigError("train: --aux-weight must be >= 0");
  const DatasetPair data = load_manifest(a.manifest);
  if (data.train.clouds.empty()) throw ConfigError("train: manifest has no training clouds");
  const bool aux = a.aux_weight > 0.0;
  if (aux && data.train.class_names.size() < 2) {
    throw ConfigError("train: --aux-weight needs at least two classes in the manifest");
  }

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.beta1 = a.beta1;
  tc.beta2 = a.beta2;
  tc.epsilon = a.adam_eps;
  tc.seed = a.seed;
  tc.checkpoint_interval = a.checkpoint_every;
  tc.shuffle = !a.no_shuffle;

  KaeConfig mc;
  mc.n_points = data.train.n_points();
  mc.n_keypoints = a.k;
  mc.temperature = a.tau;
  if (aux) {
    mc.n_classes = data.train.class_names.size();
    mc.aux_weight = a.aux_weight;
  }

  TrainState state;
  if (!a.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.resume);
    const KaeConfig& m = ck.state.model;
    if (m.n_points != mc.n_points) {
      throw ConfigError("--resume: checkpoint expects " + std::to_string(m.n_points) +
                        " points per cloud, manifest has " + std::to_string(mc.n_points));
    }
    require_same(sub, "--k", mc.n_keypoints, m.n_keypoints);
    require_same(sub, "--tau", mc.temperature, m.temperature);
    require_same(sub, "--aux-weight", mc.effective_aux_weight(), m.effective_aux_weight());
    require_same(sub, "--lr", tc.learning_rate, ck.train_config.learning_rate);
    require_same(sub, "--beta1", tc.beta1, ck.train_config.beta1);
    require_same(sub, "--beta2", tc.beta2, ck.train_config.beta2);
    require_same(sub, "--adam-eps", tc.epsilon, ck.train_config.epsilon);
    require_same(sub, "--seed", tc.seed, ck.train_config.seed);
    if (sub.count("--no-shuffle") > 0 && tc.shuffle != ck.train_config.shuffle) {
      throw ConfigError("--resume: --no-shuffle differs from the checkpoint");
    }
    if (m.aux_enabled() && m.n_classes != data.train.class_names.size()) {
      throw ConfigError("--resume: checkpoint class count differs from the manifest");
    }
    const std::size_t target = tc.epochs;
    const std::size_t interval = tc.checkpoint_interval;
    tc = ck.train_config;
    tc.epochs = target;
    tc.checkpoint_interval = interval;
    state = std::move(ck.state);
  } else {
    mc.validate();
    state = start_training(mc, tc);
  }

  const fs::path out = a.out;
  fs::create_directories(out);
  TrainHooks hooks;
  hooks.on_epoch_end = [&](const TrainState& s) {
    const EpochStats& e = s.history.back();
    if (!a.quiet) {
      std::printf("epoch %zu/%zu  chamfer %.6f  aux %.6f  total %.6f\n", e.epoch, tc.epochs,
                  e.mean_chamfer, e.mean_aux, e.mean_total);
      std::fflush(stdout);
    }
    if (tc.checkpoint_interval > 0 && e.epoch % tc.checkpoint_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint-epoch-%04zu.kae", e.epoch);
      save_checkpoint(out / name, s, tc);
    }
  };
  continue_training(state, data.train, tc, hooks);

  save_checkpoint(out / "checkpoint.kae", state, tc);
  {
    std::ofstream csv(out / "loss.csv");
    if (!csv) throw IoError("cannot write " + (out / "loss.csv").string());
    write_loss_csv(state.history, csv);
  }
  write_json(out / "effective-config.json", effective_config(sub));
  return kExitOk;
}

// ---- detect ----

struct DetectArgs {
  std::string ckpt;
  std::vector<std::string> inputs;
  std::size_t k = 0;
  std::string mode = "soft";
  double radius = 0.1;
  std::string fallback = "top-up";
  bool ply = false;
  std::string out = "kae-out";
};

void add_detect(CLI::App& app, DetectArgs& a) {
  auto* sub = app.add_subcommand("detect", "Detect keypoints in .xyz clouds with a trained model");
  sub->add_option("--ckpt", a.ckpt, "Model checkpoint");
  sub->add_option("--in", a.inputs, "Input .xyz cloud (repeatable)");
  sub->add_option("--k", a.k, "Keypoints per cloud (default: the model's k)");
  sub->add_option("--mode", a.mode, "soft (weighted averages) or nms (selected input points)")
      ->check(CLI::IsMember({"soft", "nms"}));
  sub->add_option("--radius", a.radius, "NMS suppression radius in normalized units");
  sub->add_option("--fallback", a.fallback, "NMS exhaustion policy: top-up or shrink-radius")
      ->check(CLI::IsMember({"top-up", "shrink-radius"}));
  sub->add_flag("--ply", a.ply, "Also write a colored PLY per cloud");
  sub->add_option("--out", a.out, "Output directory");
}

int cmd_detect(const CLI::App& sub, const DetectArgs& a) {
  if (a.ckpt.empty()) throw ConfigError("detect: --ckpt is required");
  if (a.inputs.empty()) throw ConfigError("detect: at least one --in cloud is required");
  const NmsConfig nms{a.radius, parse_fallback(a.fallback)};
  if (!(nms.radius >= 0.0)) throw ConfigError("detect: --radius must be >= 0");

  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const KaeConfig& mc = ck.state.model;
  const std::size_t k = a.k == 0 ? mc.n_keypoints : a.k;
  if (a.mode == "soft" && k != mc.n_keypoints) {
    throw ConfigError("detect: soft mode yields the model's " + std::to_string(mc.n_keypoints) +
                      " keypoints; --k " + std::to_string(k) + " needs --mode nms");
  }
  if (k > mc.n_points) throw ConfigError("detect: --k exceeds the number of points per cloud");

  const fs::path out = a.out;
  fs::create_directories(out);
  for (const auto& input : a.inputs) {
    const PointCloud cloud = load_xyz(input);
    if (cloud.size() != mc.n_points) {
      throw ConfigError("detect: " + input + " has " + std::to_string(cloud.size()) +
                        " points, the model expects " + std::to_string(mc.n_points));
    }
    const Normalization norm = fit_normalization(cloud.points);
    std::vector<Point3> local;
    local.reserve(cloud.size());
    for (const auto& p : cloud.points) local.push_back(norm.apply(p));

    Tape tape;
    const Tensor x = to_tensor(local);
    const EncodeResult enc = encode(tape, mc, ck.state.params, x);
    std::vector<Point3> keypoints;
    if (a.mode == "soft") {
      for (const auto& p : to_points(soft_propose(tape, enc.probabilities, x))) {
        keypoints.push_back(norm.invert(p));
      }
    } else {
      const HardKeypoints hard = nms_select(local, point_scores(enc.probabilities), k, nms);
      for (std::size_t idx : hard.indices) keypoints.push_back(cloud.points[idx]);
    }
    const std::string stem = fs::path(input).stem().string();
    save_xyz(keypoints, out / (stem + ".keypoints.xyz"));
    if (a.ply) save_ply(cloud.points, keypoints, out / (stem + ".ply"));
  }
  write_json(out / "effective-config.json", effective_config(sub));
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string manifest;
  std::string ckpt;
  std::vector<std::string> detectors{"kae-soft", "fps", "random"};
  std::size_t k = 8;
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double radius = 0.1;
  std::string fallback = "top-up";
  std::size_t fps_start = 0;
  std::string out = "kae-out";
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Downstream classifier accuracy per keypoint detector");
  sub->add_option("--manifest", a.manifest, "Dataset manifest JSON");
  sub->add_option("--ckpt", a.ckpt, "KAE checkpoint (needed for kae-* detectors)");
  sub->add_option("--detectors", a.detectors, "kae-soft, kae-nms, fps, random")->delimiter(',');
  sub->add_option("--k", a.k, "Keypoints per cloud");
  sub->add_option("--epochs", a.epochs, "Classifier training epochs");
  sub->add_option("--lr", a.lr, "Classifier learning rate");
  sub->add_option("--seed", a.seed, "Seed for classifier init, shuffling and random detector");
  sub->add_option("--radius", a.radius, "NMS radius for kae-nms");
  sub->add_option("--fallback", a.fallback, "NMS exhaustion policy")
      ->check(CLI::IsMember({"top-up", "shrink-radius"}));
  sub->add_option("--fps-start", a.fps_start, "FPS start index");
  sub->add_option("--out", a.out, "Output directory");
}

int cmd_eval(const CLI::App& sub, const EvalArgs& a) {
  if (a.manifest.empty()) throw ConfigError("eval: --manifest is required");
  ComparisonRequest req;
  for (const auto& name : a.detectors) req.detectors.push_back(parse_detector(name));
  if (req.detectors.empty()) throw ConfigError("eval: no detectors given");
  const bool want_model =
      std::any_of(req.detectors.begin(), req.detectors.end(), [](Detector d) { return needs_model(d); });
  if (want_model && a.ckpt.empty()) throw ConfigError("eval: kae detectors need --ckpt");
  req.downstream.k = a.k;
  req.downstream.epochs = a.epochs;
  req.downstream.learning_rate = a.lr;
  req.downstream.seed = a.seed;
  req.downstream.validate();
  req.detect.nms = NmsConfig{a.radius, parse_fallback(a.fallback)};
  req.detect.fps_start = a.fps_start;
  req.detect.seed = a.seed;

  const DatasetPair data = load_manifest(a.manifest);
  if (data.train.clouds.empty() || data.test.clouds.empty()) {
    throw ConfigError("eval: manifest needs both train and test clouds");
  }
  if (a.k > data.train.n_points()) throw ConfigError("eval: --k exceeds points per cloud");
  if (a.fps_start >= data.train.n_points()) throw ConfigError("eval: --fps-start out of range");

  std::optional<KaeModel> model;
  if (!a.ckpt.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.ckpt);
    if (ck.state.model.n_points != data.train.n_points()) {
      throw ConfigError("eval: checkpoint expects " + std::to_string(ck.state.model.n_points) +
                        " points per cloud, manifest has " + std::to_string(data.train.n_points()));
    }
    model = KaeModel{ck.state.model, std::move(ck.state.params)};
  }

  EvalReport report = run_comparison(data, model ? &*model : nullptr, req);
  report.extra = effective_config(sub);
  const fs::path out = a.out;
  write_report(report, out);
  write_json(out / "effective-config.json", report.extra);
  std::cout << report.table();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Keypoint autoencoder: synthesize data, train, detect keypoints, evaluate"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config with flat dotted keys, e.g. {\"train.epochs\": 100}");
  app.fallthrough();
  app.require_subcommand(1);

  SynthArgs synth;
  TrainArgs train_args;
  DetectArgs detect;
  EvalArgs eval_args;
  add_synth(app, synth);
  add_train(app, train_args);
  add_detect(app, detect);
  add_eval(app, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") return cmd_synth(*sub, synth);
    if (name == "train") return cmd_train(*sub, train_args);
    if (name == "detect") return cmd_detect(*sub, detect);
    return cmd_eval(*sub, eval_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("kae");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace kae
