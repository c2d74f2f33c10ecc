#include "kae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "kae/errors.hpp"
#include "kae/ops.hpp"
#include "kae/random.hpp"
#include "kae/training.hpp"

namespace kae {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view detector_name(Detector d) {
  switch (d) {
    case Detector::kKaeSoft: return "kae-soft";
    case Detector::kKaeNms: return "kae-nms";
    case Detector::kFps: return "fps";
    case Detector::kRandom: return "random";
  }
  return "unknown";
}

Detector parse_detector(std::string_view name) {
  for (auto d : {Detector::kKaeSoft, Detector::kKaeNms, Detector::kFps, Detector::kRandom}) {
    if (detector_name(d) == name) return d;
  }
  throw ConfigError("unknown detector '" + std::string(name) +
                    "' (expected kae-soft, kae-nms, fps or random)");
}

bool needs_model(Detector d) { return d == Detector::kKaeSoft || d == Detector::kKaeNms; }

std::vector<KeypointSet> extract_keypoints(Detector detector, const KaeModel* model,
                                           const Dataset& data, std::size_t k,
                                           const DetectorOptions& options) {
  if (needs_model(detector) && model == nullptr) {
    throw ConfigError(std::string(detector_name(detector)) + " needs a trained model");
  }
  if (detector == Detector::kKaeSoft && k != model->config.n_keypoints) {
    throw ConfigError("kae-soft yields the model's " + std::to_string(model->config.n_keypoints) +
                      " keypoints, but k=" + std::to_string(k) + " was requested");
  }
  std::vector<KeypointSet> out;
  out.reserve(data.clouds.size());
  for (std::size_t i = 0; i < data.clouds.size(); ++i) {
    const auto& pts = data.clouds[i].points;
    switch (detector) {
      case Detector::kKaeSoft: {
        Tape tape;
        const Tensor x = to_tensor(pts);
        const auto enc = encode(tape, model->config, model->params, x);
        out.push_back(to_points(soft_propose(tape, enc.probabilities, x)));
        break;
      }
      case Detector::kKaeNms: {
        Tape tape;
        const auto enc = encode(tape, model->config, model->params, to_tensor(pts));
        out.push_back(nms_select(pts, point_scores(enc.probabilities), k, options.nms).points);
        break;
      }
      case Detector::kFps:
        out.push_back(fps_select(pts, k, options.fps_start).points);
        break;
      case Detector::kRandom: {
        auto rng = make_rng(options.seed, Stream::kDetect, {i});
        out.push_back(random_select(pts, k, rng()).points);
        break;
      }
    }
  }
  return out;
}

void DownstreamConfig::validate() const {
  if (k < 1) throw ConfigError("downstream: k must be >= 1");
  if (epochs < 1) throw ConfigError("downstream: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("downstream: learning rate must be > 0");
  if (point_widths.empty()) throw ConfigError("downstream: need at least one point layer");
}

json DownstreamConfig::to_json() const {
  return json{{"k", k},
              {"point_widths", point_widths},
              {"head_widths", head_widths},
              {"epochs", epochs},
              {"learning_rate", learning_rate},
              {"seed", seed}};
}

std::string DownstreamConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Tensor> ClassifierParams::tensors() const {
  std::vector<Tensor> out;
  for (const auto* group : {&point, &head}) {
    for (const auto& l : *group) {
      out.push_back(l.weight);
      out.push_back(l.bias);
    }
  }
  return out;
}

Tensor classifier_logits(Tape& tape, const ClassifierParams& params, const KeypointSet& set) {
  const Tensor local = run_mlp(tape, to_tensor(set), params.point, false);
  const Tensor pooled = maxpool_rows(tape, local);
  const Tensor logits = run_mlp(tape, reshape(tape, pooled, {1, pooled.numel()}), params.head, true);
  return reshape(tape, logits, {logits.numel()});
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_sets(const LabeledSets& s, std::size_t k, std::size_t n_classes, const char* split) {
  if (s.sets.size() != s.labels.size()) {
    throw ConfigError(std::string(split) + ": keypoint sets and labels differ in count");
  }
  for (std::size_t i = 0; i < s.sets.size(); ++i) {
    if (s.sets[i].size() != k) {
      throw ConfigError(std::string(split) + ": keypoint set " + std::to_string(i) + " has " +
                        std::to_string(s.sets[i].size()) + " points, expected " +
                        std::to_string(k));
    }
    if (s.labels[i] >= n_classes) {
      throw ConfigError(std::string(split) + ": label " + std::to_string(s.labels[i]) +
                        " out of range for " + std::to_string(n_classes) + " classes");
    }
  }
}

}  // namespace

DownstreamResult train_downstream(const LabeledSets& train, const LabeledSets& test,
                                  std::size_t n_classes, const DownstreamConfig& config) {
  config.validate();
  if (n_classes < 2) throw ConfigError("downstream: need at least two classes");
  if (train.sets.empty()) throw ConfigError("downstream: empty training split");
  check_sets(train, config.k, n_classes, "train");
  check_sets(test, config.k, n_classes, "test");

  DownstreamResult result;
  auto init_rng = make_rng(config.seed, Stream::kDownstreamInit);
  result.params.point = make_mlp(3, config.point_widths, std::nullopt, init_rng);
  result.params.head = make_mlp(config.point_widths.back(), config.head_widths, n_classes, init_rng);

  TrainConfig opt;
  opt.learning_rate = config.learning_rate;
  std::vector<Tensor> params = result.params.tensors();
  OptimizerState state = OptimizerState::zeros_like(params);
  std::vector<std::size_t> order(train.sets.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(config.seed, Stream::kDownstreamShuffle, {epoch});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      for (auto& p : params) p.zero_grad();
      Tape tape;
      const Tensor loss =
          cross_entropy(tape, classifier_logits(tape, result.params, train.sets[idx]), train.labels[idx]);
      tape.backward(loss);
      adam_step(params, state, opt);
      total += loss.item();
    }
    result.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }

  std::vector<std::size_t> hits(n_classes, 0), counts(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.sets.size(); ++i) {
    Tape tape;
    const Tensor logits = classifier_logits(tape, result.params, test.sets[i]);
    const bool ok = argmax(logits.data()) == test.labels[i];
    correct += ok;
    hits[test.labels[i]] += ok;
    ++counts[test.labels[i]];
  }
  result.accuracy = test.sets.empty() ? 0.0
                                      : static_cast<double>(correct) /
                                            static_cast<double>(test.sets.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    result.per_class_accuracy.push_back(
        counts[c] ? static_cast<double>(hits[c]) / static_cast<double>(counts[c])
                  : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

double eval_reconstruction(const KaeModel& model, const Dataset& data) {
  if (data.clouds.empty()) throw ConfigError("eval_reconstruction: empty dataset");
  double total = 0.0;
  for (const auto& c : data.clouds) {
    Tape tape;
    const Tensor x = to_tensor(c.points);
    const auto enc = encode(tape, model.config, model.params, x);
    const auto dec = decode(tape, model.config, model.params, soft_propose(tape, enc.probabilities, x));
    total += chamfer_loss(tape, x, dec.reconstruction).item();
  }
  return total / static_cast<double>(data.clouds.size());
}

namespace {

LabeledSets labeled(std::vector<KeypointSet> sets, const Dataset& data) {
  LabeledSets out{std::move(sets), {}};
  for (const auto& c : data.clouds) {
    if (!c.label) throw ConfigError("evaluation needs class labels; " + c.name + " has none");
    out.labels.push_back(*c.label);
  }
  return out;
}

json nan_to_null(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) {
    if (std::isnan(x)) {
      out.push_back(nullptr);
    } else {
      out.push_back(x);
    }
  }
  return out;
}

}  // namespace

EvalReport run_comparison(const DatasetPair& data, const KaeModel* model,
                          const ComparisonRequest& request) {
  if (request.detectors.empty()) throw ConfigError("no detectors requested");
  request.downstream.validate();
  data.train.validate();
  data.test.validate();
  const std::size_t n_classes = data.train.class_names.size();

  EvalReport report;
  report.class_names = data.train.class_names;
  report.n_train = data.train.clouds.size();
  report.n_test = data.test.clouds.size();
  report.n_points = data.train.n_points();
  report.downstream = request.downstream;
  report.detect = request.detect;
  if (model) report.kae_test_chamfer = eval_reconstruction(*model, data.test);

  const std::size_t k = request.downstream.k;
  for (Detector d : request.detectors) {
    const LabeledSets train = labeled(extract_keypoints(d, model, data.train, k, request.detect), data.train);
    DetectorOptions test_opts = request.detect;
    // Keep random draws for the test split independent of the train split.
    test_opts.seed = make_rng(request.detect.seed, Stream::kDetect, {1})();
    const LabeledSets test = labeled(extract_keypoints(d, model, data.test, k, test_opts), data.test);
    const DownstreamResult r = train_downstream(train, test, n_classes, request.downstream);
    report.rows.push_back(DetectorRow{d, r.accuracy, r.per_class_accuracy, request.downstream.hash()});
  }
  return report;
}

json EvalReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"detector", detector_name(r.detector)},
                         {"accuracy", r.accuracy},
                         {"per_class_accuracy", nan_to_null(r.per_class_accuracy)},
                         {"classifier_config_hash", r.config_hash}});
  }
  json j;
  j["format"] = "kae-eval-report";
  j["version"] = 1;
  j["detectors"] = std::move(rows_json);
  j["classes"] = class_names;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["n_points"] = n_points;
  j["kae_test_mean_chamfer"] = kae_test_chamfer ? json(*kae_test_chamfer) : json(nullptr);
  j["downstream"] = downstream.to_json();
  j["detection"] = {{"nms_radius", detect.nms.radius},
                    {"nms_fallback",
                     detect.nms.fallback == NmsFallback::kTopUp ? "top-up" : "shrink-radius"},
                    {"fps_start", detect.fps_start},
                    {"seed", detect.seed}};
  if (!extra.is_null()) j["invocation"] = extra;
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "  %10s", std::string(detector_name(r.detector)).c_str());
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "%-10s", "Accuracy");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "  %9.1f%%", 100.0 * r.accuracy);
    out << buf;
  }
  out << '\n';
  out << "\nk=" << downstream.k << " keypoints, " << downstream.epochs << " epochs, "
      << n_train << " train / " << n_test << " test clouds, N=" << n_points
      << ", classifier seed " << downstream.seed << '\n';
  if (kae_test_chamfer) {
    std::snprintf(buf, sizeof buf, "%.6f", *kae_test_chamfer);
    out << "KAE mean test chamfer: " << buf << '\n';
  }
  return out.str();
}

void write_report(const EvalReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream j(dir / "report.json");
  std::ofstream t(dir / "report.txt");
  if (!j || !t) throw IoError("cannot write report into " + dir.string());
  j << report.to_json().dump(2) << '\n';
  t << report.table();
  if (!j || !t) throw IoError("failed writing report into " + dir.string());
}

}  // namespace kae
