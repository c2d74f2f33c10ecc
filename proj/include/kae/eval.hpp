#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kae/data.hpp"
#include "kae/detection.hpp"
#include "kae/layers.hpp"
#include "kae/model.hpp"

namespace kae {

using KeypointSet = std::vector<Point3>;

enum class Detector { kKaeSoft, kKaeNms, kFps, kRandom };

std::string_view detector_name(Detector d);
// Throws ConfigError for unknown names.
Detector parse_detector(std::string_view name);
bool needs_model(Detector d);

struct DetectorOptions {
  NmsConfig nms;
  std::size_t fps_start = 0;
  std::uint64_t seed = 0;  // random_select stream
};

// One k-point set per cloud, in dataset order. kae-soft needs k equal to the
// model's keypoint count. Throws ConfigError if a kae detector has no model.
std::vector<KeypointSet> extract_keypoints(Detector detector, const KaeModel* model,
                                           const Dataset& data, std::size_t k,
                                           const DetectorOptions& options = {});

// Downstream PointNet-style classifier trained on keypoints only.
struct DownstreamConfig {
  std::size_t k = 8;
  std::vector<std::size_t> point_widths{64};
  std::vector<std::size_t> head_widths{32};
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // FNV-1a of to_json(); equal hashes mean identical classifier setups.
  std::string hash() const;
};

struct ClassifierParams {
  std::vector<Dense> point;
  std::vector<Dense> head;

  std::vector<Tensor> tensors() const;
};

struct LabeledSets {
  std::vector<KeypointSet> sets;
  std::vector<std::size_t> labels;
};

struct DownstreamResult {
  ClassifierParams params;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from test
  std::vector<double> epoch_loss;
};

Tensor classifier_logits(Tape& tape, const ClassifierParams& params, const KeypointSet& set);

// Trains on `train` for config.epochs and reports accuracy on `test`.
DownstreamResult train_downstream(const LabeledSets& train, const LabeledSets& test,
                                  std::size_t n_classes, const DownstreamConfig& config);

// Mean chamfer between each cloud and the model's reconstruction of it.
double eval_reconstruction(const KaeModel& model, const Dataset& data);

struct DetectorRow {
  Detector detector;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::string config_hash;
};

struct EvalReport {
  std::vector<DetectorRow> rows;
  std::vector<std::string> class_names;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_points = 0;
  std::optional<double> kae_test_chamfer;
  DownstreamConfig downstream;
  DetectorOptions detect;
  nlohmann::json extra;  // caller-provided echo (e.g. CLI effective config)

  nlohmann::json to_json() const;
  // Aligned text: one column per detector, one accuracy row.
  std::string table() const;
};

struct ComparisonRequest {
  std::vector<Detector> detectors;
  DownstreamConfig downstream;
  DetectorOptions detect;
};

// Same classifier config and seed for every detector.
EvalReport run_comparison(const DatasetPair& data, const KaeModel* model,
                          const ComparisonRequest& request);

// Writes report.json and report.txt into dir.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace kae
