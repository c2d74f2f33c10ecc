#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "kae/errors.hpp"
#include "kae/eval.hpp"
#include "kae/ops.hpp"
#include "oracles.hpp"

using namespace kae;
namespace fs = std::filesystem;

namespace {

DatasetPair small_pair() {
  DatasetSpec spec;
  spec.classes = {ShapeClass::kSphere, ShapeClass::kBox, ShapeClass::kTorus};
  spec.per_class_train = 3;
  spec.per_class_test = 2;
  spec.n_points = 32;
  spec.seed = 31;
  return make_dataset(spec);
}

KaeModel small_model(std::size_t k = 4) {
  KaeModel m;
  m.config.n_points = 32;
  m.config.n_keypoints = k;
  m.config.point_widths = {16, 16};
  m.config.global_widths = {32};
  m.config.head_widths = {32};
  m.config.feature_width = 16;
  m.config.decoder_widths = {64};
  m.params = init_params(m.config, 2);
  return m;
}

LabeledSets random_sets(std::size_t count, std::size_t classes, std::mt19937_64& rng) {
  LabeledSets out;
  std::uniform_int_distribution<std::size_t> label(0, classes - 1);
  for (std::size_t i = 0; i < count; ++i) {
    out.sets.push_back(oracle::random_points(8, rng));
    out.labels.push_back(label(rng));
  }
  return out;
}

}  // namespace

TEST(Detectors, NamesRoundTrip) {
  for (auto d : {Detector::kKaeSoft, Detector::kKaeNms, Detector::kFps, Detector::kRandom})
    EXPECT_EQ(parse_detector(detector_name(d)), d);
  EXPECT_THROW(parse_detector("usip"), ConfigError);
  EXPECT_TRUE(needs_model(Detector::kKaeSoft));
  EXPECT_FALSE(needs_model(Detector::kFps));
}

TEST(Extract, FpsAndRandomAreSubsets) {
  const DatasetPair d = small_pair();
  for (auto det : {Detector::kFps, Detector::kRandom}) {
    const auto sets = extract_keypoints(det, nullptr, d.train, 6);
    ASSERT_EQ(sets.size(), d.train.clouds.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      ASSERT_EQ(sets[i].size(), 6u);
      for (const auto& p : sets[i]) {
        const auto& pts = d.train.clouds[i].points;
        EXPECT_NE(std::find(pts.begin(), pts.end(), p), pts.end());
      }
    }
  }
  EXPECT_EQ(extract_keypoints(Detector::kRandom, nullptr, d.train, 6),
            extract_keypoints(Detector::kRandom, nullptr, d.train, 6));
}

TEST(Extract, KaeDetectorsUseModel) {
  const DatasetPair d = small_pair();
  const KaeModel m = small_model();
  EXPECT_THROW(extract_keypoints(Detector::kKaeSoft, nullptr, d.train, 4), ConfigError);
  EXPECT_THROW(extract_keypoints(Detector::kKaeSoft, &m, d.train, 5), ConfigError);
  const auto soft = extract_keypoints(Detector::kKaeSoft, &m, d.train, 4);
  for (std::size_t i = 0; i < soft.size(); ++i) {
    Tape tape;
    const Tensor x = to_tensor(d.train.clouds[i].points);
    const auto expected = to_points(
        soft_propose(tape, encode(tape, m.config, m.params, x).probabilities, x));
    EXPECT_EQ(soft[i], expected);
  }
  const auto hard = extract_keypoints(Detector::kKaeNms, &m, d.train, 6);
  for (std::size_t i = 0; i < hard.size(); ++i) {
    ASSERT_EQ(hard[i].size(), 6u);
    const auto& pts = d.train.clouds[i].points;
    for (const auto& p : hard[i]) EXPECT_NE(std::find(pts.begin(), pts.end(), p), pts.end());
  }
}

TEST(Downstream, ConfigValidationAndHash) {
  DownstreamConfig c;
  EXPECT_NO_THROW(c.validate());
  const std::string h = c.hash();
  EXPECT_EQ(h, DownstreamConfig{}.hash());
  c.seed = 1;
  EXPECT_NE(h, c.hash());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Downstream, ClassifierIsPermutationInvariant) {
  std::mt19937_64 rng(4);
  LabeledSets train = random_sets(6, 3, rng);
  DownstreamConfig cfg;
  cfg.epochs = 1;
  const DownstreamResult r = train_downstream(train, train, 3, cfg);
  KeypointSet s = oracle::random_points(8, rng);
  Tape tape;
  const Tensor a = classifier_logits(tape, r.params, s);
  std::reverse(s.begin(), s.end());
  const Tensor b = classifier_logits(tape, r.params, s);
  ASSERT_EQ(a.numel(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-9);
}

TEST(Downstream, SingleClassIsPerfect) {
  std::mt19937_64 rng(5);
  LabeledSets train = random_sets(10, 2, rng), test = random_sets(10, 2, rng);
  std::fill(train.labels.begin(), train.labels.end(), 0u);
  std::fill(test.labels.begin(), test.labels.end(), 0u);
  DownstreamConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 1e-2;
  const DownstreamResult r = train_downstream(train, test, 2, cfg);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.per_class_accuracy[0], 1.0);
  EXPECT_TRUE(std::isnan(r.per_class_accuracy[1]));
  EXPECT_EQ(r.epoch_loss.size(), 10u);
}

TEST(Downstream, RandomLabelsGiveChance) {
  std::mt19937_64 rng(6);
  const LabeledSets train = random_sets(60, 3, rng), test = random_sets(600, 3, rng);
  DownstreamConfig cfg;
  cfg.epochs = 10;
  const DownstreamResult r = train_downstream(train, test, 3, cfg);
  EXPECT_NEAR(r.accuracy, 1.0 / 3.0, 0.1);
}

TEST(Downstream, Errors) {
  std::mt19937_64 rng(7);
  LabeledSets train = random_sets(4, 2, rng);
  DownstreamConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train_downstream(train, train, 1, cfg), ConfigError);
  train.labels[0] = 5;
  EXPECT_THROW(train_downstream(train, train, 2, cfg), ConfigError);
  EXPECT_THROW(train_downstream(LabeledSets{}, train, 2, cfg), ConfigError);
}

TEST(Reconstruction, MatchesMeanForwardChamfer) {
  const DatasetPair d = small_pair();
  const KaeModel m = small_model();
  double sum = 0.0;
  for (const auto& c : d.test.clouds) {
    Tape tape;
    sum += forward(tape, m.config, m.params, to_tensor(c.points), std::nullopt).chamfer.item();
  }
  EXPECT_NEAR(eval_reconstruction(m, d.test), sum / d.test.clouds.size(), 1e-12);

  Dataset one = d.test;
  one.clouds.resize(1);
  Tape tape;
  EXPECT_EQ(eval_reconstruction(m, one),
            forward(tape, m.config, m.params, to_tensor(one.clouds[0].points), std::nullopt)
                .chamfer.item());
}

TEST(Comparison, ReportIsDeterministicAndComplete) {
  const DatasetPair d = small_pair();
  const KaeModel m = small_model();
  ComparisonRequest req;
  req.detectors = {Detector::kKaeSoft, Detector::kFps, Detector::kRandom};
  req.downstream.k = 4;
  req.downstream.epochs = 2;
  const EvalReport a = run_comparison(d, &m, req);
  const EvalReport b = run_comparison(d, &m, req);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  ASSERT_EQ(a.rows.size(), 3u);
  for (const auto& row : a.rows) {
    EXPECT_GE(row.accuracy, 0.0);
    EXPECT_LE(row.accuracy, 1.0);
    EXPECT_EQ(row.config_hash, req.downstream.hash());
  }
  EXPECT_TRUE(a.kae_test_chamfer.has_value());
  const std::string table = a.table();
  for (const char* s : {"kae-soft", "fps", "random", "Accuracy"})
    EXPECT_NE(table.find(s), std::string::npos) << s;

  const fs::path dir = fs::temp_directory_path() / "kae-eval-report";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_report(a, dir);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
}

TEST(Comparison, SingleDetectorWithoutModel) {
  const DatasetPair d = small_pair();
  ComparisonRequest req;
  req.detectors = {Detector::kFps};
  req.downstream.k = 4;
  req.downstream.epochs = 1;
  const EvalReport r = run_comparison(d, nullptr, req);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.kae_test_chamfer.has_value());
  EXPECT_EQ(r.n_train, 9u);
  EXPECT_EQ(r.n_test, 6u);
  req.detectors = {Detector::kKaeSoft};
  EXPECT_THROW(run_comparison(d, nullptr, req), ConfigError);
}
