#include "kae/model.hpp"

#include <cmath>
#include <random>

#include "kae/errors.hpp"
#include "kae/layers.hpp"
#include "kae/ops.hpp"
#include "kae/random.hpp"

namespace kae {

void KaeConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("KaeConfig: " + msg); };
  if (n_points < 1) fail("n_points must be >= 1");
  if (n_keypoints < 1 || n_keypoints > n_points) fail("need 1 <= n_keypoints <= n_points");
  if (n_classes == 1) fail("n_classes must be 0 (no aux branch) or >= 2");
  if (!(aux_weight >= 0.0) || !std::isfinite(aux_weight)) fail("aux_weight must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) fail("temperature must be > 0");
  if (point_widths.empty() || global_widths.empty()) fail("encoder widths must be non-empty");
  if (feature_width < 1) fail("feature_width must be >= 1");
  for (const auto* widths : {&point_widths, &global_widths, &head_widths, &decoder_widths,
                             &aux_point_widths, &aux_head_widths}) {
    for (std::size_t w : *widths)
      if (w < 1) fail("layer widths must be >= 1");
  }
}

bool operator==(const KaeConfig& a, const KaeConfig& b) {
  return a.n_points == b.n_points && a.n_keypoints == b.n_keypoints &&
         a.n_classes == b.n_classes && a.aux_weight == b.aux_weight &&
         a.temperature == b.temperature && a.point_widths == b.point_widths &&
         a.global_widths == b.global_widths && a.head_widths == b.head_widths &&
         a.feature_width == b.feature_width && a.decoder_widths == b.decoder_widths &&
         a.aux_point_widths == b.aux_point_widths && a.aux_head_widths == b.aux_head_widths;
}

namespace {

void append_named(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const std::vector<Dense>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers[i].weight);
    out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers[i].bias);
  }
}

void require_cloud(const KaeConfig& config, const Tensor& cloud) {
  if (cloud.dim() != 2 || cloud.size(1) != 3 || cloud.size(0) != config.n_points) {
    throw ShapeError("expected cloud of shape [" + std::to_string(config.n_points) +
                     ",3], got " + shape_str(cloud.shape()));
  }
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named(out, "encoder.point", point_mlp);
  append_named(out, "encoder.global", global_mlp);
  append_named(out, "encoder.head", head);
  append_named(out, "decoder.point", {decoder_point});
  append_named(out, "decoder.fc", decoder_fc);
  append_named(out, "aux.point", aux_point);
  append_named(out, "aux.head", aux_head);
  return out;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors()) t.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.point_mlp = clone_layers(point_mlp);
  p.global_mlp = clone_layers(global_mlp);
  p.head = clone_layers(head);
  p.decoder_point = Dense{decoder_point.weight.clone(), decoder_point.bias.clone()};
  p.decoder_fc = clone_layers(decoder_fc);
  p.aux_point = clone_layers(aux_point);
  p.aux_head = clone_layers(aux_head);
  return p;
}

ModelParams init_params(const KaeConfig& config, std::uint64_t seed) {
  config.validate();
  auto rng = make_rng(seed, Stream::kInit);
  ModelParams p;
  p.point_mlp = make_mlp(3, config.point_widths, std::nullopt, rng);
  p.global_mlp = make_mlp(config.point_widths.back(), config.global_widths, std::nullopt, rng);
  p.head = make_mlp(config.point_widths.back() + config.global_widths.back(), config.head_widths,
                      config.n_keypoints, rng);
  p.decoder_point = make_dense(3, config.feature_width, rng);
  p.decoder_fc = make_mlp(config.n_keypoints * config.feature_width, config.decoder_widths,
                            3 * config.n_points, rng);
  if (config.aux_enabled()) {
    p.aux_point = make_mlp(config.feature_width, config.aux_point_widths, std::nullopt, rng);
    const std::size_t pooled =
        config.aux_point_widths.empty() ? config.feature_width : config.aux_point_widths.back();
    p.aux_head = make_mlp(pooled, config.aux_head_widths, config.n_classes, rng);
  }
  return p;
}

EncodeResult encode(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& cloud) {
  require_cloud(config, cloud);
  const Tensor local = run_mlp(tape, cloud, params.point_mlp, false);
  const Tensor global = maxpool_rows(tape, run_mlp(tape, local, params.global_mlp, false));
  const Tensor joined = concat_broadcast(tape, local, global);
  const Tensor per_point = run_mlp(tape, joined, params.head, true);  // [N,k]
  EncodeResult out;
  out.logits = transpose(tape, per_point);
  const Tensor tempered =
      config.temperature == 1.0 ? out.logits : scale(tape, out.logits, 1.0 / config.temperature);
  out.probabilities = softmax_rows(tape, tempered);
  return out;
}

Tensor soft_propose(Tape& tape, const Tensor& probabilities, const Tensor& cloud) {
  if (probabilities.dim() != 2 || cloud.dim() != 2 || cloud.size(1) != 3 ||
      probabilities.size(1) != cloud.size(0)) {
    throw ShapeError("soft_propose: probabilities " + shape_str(probabilities.shape()) +
                     " do not match cloud " + shape_str(cloud.shape()));
  }
  return matmul(tape, probabilities, cloud);
}

DecodeResult decode(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& keypoints) {
  if (keypoints.dim() != 2 || keypoints.size(0) != config.n_keypoints || keypoints.size(1) != 3) {
    throw ShapeError("decode: expected keypoints [" + std::to_string(config.n_keypoints) +
                     ",3], got " + shape_str(keypoints.shape()));
  }
  DecodeResult out;
  out.features = relu(tape, linear(tape, keypoints, params.decoder_point.weight,
                                   params.decoder_point.bias));
  const Tensor flat = reshape(tape, out.features, {1, config.n_keypoints * config.feature_width});
  const Tensor dense = run_mlp(tape, flat, params.decoder_fc, true);
  out.reconstruction = reshape(tape, dense, {config.n_points, 3});
  return out;
}

Tensor classify_aux(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& features) {
  if (!config.aux_enabled()) throw ConfigError("classify_aux: auxiliary branch is disabled");
  const Tensor local = run_mlp(tape, features, params.aux_point, false);
  const Tensor pooled = maxpool_rows(tape, local);
  const Tensor row = reshape(tape, pooled, {1, pooled.numel()});
  const Tensor logits = run_mlp(tape, row, params.aux_head, true);
  return reshape(tape, logits, {config.n_classes});
}

ForwardResult assemble_forward(Tape& tape, const KaeConfig& config, const ModelParams& params,
                               const Tensor& cloud, const EncodeResult& encoded,
                               const Tensor& soft_keypoints, const DecodeResult& decoded,
                               std::optional<std::size_t> label) {
  if (config.aux_enabled() && !label) {
    throw ConfigError("forward: a class label is required when the aux branch is enabled");
  }
  if (!config.aux_enabled() && label) {
    throw ConfigError("forward: class label given but the aux branch is disabled");
  }
  ForwardResult r;
  r.probabilities = encoded.probabilities;
  r.soft_keypoints = soft_keypoints;
  r.features = decoded.features;
  r.reconstruction = decoded.reconstruction;
  r.chamfer = chamfer_loss(tape, cloud, decoded.reconstruction);
  r.total_loss = r.chamfer;
  if (config.aux_enabled()) {
    r.aux_logits = classify_aux(tape, config, params, decoded.features);
    r.aux_loss = cross_entropy(tape, *r.aux_logits, *label);
    r.total_loss = add(tape, r.chamfer, scale(tape, *r.aux_loss, config.aux_weight));
  }
  return r;
}

ForwardResult forward(Tape& tape, const KaeConfig& config, const ModelParams& params,
                      const Tensor& cloud, std::optional<std::size_t> label) {
  const EncodeResult encoded = encode(tape, config, params, cloud);
  const Tensor keypoints = soft_propose(tape, encoded.probabilities, cloud);
  const DecodeResult decoded = decode(tape, config, params, keypoints);
  return assemble_forward(tape, config, params, cloud, encoded, keypoints, decoded, label);
}

}  // namespace kae
