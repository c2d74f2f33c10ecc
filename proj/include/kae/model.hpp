#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kae/layers.hpp"
#include "kae/point_cloud.hpp"
#include "kae/tape.hpp"
#include "kae/tensor.hpp"

namespace kae {

// Network and loss configuration for the keypoint autoencoder.
//
// The auxiliary classifier (AC-KAE) is enabled by n_classes >= 2; with
// n_classes == 0 no aux parameters exist and aux_weight has no effect.
struct KaeConfig {
  std::size_t n_points = 256;
  std::size_t n_keypoints = 8;
  std::size_t n_classes = 0;
  double aux_weight = 1.0;
  double temperature = 1.0;

  // Encoder: shared per-point MLP, global MLP before max-pooling, and the
  // head applied to [point feature | global feature] that ends in k logits.
  std::vector<std::size_t> point_widths{64, 64};
  std::vector<std::size_t> global_widths{128};
  std::vector<std::size_t> head_widths{128};
  // Decoder: per-keypoint feature width, then FC hidden widths to 3N.
  std::size_t feature_width = 64;
  std::vector<std::size_t> decoder_widths{512};
  // Aux classifier: per-keypoint widths before pooling, FC widths after.
  std::vector<std::size_t> aux_point_widths{64};
  std::vector<std::size_t> aux_head_widths{32};

  bool aux_enabled() const { return n_classes >= 2; }
  double effective_aux_weight() const { return aux_enabled() ? aux_weight : 0.0; }
  // Throws ConfigError on violated invariants.
  void validate() const;
};

bool operator==(const KaeConfig& a, const KaeConfig& b);

struct ModelParams {
  std::vector<Dense> point_mlp;
  std::vector<Dense> global_mlp;
  std::vector<Dense> head;
  Dense decoder_point;
  std::vector<Dense> decoder_fc;
  std::vector<Dense> aux_point;
  std::vector<Dense> aux_head;

  // Stable (name, tensor) listing; names are checkpoint keys. The tensors
  // are handles to the parameter storage.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> tensors() const;
  std::size_t count() const;
  void zero_grad();
  ModelParams clone() const;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParams init_params(const KaeConfig& config, std::uint64_t seed);

struct EncodeResult {
  Tensor logits;         // [k,N] before softmax
  Tensor probabilities;  // D, [k,N], rows sum to 1
};

struct DecodeResult {
  Tensor features;        // [k, feature_width]
  Tensor reconstruction;  // [N,3]
};

struct ForwardResult {
  Tensor probabilities;
  Tensor soft_keypoints;
  Tensor features;
  Tensor reconstruction;
  Tensor chamfer;
  std::optional<Tensor> aux_logits;
  std::optional<Tensor> aux_loss;
  Tensor total_loss;
};

EncodeResult encode(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& cloud);

// K_s = D . X; each keypoint is a convex combination of input points.
Tensor soft_propose(Tape& tape, const Tensor& probabilities, const Tensor& cloud);

DecodeResult decode(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& keypoints);

// Throws ConfigError when the aux branch is disabled.
Tensor classify_aux(Tape& tape, const KaeConfig& config, const ModelParams& params,
                    const Tensor& features);

// Loss assembly from decoder outputs: L_c = chamfer(cloud, reconstruction),
// total = L_c + lambda * cross_entropy(aux logits, label) when aux is enabled.
ForwardResult assemble_forward(Tape& tape, const KaeConfig& config, const ModelParams& params,
                               const Tensor& cloud, const EncodeResult& encoded,
                               const Tensor& soft_keypoints, const DecodeResult& decoded,
                               std::optional<std::size_t> label);

// Full pipeline encode -> soft_propose -> decode -> losses. `label` must be
// present exactly when the aux branch is enabled.
ForwardResult forward(Tape& tape, const KaeConfig& config, const ModelParams& params,
                      const Tensor& cloud, std::optional<std::size_t> label);

// Config plus trained weights.
struct KaeModel {
  KaeConfig config;
  ModelParams params;
};

}  // namespace kae
