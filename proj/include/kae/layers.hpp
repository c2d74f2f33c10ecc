#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "kae/tape.hpp"
#include "kae/tensor.hpp"

namespace kae {

// One fully connected layer: y = x . weight + bias.
struct Dense {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
Dense make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng);

// in -> widths[0] -> ... -> widths.back() (-> final_out when given).
std::vector<Dense> make_mlp(std::size_t in, const std::vector<std::size_t>& widths,
                            std::optional<std::size_t> final_out, std::mt19937_64& rng);

// relu after every layer, except the last one when linear_last is set.
Tensor run_mlp(Tape& tape, Tensor x, const std::vector<Dense>& layers, bool linear_last);

std::vector<Dense> clone_layers(const std::vector<Dense>& layers);

}  // namespace kae
