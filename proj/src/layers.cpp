#include "kae/layers.hpp"

#include <cmath>

#include "kae/ops.hpp"

namespace kae {

Dense make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  return Dense{Tensor({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

std::vector<Dense> make_mlp(std::size_t in, const std::vector<std::size_t>& widths,
                            std::optional<std::size_t> final_out, std::mt19937_64& rng) {
  std::vector<Dense> layers;
  for (std::size_t w : widths) {
    layers.push_back(make_dense(in, w, rng));
    in = w;
  }
  if (final_out) layers.push_back(make_dense(in, *final_out, rng));
  return layers;
}

Tensor run_mlp(Tape& tape, Tensor x, const std::vector<Dense>& layers, bool linear_last) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = linear(tape, x, layers[i].weight, layers[i].bias);
    if (!(linear_last && i + 1 == layers.size())) x = relu(tape, x);
  }
  return x;
}

std::vector<Dense> clone_layers(const std::vector<Dense>& layers) {
  std::vector<Dense> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(Dense{l.weight.clone(), l.bias.clone()});
  return out;
}

}  // namespace kae
