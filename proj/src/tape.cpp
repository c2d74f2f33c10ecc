#include "kae/tape.hpp"

#include <algorithm>

#include "kae/errors.hpp"

namespace kae {

Tensor Tape::record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward) {
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return output;
  output.set_requires_grad(true);
  records_.push_back(Record{std::move(inputs), output, std::move(backward)});
  return output;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw Error("backward() on a loss that is not connected to any differentiable input");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward(it->output, it->inputs);
  }
}

}  // namespace kae
