#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "kae/tensor.hpp"

namespace kae {

// Define-by-run record of differentiable operations.
//
// Operations append themselves in execution order, so the record list is
// always topologically sorted. A tape is meant for one forward pass; build a
// fresh one per step. Not thread-safe; use one tape per thread.
class Tape {
 public:
  // Propagates output.grad() into the inputs that require grad.
  using BackwardFn = std::function<void(const Tensor& output, std::vector<Tensor>& inputs)>;

  struct Record {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  // Registers `output` as produced from `inputs`. Nothing is recorded when no
  // input requires grad; otherwise the output is marked as requiring grad.
  Tensor record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and replays records in reverse. Gradients
  // accumulate; callers zero parameter grads between steps.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

}  // namespace kae
