#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "kae/tape.hpp"
#include "kae/tensor.hpp"

namespace kae {

struct GradCheckResult {
  // max |analytic - numeric| / max(1, |analytic|) over checked coordinates.
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Coordinates skipped because the one-sided differences disagree, i.e. the
  // function has a kink (relu at 0, max/argmin tie) inside [x-eps, x+eps].
  // Indices are flat positions across the checked tensors, in order.
  std::vector<std::size_t> excluded;
};

using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;
using ClosureFn = std::function<Tensor(Tape&)>;

// Central-difference check of d f / d x at x.
GradCheckResult finite_diff_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Checks d f / d t for each tensor t in `inputs`; f reads them by capture.
// The tensors are perturbed in place and restored. `max_coords_per_tensor`
// limits work on large tensors (0 checks every coordinate); the subset is
// evenly strided so it is deterministic.
GradCheckResult finite_diff_check(const ClosureFn& f, std::vector<Tensor> inputs,
                                  double eps = 1e-5, std::size_t max_coords_per_tensor = 0);

}  // namespace kae
