#include "kae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kae/errors.hpp"

namespace kae {

GradCheckResult finite_diff_check(const ScalarFn& f, const Tensor& x, double eps) {
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  return finite_diff_check([&](Tape& tape) { return f(tape, leaf); }, {leaf}, eps);
}

GradCheckResult finite_diff_check(const ClosureFn& f, std::vector<Tensor> inputs, double eps,
                                  std::size_t max_coords_per_tensor) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_check: eps must be positive");
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor out = f(tape);
    tape.backward(out);
    for (auto& t : inputs) {
      if (t.has_grad()) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
      } else {
        analytic.emplace_back(t.numel(), 0.0);
      }
    }
  }

  auto eval = [&]() {
    Tape tape;
    return f(tape).item();
  };
  const double center = eval();

  GradCheckResult result;
  std::size_t offset = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto values = inputs[t].mutable_data();
    const std::size_t n = values.size();
    const std::size_t stride =
        (max_coords_per_tensor == 0 || n <= max_coords_per_tensor)
            ? 1
            : (n + max_coords_per_tensor - 1) / max_coords_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = eval();
      values[i] = saved - eps;
      const double down = eval();
      values[i] = saved;

      const double fwd = (up - center) / eps;
      const double bwd = (center - down) / eps;
      if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd) + std::abs(bwd))) {
        result.excluded.push_back(offset + i);
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.checked;
    }
    offset += n;
  }
  return result;
}

}  // namespace kae
