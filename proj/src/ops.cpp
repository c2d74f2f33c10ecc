#include "kae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kae/errors.hpp"

namespace kae {
namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.dim() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     " tensor, got shape " + shape_str(x.shape()));
  }
}

void require_finite(const Tensor& x, const char* op) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input value");
  }
}

double squared_distance(const double* a, const double* b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.size(0), n = a.size(1), p = b.size(1);
  if (b.size(0) != n) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * p, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * p;
    for (std::size_t l = 0; l < n; ++l) {
      const double av = A[i * n + l];
      if (av == 0.0) continue;
      const double* brow = B + l * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += av * brow[j];
    }
  }
  return tape.record(Tensor({m, p}, std::move(out)), {a, b},
                     [m, n, p](const Tensor& y, std::vector<Tensor>& in) {
                       const double* G = y.grad().data();
                       const double* A = in[0].data().data();
                       const double* B = in[1].data().data();
                       if (in[0].requires_grad()) {
                         double* dA = in[0].mutable_grad().data();
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = G + i * p;
                           for (std::size_t l = 0; l < n; ++l) {
                             const double* brow = B + l * p;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
                             dA[i * n + l] += acc;
                           }
                         }
                       }
                       if (in[1].requires_grad()) {
                         double* dB = in[1].mutable_grad().data();
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = G + i * p;
                           for (std::size_t l = 0; l < n; ++l) {
                             const double av = A[i * n + l];
                             if (av == 0.0) continue;
                             double* drow = dB + l * p;
                             for (std::size_t j = 0; j < p; ++j) drow[j] += av * grow[j];
                           }
                         }
                       }
                     });
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.size(0), c = x.size(1);
  std::vector<double> out(r * c);
  const auto src = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  return tape.record(Tensor({c, r}, std::move(out)), {x},
                     [r, c](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       auto dx = in[0].mutable_grad();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += g[j * r + i];
                     });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const auto src = x.data();
  return tape.record(Tensor(std::move(shape), {src.begin(), src.end()}), {x},
                     [](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       auto dx = in[0].mutable_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                     });
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t rows = x.size(0), f = x.size(1);
  if (bias.size(0) != f) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const auto src = x.data();
  const auto b = bias.data();
  std::vector<double> out(src.begin(), src.end());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < f; ++j) out[i * f + j] += b[j];
  return tape.record(Tensor({rows, f}, std::move(out)), {x, bias},
                     [rows, f](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       if (in[0].requires_grad()) {
                         auto dx = in[0].mutable_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                       }
                       if (in[1].requires_grad()) {
                         auto db = in[1].mutable_grad();
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < f; ++j) db[j] += g[i * f + j];
                       }
                     });
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  if (x.dim() != 2 || x.size(1) != weight.size(0) || bias.size(0) != weight.size(1)) {
    throw ShapeError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                     shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
  }
  return add_bias(tape, matmul(tape, x, weight), bias);
}

Tensor relu(Tape& tape, const Tensor& x) {
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] > 0.0 ? src[i] : 0.0;
  return tape.record(Tensor(x.shape(), std::move(out)), {x},
                     [](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       const auto v = in[0].data();
                       auto dx = in[0].mutable_grad();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (v[i] > 0.0) dx[i] += g[i];
                     });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
  }
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return tape.record(Tensor(a.shape(), std::move(out)), {a, b},
                     [](const Tensor& r, std::vector<Tensor>& in) {
                       const auto g = r.grad();
                       for (auto& t : in) {
                         if (!t.requires_grad()) continue;
                         auto d = t.mutable_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                     });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = factor * src[i];
  return tape.record(Tensor(x.shape(), std::move(out)), {x},
                     [factor](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       auto dx = in[0].mutable_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += factor * g[i];
                     });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return tape.record(Tensor::scalar(total), {x}, [](const Tensor& y, std::vector<Tensor>& in) {
    const double g = y.grad()[0];
    for (double& d : in[0].mutable_grad()) d += g;
  });
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t rows = x.size(0), cols = x.size(1);
  if (cols == 0) throw EmptyInputError("softmax_rows: rows have no entries");
  require_finite(x, "softmax_rows");
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* in_row = src.data() + i * cols;
    double* row = out.data() + i * cols;
    const double peak = *std::max_element(in_row, in_row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(in_row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
  }
  Tensor y({rows, cols}, std::move(out));
  return tape.record(y, {x}, [rows, cols](const Tensor& y, std::vector<Tensor>& in) {
    const auto g = y.grad();
    const auto p = y.data();
    auto dx = in[0].mutable_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t o = i * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += g[o + j] * p[o + j];
      for (std::size_t j = 0; j < cols; ++j) dx[o + j] += p[o + j] * (g[o + j] - dot);
    }
  });
}

Tensor maxpool_rows(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "maxpool_rows");
  const std::size_t rows = x.size(0), cols = x.size(1);
  if (rows == 0) throw EmptyInputError("maxpool_rows: no rows to pool");
  const auto src = x.data();
  std::vector<double> out(src.begin(), src.begin() + cols);
  std::vector<std::size_t> argmax(cols, 0);
  for (std::size_t i = 1; i < rows; ++i) {
    const double* row = src.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (row[j] > out[j]) {
        out[j] = row[j];
        argmax[j] = i;
      }
    }
  }
  return tape.record(Tensor({cols}, std::move(out)), {x},
                     [cols, argmax = std::move(argmax)](const Tensor& y, std::vector<Tensor>& in) {
                       const auto g = y.grad();
                       auto dx = in[0].mutable_grad();
                       for (std::size_t j = 0; j < cols; ++j) dx[argmax[j] * cols + j] += g[j];
                     });
}

Tensor concat_broadcast(Tape& tape, const Tensor& x, const Tensor& g) {
  require_rank(x, 2, "concat_broadcast");
  require_rank(g, 1, "concat_broadcast");
  const std::size_t rows = x.size(0), a = x.size(1), b = g.size(0), w = a + b;
  const auto xs = x.data();
  const auto gs = g.data();
  std::vector<double> out(rows * w);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(xs.data() + i * a, a, out.data() + i * w);
    std::copy_n(gs.data(), b, out.data() + i * w + a);
  }
  return tape.record(Tensor({rows, w}, std::move(out)), {x, g},
                     [rows, a, b, w](const Tensor& y, std::vector<Tensor>& in) {
                       const auto gy = y.grad();
                       if (in[0].requires_grad()) {
                         auto dx = in[0].mutable_grad();
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < a; ++j) dx[i * a + j] += gy[i * w + j];
                       }
                       if (in[1].requires_grad()) {
                         auto dg = in[1].mutable_grad();
                         for (std::size_t i = 0; i < rows; ++i)
                           for (std::size_t j = 0; j < b; ++j) dg[j] += gy[i * w + a + j];
                       }
                     });
}

Tensor chamfer_loss(Tape& tape, const Tensor& s1, const Tensor& s2) {
  require_rank(s1, 2, "chamfer_loss");
  require_rank(s2, 2, "chamfer_loss");
  if (s1.size(1) != 3 || s2.size(1) != 3) {
    throw ShapeError("chamfer_loss: expected [N,3] and [M,3], got " + shape_str(s1.shape()) +
                     " and " + shape_str(s2.shape()));
  }
  const std::size_t n = s1.size(0), m = s2.size(0);
  if (n == 0 || m == 0) throw EmptyInputError("chamfer_loss: empty point set");

  const double* a = s1.data().data();
  const double* b = s2.data().data();
  std::vector<std::size_t> nn12(n), nn21(m);
  std::vector<double> best21(m, std::numeric_limits<double>::infinity());
  double forward = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = squared_distance(a + 3 * i, b + 3 * j);
      if (d < best) {
        best = d;
        arg = j;
      }
      if (d < best21[j]) {
        best21[j] = d;
        nn21[j] = i;
      }
    }
    nn12[i] = arg;
    forward += best;
  }
  double backward = 0.0;
  for (double d : best21) backward += d;

  return tape.record(
      Tensor::scalar(forward + backward), {s1, s2},
      [n, m, nn12 = std::move(nn12), nn21 = std::move(nn21)](const Tensor& y,
                                                               std::vector<Tensor>& in) {
        const double g = y.grad()[0];
        const double* a = in[0].data().data();
        const double* b = in[1].data().data();
        double* da = in[0].requires_grad() ? in[0].mutable_grad().data() : nullptr;
        double* db = in[1].requires_grad() ? in[1].mutable_grad().data() : nullptr;
        auto pair_grad = [&](std::size_t i, std::size_t j) {
          for (int c = 0; c < 3; ++c) {
            const double diff = 2.0 * g * (a[3 * i + c] - b[3 * j + c]);
            if (da) da[3 * i + c] += diff;
            if (db) db[3 * j + c] -= diff;
          }
        };
        for (std::size_t i = 0; i < n; ++i) pair_grad(i, nn12[i]);
        for (std::size_t j = 0; j < m; ++j) pair_grad(nn21[j], j);
      });
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "cross_entropy");
  const std::size_t c = logits.size(0);
  if (label >= c) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                      std::to_string(c) + " classes");
  }
  require_finite(logits, "cross_entropy");
  const auto z = logits.data();
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  return tape.record(Tensor::scalar(log_norm - z[label]), {logits},
                     [c, label, log_norm](const Tensor& y, std::vector<Tensor>& in) {
                       const double g = y.grad()[0];
                       const auto z = in[0].data();
                       auto dz = in[0].mutable_grad();
                       for (std::size_t i = 0; i < c; ++i) {
                         const double p = std::exp(z[i] - log_norm);
                         dz[i] += g * (p - (i == label ? 1.0 : 0.0));
                       }
                     });
}

}  // namespace kae
