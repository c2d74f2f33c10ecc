#pragma once

#include <cstddef>

#include "kae/tape.hpp"
#include "kae/tensor.hpp"

// Differentiable operations used by the keypoint autoencoder graph. Each op
// takes the tape it records onto; when no input requires grad nothing is
// recorded and the op is a plain computation.
namespace kae {

// [m,n] x [n,p] -> [m,p]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// [m,n] -> [n,m]
Tensor transpose(Tape& tape, const Tensor& x);

// Same element count, new shape.
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// x[rows,f] + b[f] broadcast over rows.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);

// x[rows,in] . w[in,out] + b[out]
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Elementwise max(x, 0). The subgradient at 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);

// Elementwise a + b, identical shapes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise factor * x.
Tensor scale(Tape& tape, const Tensor& x, double factor);

// Sum of all elements -> scalar.
Tensor sum(Tape& tape, const Tensor& x);

// Row-wise softmax with max subtraction. Throws NumericError on non-finite input.
Tensor softmax_rows(Tape& tape, const Tensor& x);

// Column-wise max over rows: [N,f] -> [f]. Gradient goes to the first
// (lowest-index) argmax of each column.
Tensor maxpool_rows(Tape& tape, const Tensor& x);

// Appends the vector g[b] to every row of x[N,a] -> [N,a+b].
Tensor concat_broadcast(Tape& tape, const Tensor& x, const Tensor& g);

// Sum over both directions of squared nearest-neighbour distances between
// point sets s1[N,3] and s2[M,3]. Nearest-neighbour ties pick the lowest
// index; gradient flows only through the chosen pairs.
Tensor chamfer_loss(Tape& tape, const Tensor& s1, const Tensor& s2);

// -log softmax(logits)[label] for logits[C].
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label);

}  // namespace kae
