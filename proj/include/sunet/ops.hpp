// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sunet/autograd.hpp"

/// Differentiable operations recorded on a Tape. All inputs of one call must
/// live on the same tape. Shapes are checked eagerly and reported as
/// ShapeError; non-finite results raise NumericalError.
namespace sunet::ops {

// Elementwise binary ops require identical shapes (no broadcasting).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a + c where c is a non-differentiable tensor of a's shape.
Var add_constant(const Var& a, const Tensor& c);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
// max(a, floor); gradient passes only where a > floor.
Var clamp_min(const Var& a, double floor);

Var softmax(const Var& a, std::size_t axis);
Var sum(const Var& a);
Var mean(const Var& a);

// [M,K] x [K,N] -> [M,N]
Var matmul(const Var& a, const Var& b);
// x[B,I], weight[O,I], bias[O] -> x * weight^T + bias. A default-constructed
// bias Var means no bias term.
Var linear(const Var& x, const Var& weight, const Var& bias);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var narrow(const Var& a, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(const Var& a, Shape shape);

struct Conv2dOptions {
  std::pair<std::size_t, std::size_t> padding{0, 0};
  std::pair<std::size_t, std::size_t> stride{1, 1};
};

// Cross-correlation. input[N,C,H,W], kernel[C',C,kH,kW], bias[C'].
Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts = {});

// Non-overlapping window; H and W must be divisible by `window`.
Var max_pool2d(const Var& x, std::size_t window);
// Nearest-neighbour upsampling by an integer factor.
Var upsample2d(const Var& x, std::size_t factor);
// [N,C,H,W] -> [N,C]
Var global_avg_pool(const Var& x);
// [N,C] -> [N,C,H,W], each channel constant over space.
Var broadcast_spatial(const Var& v, std::size_t height, std::size_t width);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalisation of x[N,C] or x[N,C,H,W]. Training mode uses batch
// statistics (biased variance) and updates the running buffers with the
// unbiased variance; eval mode uses the running buffers only.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               BatchNormOptions opts);

// Forward: one-hot of the argmax along the last axis. Backward: identity.
Var straight_through(const Var& soft);

}  // namespace sunet::ops
