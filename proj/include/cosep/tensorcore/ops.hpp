#pragma once

// Differentiable operations on Graph variables. Every op checks its input
// shapes at construction and throws ShapeError naming the offending shapes.
// Image tensors use NCHW layout.

#include <cstddef>
#include <span>
#include <vector>

#include "cosep/tensorcore/graph.hpp"

namespace cosep::ops {

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var log1p(Var x);

// Sum of all elements, shape [1].
Var sum(Var x);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding);
std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel,
                                    std::size_t stride, std::size_t padding);

// x: N x C x H x W, weight: O x C x k x k, bias: O.
Var conv2d(Var x, Var weight, Var bias, Conv2dOptions opt);
// x: N x C x H x W, weight: C x O x k x k, bias: O. Adjoint of conv2d.
Var conv_transpose2d(Var x, Var weight, Var bias, Conv2dOptions opt);

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization over N, H, W (any rank >= 2, channel axis 1).
// In a training graph batch statistics are used and the running statistics
// are updated in place; otherwise the running statistics are used.
Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean,
               Tensor& running_var, BatchNormOptions opt);

// x: N x D, weight: O x D, bias: O -> N x O.
Var linear(Var x, Var weight, Var bias);

// Concatenation along axis 1 of two N x Ca x ... and N x Cb x ... tensors.
Var concat_channels(Var a, Var b);

// v: N x D -> N x D x h x w, each vector replicated over the spatial grid.
Var tile_spatial(Var v, std::size_t h, std::size_t w);

// table: R x D, rows[i] < R -> N x D.
Var gather_rows(Var table, std::span<const std::size_t> rows);

// x: N x C x H x W -> N x C.
Var global_avg_pool(Var x);

// x: N x ..., group[i] < num_groups -> num_groups x ... (row sums per group).
Var segment_sum(Var x, std::span<const std::size_t> group, std::size_t num_groups);

// scale * sum(weight * |x - target|); target and weight are constants.
Var weighted_l1(Var x, const Tensor& target, const Tensor& weight, double scale);

// sum_i row_weight[i] * CE(softmax(logits_i), label_i). Empty row_weight
// means a plain mean over rows.
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels,
                          std::span<const double> row_weight = {});

// Row-wise softmax of a plain tensor (N x K), for inference/reporting.
Tensor softmax_rows(const Tensor& logits);

}  // namespace cosep::ops
