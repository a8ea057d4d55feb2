#pragma once

#include <vector>

#include "coad/tensor.hpp"

// Differentiable operations over channel-first (C x H x W) tensors. Every op
// records lineage when grad mode is on and at least one operand requires
// grad; otherwise the result is a plain constant.
namespace coad {

struct ConvOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

// Output extent of a (dilated) convolution along one axis; floor semantics.
// Throws ConfigError when the extent would be < 1.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, const ConvOptions& opt);

// input Cin x H x W, weight Cout x Cin x k x k, bias Cout (may be undefined).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvOptions& opt = {});

// input Cin x H x W, weight Cin x Cout x k x k. Output extent
// (H - 1) * stride - 2 * padding + k. Forward is the input-gradient of the
// matching conv2d.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int padding);

// Max-subtracted softmax along one axis.
template <typename T>
Tensor<T> softmax_along(const Tensor<T>& input, int axis);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// y = W x + b for x of shape {in}, W of shape {out, in}.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

enum class PoolKind { kChannelMean, kChannelMax, kSpatialGlobalMean, kSpatialMax };

// channel_* : C x H x W -> 1 x H x W. spatial_global_mean: C x H x W -> {C}.
// spatial_max: unpadded max-pool; gradient goes to the lowest flat index on ties.
template <typename T>
Tensor<T> reduce_pool(const Tensor<T>& input, PoolKind kind, int window = 0, int stride = 0);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> relu(const Tensor<T>& a);

// Concatenation along axis 0 (channels for C x H x W), operand order kept.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  return concat(parts);
}
// Channels [begin, end) of a tensor, i.e. a slice along axis 0.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::int64_t begin, std::int64_t end);

// C x H x W times a length-C vector broadcast over each plane.
template <typename T>
Tensor<T> broadcast_mul_channelvec(const Tensor<T>& x, const Tensor<T>& vec);
// C x H x W times a 1 x H x W plane broadcast over channels.
template <typename T>
Tensor<T> broadcast_mul_plane(const Tensor<T>& x, const Tensor<T>& plane);

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape);
template <typename T>
Tensor<T> transpose2d(const Tensor<T>& input);

// Half-pixel (align_corners = false) bilinear resampling of C x H x W.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w);

template <typename T>
Tensor<T> sum(const Tensor<T>& input);
template <typename T>
Tensor<T> mean(const Tensor<T>& input);

// For a stack of shape [N, ...]: per trailing element, softmax over the N
// entries and return the softmax-weighted sum. Terms are summed in sorted
// order, so the result is bit-identical under any permutation of the N rows.
template <typename T>
Tensor<T> softmax_weighted_sum(const Tensor<T>& stacked);

// Elementwise u + p (g - u), computed with std::lerp so the result never
// leaves [min(u, g), max(u, g)] for p in [0, 1].
template <typename T>
Tensor<T> lerp(const Tensor<T>& u, const Tensor<T>& g, const Tensor<T>& p);

// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
// target is treated as a constant.
template <typename T>
Tensor<T> bce_mean(const Tensor<T>& prediction, const Tensor<T>& target, double eps = 1e-7);

}  // namespace coad
