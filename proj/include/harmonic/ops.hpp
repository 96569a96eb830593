#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "harmonic/tensor.hpp"

namespace harmonic {

// Extents of one 2-D cross-correlation. Built from input/kernel dims and validated once.
struct ConvGeometry {
    std::size_t batch = 0;
    std::size_t in_channels = 0;
    std::size_t in_h = 0;
    std::size_t in_w = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t out_h = 0;
    std::size_t out_w = 0;

    static ConvGeometry infer(const Shape& input, const Shape& kernels, std::size_t stride,
                              std::size_t padding);

    Shape output_shape() const { return {batch, out_channels, out_h, out_w}; }
    std::size_t patch_size() const { return in_channels * kernel * kernel; }
    std::size_t positions() const { return out_h * out_w; }
};

// floor((extent + 2*padding - window) / stride) + 1, with the usual preconditions.
std::size_t conv_output_extent(std::size_t extent, std::size_t window, std::size_t stride,
                               std::size_t padding);

// Cross-correlation (no kernel flip) with zero padding.
// input [N,C,H,W], kernels [O,C,K,K] -> [N,O,H',W'].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride,
                         std::size_t padding);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;   // empty when not requested
    Tensor<T> kernels;
};

// Gradients of sum(upstream * conv2d_forward(input, kernels)).
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                               const Tensor<T>& kernels, std::size_t stride, std::size_t padding,
                               bool need_input_grad = true);

struct BatchNormOptions {
    double eps = 1e-5;
    double momentum = 0.1;
    bool affine = true;
};

// Per-channel normalization over (batch, height, width) for rank-4 input, or over the batch for
// rank-2 input. Everything backward needs is kept here.
template <typename T>
struct BatchNormCache {
    Mode mode = Mode::train;
    Shape dims;
    Tensor<T> normalized;     // x-hat
    std::vector<T> inv_std;   // one per channel
};

// Running statistics are updated in train mode (momentum blend, unbiased variance) and read in
// eval mode. gamma/beta are ignored unless options.affine.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const BatchNormOptions& options, Mode mode,
                            Tensor<T>& running_mean, Tensor<T>& running_var,
                            const Tensor<T>* gamma, const Tensor<T>* beta,
                            BatchNormCache<T>* cache);

template <typename T>
struct BatchNormGrads {
    Tensor<T> input;
    Tensor<T> gamma;  // empty unless affine
    Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& upstream, const BatchNormCache<T>& cache,
                                     const BatchNormOptions& options, const Tensor<T>* gamma);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& upstream, const Tensor<T>& input);

struct PoolGeometry {
    std::size_t window = 2;
    std::size_t stride = 2;
    std::size_t padding = 0;
};

// Average pooling; padded cells count toward the divisor (always window^2).
template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x, const PoolGeometry& pool);

template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& upstream, const Shape& input_dims,
                           const PoolGeometry& pool);

// Nearest-neighbour resize: source index = floor(dst * in / out) per axis.
template <typename T>
Tensor<T> upsample_nearest_forward(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& upstream, const Shape& input_dims);

// x [B,I], weight [O,I], bias [O] (may be empty) -> [B,O].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& upstream, const Tensor<T>& x,
                             const Tensor<T>& weight, bool has_bias);

template <typename T>
struct SoftmaxXent {
    double loss = 0.0;          // mean cross-entropy over the batch
    Tensor<T> probabilities;    // [B, classes]
};

template <typename T>
SoftmaxXent<T> softmax_xent_forward(const Tensor<T>& logits, std::span<const int> labels);

// (softmax - onehot) / batch
template <typename T>
Tensor<T> softmax_xent_backward(const Tensor<T>& probabilities, std::span<const int> labels);

// Row-wise argmax of [B, classes]; ties go to the lowest index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores);

} // namespace harmonic
