#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "harmonic/ops.hpp"
#include "harmonic/parameter.hpp"
#include "harmonic/rng.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

enum class LayerKind : std::uint8_t {
    conv2d,
    batchnorm,
    relu,
    avgpool,
    upsample_nearest,
    flatten,
    dense,
    softmax_xent,
    harmonic,
    separable,
};

std::string_view layer_kind_name(LayerKind kind);

// One differentiable stage of a ModelGraph. forward() records whatever backward() needs;
// backward() consumes the upstream gradient, accumulates parameter gradients and returns the
// gradient with respect to the forward input.
template <typename T>
class Layer {
public:
    Layer() = default;
    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual Shape output_shape(const Shape& input) const = 0;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    virtual Tensor<T> backward(const Tensor<T>& upstream) = 0;

    virtual std::vector<Parameter<T>*> parameters() { return {}; }
    // State that is checkpointed but not trained.
    virtual std::vector<Parameter<T>*> buffers() { return {}; }
    // Human-readable hyperparameters, e.g. "k=3 stride=1 pad=1".
    virtual std::string describe() const { return {}; }
};

// Uniform in +-sqrt(6 / fan_in).
template <typename T>
Tensor<T> uniform_init(Shape dims, std::size_t fan_in, Rng& rng);

template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
           std::size_t stride, std::size_t padding, Rng& rng);

    LayerKind kind() const override { return LayerKind::conv2d; }
    Shape output_shape(const Shape& input) const override;
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::vector<Parameter<T>*> parameters() override { return {&weight_}; }
    std::string describe() const override;

    Parameter<T>& weight() { return weight_; }

private:
    std::size_t stride_;
    std::size_t padding_;
    Parameter<T> weight_;
    Tensor<T> input_;
};

template <typename T>
class BatchNorm final : public Layer<T> {
public:
    BatchNorm(std::size_t channels, bool affine, BatchNormOptions options = {});

    LayerKind kind() const override { return LayerKind::batchnorm; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::vector<Parameter<T>*> parameters() override;
    std::vector<Parameter<T>*> buffers() override { return {&running_mean_, &running_var_}; }
    std::string describe() const override;

    Parameter<T>& running_mean() { return running_mean_; }
    Parameter<T>& running_var() { return running_var_; }

private:
    BatchNormOptions options_;
    Parameter<T> gamma_;
    Parameter<T> beta_;
    Parameter<T> running_mean_;
    Parameter<T> running_var_;
    BatchNormCache<T> cache_;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
    LayerKind kind() const override { return LayerKind::relu; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;

private:
    Tensor<T> input_;
};

template <typename T>
class AvgPool2d final : public Layer<T> {
public:
    explicit AvgPool2d(PoolGeometry pool) : pool_(pool) {}

    LayerKind kind() const override { return LayerKind::avgpool; }
    Shape output_shape(const Shape& input) const override;
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::string describe() const override;

private:
    PoolGeometry pool_;
    Shape input_dims_;
};

template <typename T>
class UpsampleNearest final : public Layer<T> {
public:
    UpsampleNearest(std::size_t out_h, std::size_t out_w) : out_h_(out_h), out_w_(out_w) {}

    LayerKind kind() const override { return LayerKind::upsample_nearest; }
    Shape output_shape(const Shape& input) const override;
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::string describe() const override;

private:
    std::size_t out_h_;
    std::size_t out_w_;
    Shape input_dims_;
};

template <typename T>
class Flatten final : public Layer<T> {
public:
    LayerKind kind() const override { return LayerKind::flatten; }
    Shape output_shape(const Shape& input) const override;
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;

private:
    Shape input_dims_;
};

// y = x W^T + b; bias starts at zero.
template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::size_t in_features, std::size_t out_features, Rng& rng, bool bias = true);

    LayerKind kind() const override { return LayerKind::dense; }
    Shape output_shape(const Shape& input) const override;
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::vector<Parameter<T>*> parameters() override;
    std::string describe() const override;

    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

private:
    bool has_bias_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

} // namespace harmonic
