#include "harmonic/layers.hpp"

#include <cmath>
#include <string>

namespace harmonic {

namespace {

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& delta) {
    for (std::size_t i = 0; i < into.size(); ++i) {
        into[i] += delta[i];
    }
}

void require_forward(bool ran, const char* layer) {
    if (!ran) {
        throw ValueError(std::string(layer) + ": backward called before forward");
    }
}

} // namespace

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::conv2d:
        return "conv2d";
    case LayerKind::batchnorm:
        return "batchnorm";
    case LayerKind::relu:
        return "relu";
    case LayerKind::avgpool:
        return "avgpool";
    case LayerKind::upsample_nearest:
        return "upsample_nearest";
    case LayerKind::flatten:
        return "flatten";
    case LayerKind::dense:
        return "dense";
    case LayerKind::softmax_xent:
        return "softmax_xent";
    case LayerKind::harmonic:
        return "harmonic";
    case LayerKind::separable:
        return "separable";
    }
    return "unknown";
}

template <typename T>
Tensor<T> uniform_init(Shape dims, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) {
        throw ValueError("uniform_init: fan_in must be positive");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor<T> t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    return t;
}

// --- Conv2d -----------------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t padding, Rng& rng)
    : stride_(stride),
      padding_(padding),
      weight_("weight", uniform_init<T>({out_channels, in_channels, kernel, kernel},
                                        in_channels * kernel * kernel, rng)) {
    if (stride == 0) {
        throw ValueError("conv2d stride must be >= 1");
    }
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
    return ConvGeometry::infer(input, weight_.value.dims(), stride_, padding_).output_shape();
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_ = x;
    return conv2d_forward(x, weight_.value, stride_, padding_);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_.empty(), "conv2d");
    auto grads = conv2d_backward(upstream, input_, weight_.value, stride_, padding_);
    accumulate(weight_.grad, grads.kernels);
    return std::move(grads.input);
}

template <typename T>
std::string Conv2d<T>::describe() const {
    const auto& d = weight_.value.dims();
    return "in=" + std::to_string(d[1]) + " out=" + std::to_string(d[0]) +
           " k=" + std::to_string(d[2]) + " stride=" + std::to_string(stride_) +
           " pad=" + std::to_string(padding_);
}

// --- BatchNorm --------------------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, bool affine, BatchNormOptions options)
    : options_(options),
      running_mean_("running_mean", Tensor<T>({channels}, T(0)), false),
      running_var_("running_var", Tensor<T>({channels}, T(1)), false) {
    options_.affine = affine;
    if (affine) {
        gamma_ = Parameter<T>("gamma", Tensor<T>({channels}, T(1)));
        beta_ = Parameter<T>("beta", Tensor<T>({channels}, T(0)));
    }
}

template <typename T>
std::vector<Parameter<T>*> BatchNorm<T>::parameters() {
    if (!options_.affine) {
        return {};
    }
    return {&gamma_, &beta_};
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
    return batchnorm_forward(x, options_, mode, running_mean_.value, running_var_.value,
                             options_.affine ? &gamma_.value : nullptr,
                             options_.affine ? &beta_.value : nullptr, &cache_);
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& upstream) {
    require_forward(!cache_.dims.empty(), "batchnorm");
    auto grads =
        batchnorm_backward(upstream, cache_, options_, options_.affine ? &gamma_.value : nullptr);
    if (options_.affine) {
        accumulate(gamma_.grad, grads.gamma);
        accumulate(beta_.grad, grads.beta);
    }
    return std::move(grads.input);
}

template <typename T>
std::string BatchNorm<T>::describe() const {
    return "channels=" + std::to_string(running_mean_.value.size()) +
           " affine=" + (options_.affine ? std::string("1") : std::string("0"));
}

// --- ReLU -------------------------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_ = x;
    return relu_forward(x);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_.empty(), "relu");
    return relu_backward(upstream, input_);
}

// --- AvgPool2d --------------------------------------------------------------------------

template <typename T>
Shape AvgPool2d<T>::output_shape(const Shape& input) const {
    if (input.size() != 4) {
        throw ShapeError("avgpool expects rank 4, got " + shape_str(input));
    }
    return {input[0], input[1], conv_output_extent(input[2], pool_.window, pool_.stride, pool_.padding),
            conv_output_extent(input[3], pool_.window, pool_.stride, pool_.padding)};
}

template <typename T>
Tensor<T> AvgPool2d<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_dims_ = x.dims();
    return avgpool_forward(x, pool_);
}

template <typename T>
Tensor<T> AvgPool2d<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_dims_.empty(), "avgpool");
    return avgpool_backward(upstream, input_dims_, pool_);
}

template <typename T>
std::string AvgPool2d<T>::describe() const {
    return "window=" + std::to_string(pool_.window) + " stride=" + std::to_string(pool_.stride) +
           " pad=" + std::to_string(pool_.padding);
}

// --- UpsampleNearest --------------------------------------------------------------------

template <typename T>
Shape UpsampleNearest<T>::output_shape(const Shape& input) const {
    if (input.size() != 4) {
        throw ShapeError("upsample_nearest expects rank 4, got " + shape_str(input));
    }
    return {input[0], input[1], out_h_, out_w_};
}

template <typename T>
Tensor<T> UpsampleNearest<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_dims_ = x.dims();
    return upsample_nearest_forward(x, out_h_, out_w_);
}

template <typename T>
Tensor<T> UpsampleNearest<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_dims_.empty(), "upsample_nearest");
    return upsample_nearest_backward(upstream, input_dims_);
}

template <typename T>
std::string UpsampleNearest<T>::describe() const {
    return "out=" + std::to_string(out_h_) + "x" + std::to_string(out_w_);
}

// --- Flatten ----------------------------------------------------------------------------

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
    if (input.empty()) {
        throw ShapeError("flatten of a rank-0 tensor");
    }
    return {input[0], shape_size(input) / std::max<std::size_t>(input[0], 1)};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_dims_ = x.dims();
    return x.reshaped(output_shape(x.dims()));
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_dims_.empty(), "flatten");
    return upstream.reshaped(input_dims_);
}

// --- Dense ------------------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features, Rng& rng, bool bias)
    : has_bias_(bias),
      weight_("weight", uniform_init<T>({out_features, in_features}, in_features, rng)) {
    if (bias) {
        bias_ = Parameter<T>("bias", Tensor<T>({out_features}, T(0)));
    }
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
    if (input.size() != 2 || input[1] != weight_.value.dim(1)) {
        throw ShapeError("dense expects [B," + std::to_string(weight_.value.dim(1)) + "], got " +
                         shape_str(input));
    }
    return {input[0], weight_.value.dim(0)};
}

template <typename T>
std::vector<Parameter<T>*> Dense<T>::parameters() {
    if (has_bias_) {
        return {&weight_, &bias_};
    }
    return {&weight_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode /*mode*/) {
    input_ = x;
    return dense_forward(x, weight_.value, has_bias_ ? bias_.value : Tensor<T>());
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& upstream) {
    require_forward(!input_.empty(), "dense");
    auto grads = dense_backward(upstream, input_, weight_.value, has_bias_);
    accumulate(weight_.grad, grads.weight);
    if (has_bias_) {
        accumulate(bias_.grad, grads.bias);
    }
    return std::move(grads.input);
}

template <typename T>
std::string Dense<T>::describe() const {
    return "in=" + std::to_string(weight_.value.dim(1)) +
           " out=" + std::to_string(weight_.value.dim(0)) +
           " bias=" + (has_bias_ ? std::string("1") : std::string("0"));
}

template Tensor<float> uniform_init<float>(Shape, std::size_t, Rng&);
template Tensor<double> uniform_init<double>(Shape, std::size_t, Rng&);

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class ReLU<float>;
template class ReLU<double>;
template class AvgPool2d<float>;
template class AvgPool2d<double>;
template class UpsampleNearest<float>;
template class UpsampleNearest<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Dense<float>;
template class Dense<double>;

} // namespace harmonic
