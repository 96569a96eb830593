#include "harmonic/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace harmonic {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatRM<T>>;

bool is_pointwise(const ConvGeometry& g) {
    return g.kernel == 1 && g.stride == 1 && g.padding == 0;
}

// Unfolds one image [C,H,W] into a (C*K*K) x (H'*W') matrix of receptive fields.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const T* plane = image + c * g.in_h * g.in_w;
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
                    T* dst = row + oh * g.out_w;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
                        std::fill(dst, dst + g.out_w, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(ih) * g.in_w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                                        static_cast<std::ptrdiff_t>(g.padding);
                        dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w))
                                      ? T(0)
                                      : src[iw];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters column gradients back onto the image, summing overlaps.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* image) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        T* plane = image + c * g.in_h * g.in_w;
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
                        continue;
                    }
                    T* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
                    const T* src = row + oh * g.out_w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                                        static_cast<std::ptrdiff_t>(g.padding);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.in_w)) {
                            dst[iw] += src[ow];
                        }
                    }
                }
            }
        }
    }
}

struct ChannelLayout {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t inner = 0;  // spatial positions per channel (1 for rank-2)

    std::size_t count() const { return batch * inner; }
    std::size_t offset(std::size_t b, std::size_t c) const { return (b * channels + c) * inner; }
};

ChannelLayout channel_layout(const Shape& dims) {
    if (dims.size() == 2) {
        return {dims[0], dims[1], 1};
    }
    if (dims.size() == 4) {
        return {dims[0], dims[1], dims[2] * dims[3]};
    }
    throw ShapeError("batchnorm expects rank 2 or 4, got " + shape_str(dims));
}

void require_rank(const Shape& dims, std::size_t rank, const char* what) {
    if (dims.size() != rank) {
        throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(dims));
    }
}

} // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t window, std::size_t stride,
                               std::size_t padding) {
    if (stride == 0) {
        throw ValueError("stride must be >= 1");
    }
    if (window == 0) {
        throw ValueError("window must be >= 1");
    }
    if (extent + 2 * padding < window) {
        throw ShapeError("window " + std::to_string(window) + " exceeds padded extent " +
                         std::to_string(extent + 2 * padding));
    }
    return (extent + 2 * padding - window) / stride + 1;
}

ConvGeometry ConvGeometry::infer(const Shape& input, const Shape& kernels, std::size_t stride,
                                 std::size_t padding) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernels, 4, "conv2d kernels");
    if (kernels[2] != kernels[3]) {
        throw ShapeError("conv2d kernels must be square, got " + shape_str(kernels));
    }
    if (kernels[1] != input[1]) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(input) + ", kernels " +
                         shape_str(kernels));
    }
    ConvGeometry g;
    g.batch = input[0];
    g.in_channels = input[1];
    g.in_h = input[2];
    g.in_w = input[3];
    g.out_channels = kernels[0];
    g.kernel = kernels[2];
    g.stride = stride;
    g.padding = padding;
    g.out_h = conv_output_extent(g.in_h, g.kernel, stride, padding);
    g.out_w = conv_output_extent(g.in_w, g.kernel, stride, padding);
    return g;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride,
                         std::size_t padding) {
    const ConvGeometry g = ConvGeometry::infer(input.dims(), kernels.dims(), stride, padding);
    Tensor<T> out(g.output_shape());
    const std::size_t patch = g.patch_size();
    const std::size_t positions = g.positions();
    const std::size_t image_size = g.in_channels * g.in_h * g.in_w;
    ConstMapRM<T> weights(kernels.data(), static_cast<Eigen::Index>(g.out_channels),
                          static_cast<Eigen::Index>(patch));
    std::vector<T> cols(is_pointwise(g) ? 0 : patch * positions);
    for (std::size_t b = 0; b < g.batch; ++b) {
        const T* image = input.data() + b * image_size;
        const T* col_data = image;
        if (!is_pointwise(g)) {
            im2col(image, g, cols.data());
            col_data = cols.data();
        }
        ConstMapRM<T> col_mat(col_data, static_cast<Eigen::Index>(patch),
                              static_cast<Eigen::Index>(positions));
        MapRM<T> out_mat(out.data() + b * g.out_channels * positions,
                         static_cast<Eigen::Index>(g.out_channels),
                         static_cast<Eigen::Index>(positions));
        out_mat.noalias() = weights * col_mat;
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                               const Tensor<T>& kernels, std::size_t stride, std::size_t padding,
                               bool need_input_grad) {
    const ConvGeometry g = ConvGeometry::infer(input.dims(), kernels.dims(), stride, padding);
    if (upstream.dims() != g.output_shape()) {
        throw ShapeError("conv2d_backward: upstream " + shape_str(upstream.dims()) +
                         " does not match output " + shape_str(g.output_shape()));
    }
    const std::size_t patch = g.patch_size();
    const std::size_t positions = g.positions();
    const std::size_t image_size = g.in_channels * g.in_h * g.in_w;

    Conv2dGrads<T> grads;
    grads.kernels = Tensor<T>(kernels.dims());
    if (need_input_grad) {
        grads.input = Tensor<T>(input.dims());
    }
    ConstMapRM<T> weights(kernels.data(), static_cast<Eigen::Index>(g.out_channels),
                          static_cast<Eigen::Index>(patch));
    MapRM<T> grad_weights(grads.kernels.data(), static_cast<Eigen::Index>(g.out_channels),
                          static_cast<Eigen::Index>(patch));
    const bool pointwise = is_pointwise(g);
    std::vector<T> cols(pointwise ? 0 : patch * positions);
    std::vector<T> grad_cols(pointwise || !need_input_grad ? 0 : patch * positions);

    for (std::size_t b = 0; b < g.batch; ++b) {
        const T* image = input.data() + b * image_size;
        const T* col_data = image;
        if (!pointwise) {
            im2col(image, g, cols.data());
            col_data = cols.data();
        }
        ConstMapRM<T> col_mat(col_data, static_cast<Eigen::Index>(patch),
                              static_cast<Eigen::Index>(positions));
        ConstMapRM<T> up(upstream.data() + b * g.out_channels * positions,
                         static_cast<Eigen::Index>(g.out_channels),
                         static_cast<Eigen::Index>(positions));
        grad_weights.noalias() += up * col_mat.transpose();
        if (!need_input_grad) {
            continue;
        }
        T* grad_image = grads.input.data() + b * image_size;
        if (pointwise) {
            MapRM<T> gi(grad_image, static_cast<Eigen::Index>(patch),
                        static_cast<Eigen::Index>(positions));
            gi.noalias() = weights.transpose() * up;
        } else {
            MapRM<T> gc(grad_cols.data(), static_cast<Eigen::Index>(patch),
                        static_cast<Eigen::Index>(positions));
            gc.noalias() = weights.transpose() * up;
            col2im(grad_cols.data(), g, grad_image);
        }
    }
    return grads;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const BatchNormOptions& options, Mode mode,
                            Tensor<T>& running_mean, Tensor<T>& running_var,
                            const Tensor<T>* gamma, const Tensor<T>* beta,
                            BatchNormCache<T>* cache) {
    const ChannelLayout layout = channel_layout(x.dims());
    if (running_mean.size() != layout.channels || running_var.size() != layout.channels) {
        throw ShapeError("batchnorm running statistics do not match " +
                         std::to_string(layout.channels) + " channels");
    }
    if (options.affine && (gamma == nullptr || beta == nullptr ||
                           gamma->size() != layout.channels || beta->size() != layout.channels)) {
        throw ShapeError("batchnorm affine parameters missing or mis-sized");
    }
    if (mode == Mode::train && layout.batch < 2) {
        throw ValueError("batchnorm in train mode needs a batch of at least 2");
    }

    Tensor<T> out(x.dims());
    Tensor<T> normalized(x.dims());
    std::vector<T> inv_std(layout.channels);
    const std::size_t count = layout.count();

    for (std::size_t c = 0; c < layout.channels; ++c) {
        double mean = 0.0;
        double inv = 0.0;
        if (mode == Mode::train) {
            // Shifting by the first sample keeps the mean exact for constant channels.
            const double shift = x[layout.offset(0, c)];
            double acc = 0.0;
            for (std::size_t b = 0; b < layout.batch; ++b) {
                const T* src = x.data() + layout.offset(b, c);
                for (std::size_t i = 0; i < layout.inner; ++i) {
                    acc += static_cast<double>(src[i]) - shift;
                }
            }
            mean = shift + acc / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t b = 0; b < layout.batch; ++b) {
                const T* src = x.data() + layout.offset(b, c);
                for (std::size_t i = 0; i < layout.inner; ++i) {
                    const double d = static_cast<double>(src[i]) - mean;
                    sq += d * d;
                }
            }
            const double var = sq / static_cast<double>(count);
            inv = 1.0 / std::sqrt(var + options.eps);
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            running_mean[c] = static_cast<T>((1.0 - options.momentum) * running_mean[c] +
                                             options.momentum * mean);
            running_var[c] = static_cast<T>((1.0 - options.momentum) * running_var[c] +
                                            options.momentum * unbiased);
        } else {
            mean = running_mean[c];
            inv = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + options.eps);
        }
        inv_std[c] = static_cast<T>(inv);
        const T scale = options.affine ? (*gamma)[c] : T(1);
        const T shift_out = options.affine ? (*beta)[c] : T(0);
        const T mean_t = static_cast<T>(mean);
        const T inv_t = static_cast<T>(inv);
        for (std::size_t b = 0; b < layout.batch; ++b) {
            const std::size_t base = layout.offset(b, c);
            for (std::size_t i = 0; i < layout.inner; ++i) {
                const T xhat = (x[base + i] - mean_t) * inv_t;
                normalized[base + i] = xhat;
                out[base + i] = scale * xhat + shift_out;
            }
        }
    }
    if (cache != nullptr) {
        cache->mode = mode;
        cache->dims = x.dims();
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& upstream, const BatchNormCache<T>& cache,
                                     const BatchNormOptions& options, const Tensor<T>* gamma) {
    if (upstream.dims() != cache.dims) {
        throw ShapeError("batchnorm_backward: upstream " + shape_str(upstream.dims()) +
                         " vs cached " + shape_str(cache.dims));
    }
    const ChannelLayout layout = channel_layout(cache.dims);
    BatchNormGrads<T> grads;
    grads.input = Tensor<T>(cache.dims);
    if (options.affine) {
        grads.gamma = Tensor<T>({layout.channels});
        grads.beta = Tensor<T>({layout.channels});
    }
    const double count = static_cast<double>(layout.count());
    for (std::size_t c = 0; c < layout.channels; ++c) {
        const double scale = options.affine ? static_cast<double>((*gamma)[c]) : 1.0;
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < layout.batch; ++b) {
            const std::size_t base = layout.offset(b, c);
            for (std::size_t i = 0; i < layout.inner; ++i) {
                const double dy = upstream[base + i];
                sum_dy += dy;
                sum_dy_xhat += dy * static_cast<double>(cache.normalized[base + i]);
            }
        }
        if (options.affine) {
            grads.gamma[c] = static_cast<T>(sum_dy_xhat);
            grads.beta[c] = static_cast<T>(sum_dy);
        }
        const double inv = cache.inv_std[c];
        for (std::size_t b = 0; b < layout.batch; ++b) {
            const std::size_t base = layout.offset(b, c);
            for (std::size_t i = 0; i < layout.inner; ++i) {
                const double dy = upstream[base + i];
                double dx = 0.0;
                if (cache.mode == Mode::train) {
                    const double xhat = cache.normalized[base + i];
                    dx = scale * inv * (dy - sum_dy / count - xhat * sum_dy_xhat / count);
                } else {
                    dx = scale * inv * dy;
                }
                grads.input[base + i] = static_cast<T>(dx);
            }
        }
    }
    return grads;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T(0) ? x[i] : T(0);
    }
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& upstream, const Tensor<T>& input) {
    if (upstream.dims() != input.dims()) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Tensor<T> out(input.dims());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > T(0) ? upstream[i] : T(0);
    }
    return out;
}

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x, const PoolGeometry& pool) {
    require_rank(x.dims(), 4, "avgpool");
    const std::size_t batch = x.dim(0);
    const std::size_t channels = x.dim(1);
    const std::size_t in_h = x.dim(2);
    const std::size_t in_w = x.dim(3);
    const std::size_t out_h = conv_output_extent(in_h, pool.window, pool.stride, pool.padding);
    const std::size_t out_w = conv_output_extent(in_w, pool.window, pool.stride, pool.padding);
    Tensor<T> out({batch, channels, out_h, out_w});
    const T inv_area = T(1) / static_cast<T>(pool.window * pool.window);
    for (std::size_t plane = 0; plane < batch * channels; ++plane) {
        const T* src = x.data() + plane * in_h * in_w;
        T* dst = out.data() + plane * out_h * out_w;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                T acc = 0;
                for (std::size_t ki = 0; ki < pool.window; ++ki) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * pool.stride + ki) -
                                    static_cast<std::ptrdiff_t>(pool.padding);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in_h)) {
                        continue;
                    }
                    for (std::size_t kj = 0; kj < pool.window; ++kj) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * pool.stride + kj) -
                                        static_cast<std::ptrdiff_t>(pool.padding);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(in_w)) {
                            acc += src[static_cast<std::size_t>(ih) * in_w +
                                       static_cast<std::size_t>(iw)];
                        }
                    }
                }
                dst[oh * out_w + ow] = acc * inv_area;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& upstream, const Shape& input_dims,
                           const PoolGeometry& pool) {
    require_rank(input_dims, 4, "avgpool_backward");
    const std::size_t in_h = input_dims[2];
    const std::size_t in_w = input_dims[3];
    const std::size_t out_h = conv_output_extent(in_h, pool.window, pool.stride, pool.padding);
    const std::size_t out_w = conv_output_extent(in_w, pool.window, pool.stride, pool.padding);
    const Shape expected{input_dims[0], input_dims[1], out_h, out_w};
    if (upstream.dims() != expected) {
        throw ShapeError("avgpool_backward: upstream " + shape_str(upstream.dims()) +
                         " vs expected " + shape_str(expected));
    }
    Tensor<T> grad(input_dims);
    const T inv_area = T(1) / static_cast<T>(pool.window * pool.window);
    for (std::size_t plane = 0; plane < input_dims[0] * input_dims[1]; ++plane) {
        const T* src = upstream.data() + plane * out_h * out_w;
        T* dst = grad.data() + plane * in_h * in_w;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                const T g = src[oh * out_w + ow] * inv_area;
                for (std::size_t ki = 0; ki < pool.window; ++ki) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * pool.stride + ki) -
                                    static_cast<std::ptrdiff_t>(pool.padding);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in_h)) {
                        continue;
                    }
                    for (std::size_t kj = 0; kj < pool.window; ++kj) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * pool.stride + kj) -
                                        static_cast<std::ptrdiff_t>(pool.padding);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(in_w)) {
                            dst[static_cast<std::size_t>(ih) * in_w +
                                static_cast<std::size_t>(iw)] += g;
                        }
                    }
                }
            }
        }
    }
    return grad;
}

template <typename T>
Tensor<T> upsample_nearest_forward(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    require_rank(x.dims(), 4, "upsample_nearest");
    if (out_h == 0 || out_w == 0) {
        throw ShapeError("upsample_nearest: target extent must be positive");
    }
    const std::size_t in_h = x.dim(2);
    const std::size_t in_w = x.dim(3);
    Tensor<T> out({x.dim(0), x.dim(1), out_h, out_w});
    for (std::size_t plane = 0; plane < x.dim(0) * x.dim(1); ++plane) {
        const T* src = x.data() + plane * in_h * in_w;
        T* dst = out.data() + plane * out_h * out_w;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            const std::size_t ih = oh * in_h / out_h;
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                dst[oh * out_w + ow] = src[ih * in_w + ow * in_w / out_w];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& upstream, const Shape& input_dims) {
    require_rank(input_dims, 4, "upsample_nearest_backward");
    require_rank(upstream.dims(), 4, "upsample_nearest_backward upstream");
    if (upstream.dim(0) != input_dims[0] || upstream.dim(1) != input_dims[1]) {
        throw ShapeError("upsample_nearest_backward: batch/channel mismatch");
    }
    const std::size_t in_h = input_dims[2];
    const std::size_t in_w = input_dims[3];
    const std::size_t out_h = upstream.dim(2);
    const std::size_t out_w = upstream.dim(3);
    Tensor<T> grad(input_dims);
    for (std::size_t plane = 0; plane < input_dims[0] * input_dims[1]; ++plane) {
        const T* src = upstream.data() + plane * out_h * out_w;
        T* dst = grad.data() + plane * in_h * in_w;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            const std::size_t ih = oh * in_h / out_h;
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                dst[ih * in_w + ow * in_w / out_w] += src[oh * out_w + ow];
            }
        }
    }
    return grad;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    require_rank(x.dims(), 2, "dense input");
    require_rank(weight.dims(), 2, "dense weight");
    if (x.dim(1) != weight.dim(1)) {
        throw ShapeError("dense: input " + shape_str(x.dims()) + " vs weight " +
                         shape_str(weight.dims()));
    }
    const auto batch = static_cast<Eigen::Index>(x.dim(0));
    const auto in = static_cast<Eigen::Index>(x.dim(1));
    const auto out_features = static_cast<Eigen::Index>(weight.dim(0));
    Tensor<T> out({x.dim(0), weight.dim(0)});
    ConstMapRM<T> xm(x.data(), batch, in);
    ConstMapRM<T> wm(weight.data(), out_features, in);
    MapRM<T> om(out.data(), batch, out_features);
    om.noalias() = xm * wm.transpose();
    if (!bias.empty()) {
        if (bias.size() != weight.dim(0)) {
            throw ShapeError("dense: bias size mismatch");
        }
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias.data(), out_features);
        om.rowwise() += bm;
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& upstream, const Tensor<T>& x,
                             const Tensor<T>& weight, bool has_bias) {
    const auto batch = static_cast<Eigen::Index>(x.dim(0));
    const auto in = static_cast<Eigen::Index>(x.dim(1));
    const auto out_features = static_cast<Eigen::Index>(weight.dim(0));
    if (upstream.dims() != Shape{x.dim(0), weight.dim(0)}) {
        throw ShapeError("dense_backward: upstream " + shape_str(upstream.dims()));
    }
    DenseGrads<T> grads;
    grads.input = Tensor<T>(x.dims());
    grads.weight = Tensor<T>(weight.dims());
    ConstMapRM<T> up(upstream.data(), batch, out_features);
    ConstMapRM<T> xm(x.data(), batch, in);
    ConstMapRM<T> wm(weight.data(), out_features, in);
    MapRM<T>(grads.input.data(), batch, in).noalias() = up * wm;
    MapRM<T>(grads.weight.data(), out_features, in).noalias() = up.transpose() * xm;
    if (has_bias) {
        grads.bias = Tensor<T>({weight.dim(0)});
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(grads.bias.data(), out_features);
        bm = up.colwise().sum();
    }
    return grads;
}

template <typename T>
SoftmaxXent<T> softmax_xent_forward(const Tensor<T>& logits, std::span<const int> labels) {
    require_rank(logits.dims(), 2, "softmax_xent");
    const std::size_t batch = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != batch) {
        throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
    }
    SoftmaxXent<T> result;
    result.probabilities = Tensor<T>(logits.dims());
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ValueError("label " + std::to_string(label) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
        const T* row = logits.data() + b * classes;
        const double peak = *std::max_element(row, row + classes);
        double denom = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            denom += std::exp(static_cast<double>(row[k]) - peak);
        }
        const double log_denom = std::log(denom);
        for (std::size_t k = 0; k < classes; ++k) {
            result.probabilities(b, k) =
                static_cast<T>(std::exp(static_cast<double>(row[k]) - peak - log_denom));
        }
        total += -(static_cast<double>(row[label]) - peak - log_denom);
    }
    result.loss = total / static_cast<double>(batch);
    return result;
}

template <typename T>
Tensor<T> softmax_xent_backward(const Tensor<T>& probabilities, std::span<const int> labels) {
    const std::size_t batch = probabilities.dim(0);
    const std::size_t classes = probabilities.dim(1);
    if (labels.size() != batch) {
        throw ShapeError("softmax_xent_backward: label count mismatch");
    }
    Tensor<T> grad(probabilities.dims());
    const T inv_batch = T(1) / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ValueError("label " + std::to_string(label) + " out of range");
        }
        for (std::size_t k = 0; k < classes; ++k) {
            const T onehot = static_cast<std::size_t>(label) == k ? T(1) : T(0);
            grad(b, k) = (probabilities(b, k) - onehot) * inv_batch;
        }
    }
    return grad;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores) {
    require_rank(scores.dims(), 2, "argmax_rows");
    std::vector<int> out(scores.dim(0));
    const std::size_t classes = scores.dim(1);
    for (std::size_t b = 0; b < scores.dim(0); ++b) {
        const T* row = scores.data() + b * classes;
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes; ++k) {
            if (row[k] > row[best]) {
                best = k;
            }
        }
        out[b] = static_cast<int>(best);
    }
    return out;
}

#define HARMONIC_INSTANTIATE_OPS(T)                                                             \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, std::size_t,      \
                                         std::size_t);                                         \
    template Conv2dGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,             \
                                               const Tensor<T>&, std::size_t, std::size_t,     \
                                               bool);                                          \
    template Tensor<T> batchnorm_forward<T>(const Tensor<T>&, const BatchNormOptions&, Mode,   \
                                            Tensor<T>&, Tensor<T>&, const Tensor<T>*,          \
                                            const Tensor<T>*, BatchNormCache<T>*);             \
    template BatchNormGrads<T> batchnorm_backward<T>(const Tensor<T>&,                         \
                                                     const BatchNormCache<T>&,                 \
                                                     const BatchNormOptions&,                  \
                                                     const Tensor<T>*);                        \
    template Tensor<T> relu_forward<T>(const Tensor<T>&);                                      \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> avgpool_forward<T>(const Tensor<T>&, const PoolGeometry&);              \
    template Tensor<T> avgpool_backward<T>(const Tensor<T>&, const Shape&, const PoolGeometry&); \
    template Tensor<T> upsample_nearest_forward<T>(const Tensor<T>&, std::size_t, std::size_t); \
    template Tensor<T> upsample_nearest_backward<T>(const Tensor<T>&, const Shape&);           \
    template Tensor<T> dense_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template DenseGrads<T> dense_backward<T>(const Tensor<T>&, const Tensor<T>&,               \
                                             const Tensor<T>&, bool);                          \
    template SoftmaxXent<T> softmax_xent_forward<T>(const Tensor<T>&, std::span<const int>);   \
    template Tensor<T> softmax_xent_backward<T>(const Tensor<T>&, std::span<const int>);       \
    template std::vector<int> argmax_rows<T>(const Tensor<T>&);

HARMONIC_INSTANTIATE_OPS(float)
HARMONIC_INSTANTIATE_OPS(double)

#undef HARMONIC_INSTANTIATE_OPS

} // namespace harmonic
