#include "harmonic/harmonic_block.hpp"

#include <algorithm>
#include <cmath>
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

void check_fold_shapes(const Shape& weights, const Shape& basis) {
    if (weights.size() != 4 || basis.size() != 4 || weights[2] != weights[3] ||
        basis[1] != 1 || basis[2] != weights[2] || basis[3] != weights[3] ||
        basis[0] != weights[2] * weights[3]) {
        throw ShapeError("fold: weights " + shape_str(weights) + " incompatible with basis " +
                         shape_str(basis));
    }
}

void check_weights(const HarmonicBlockSpec& spec, const Shape& weights) {
    if (weights != spec.weight_shape()) {
        throw ShapeError("harmonic weights " + shape_str(weights) + ", expected " +
                         shape_str(spec.weight_shape()));
    }
}

void check_input(const HarmonicBlockSpec& spec, const Shape& input) {
    if (input.size() != 4 || input[1] != spec.in_channels) {
        throw ShapeError("harmonic block with N=" + std::to_string(spec.in_channels) +
                         " got input " + shape_str(input));
    }
}

std::uint64_t u64(std::size_t v) { return static_cast<std::uint64_t>(v); }

} // namespace

HarmonicAlgorithm parse_algorithm(int value) {
    if (value == 1) {
        return HarmonicAlgorithm::expanded;
    }
    if (value == 2) {
        return HarmonicAlgorithm::folded;
    }
    throw ValueError("algorithm must be 1 (expanded) or 2 (folded), got " + std::to_string(value));
}

std::vector<FrequencyPair> FilterSelection::pairs(const FilterBank& bank) const {
    switch (kind) {
    case Kind::lambda:
        return lambda_subset(bank, value);
    case Kind::truncate:
        return truncation_prefix(bank, value);
    case Kind::full:
        break;
    }
    return bank.zigzag();
}

std::string FilterSelection::str() const {
    switch (kind) {
    case Kind::lambda:
        return "lambda=" + std::to_string(value);
    case Kind::truncate:
        return "truncate=" + std::to_string(value);
    case Kind::full:
        break;
    }
    return "full";
}

void HarmonicBlockSpec::validate() const {
    if (in_channels == 0 || out_channels == 0) {
        throw ValueError("harmonic block needs positive channel counts");
    }
    if (kernel == 0) {
        throw ValueError("harmonic block kernel must be >= 1");
    }
    if (stride == 0) {
        throw ValueError("harmonic block stride must be >= 1");
    }
    if (selection.kind == FilterSelection::Kind::lambda && selection.value < 1) {
        throw ValueError("lambda must be >= 1");
    }
    if (selection.kind == FilterSelection::Kind::truncate &&
        (selection.value < 1 || static_cast<std::size_t>(selection.value) > kernel * kernel)) {
        throw ValueError("truncation count outside [1, K^2]");
    }
}

Shape HarmonicBlockSpec::output_shape(const Shape& input) const {
    check_input(*this, input);
    return {input[0], out_channels, conv_output_extent(input[2], kernel, stride, padding),
            conv_output_extent(input[3], kernel, stride, padding)};
}

template <typename T>
Tensor<T> selection_mask(const HarmonicBlockSpec& spec, const FilterBank& bank) {
    spec.validate();
    if (bank.kernel() != spec.kernel) {
        throw ShapeError("filter bank size does not match block kernel");
    }
    const std::size_t area = spec.kernel * spec.kernel;
    std::vector<T> per_filter(area, T(0));
    for (const FrequencyPair& f : spec.selection.pairs(bank)) {
        per_filter[bank.index(f)] = T(1);
    }
    Tensor<T> mask(spec.weight_shape());
    for (std::size_t mn = 0; mn < spec.out_channels * spec.in_channels; ++mn) {
        std::copy(per_filter.begin(), per_filter.end(), mask.data() + mn * area);
    }
    return mask;
}

template <typename T>
Tensor<T> basis_kernels(const FilterBank& bank) {
    const std::size_t k = bank.kernel();
    Tensor<T> out({k * k, 1, k, k});
    for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
            const auto psi = bank.psi({static_cast<int>(u), static_cast<int>(v)});
            std::transform(psi.begin(), psi.end(), out.data() + (u * k + v) * k * k,
                           [](double x) { return static_cast<T>(x); });
        }
    }
    return out;
}

template <typename T>
Tensor<T> basis_responses(const Tensor<T>& input, const Tensor<T>& basis, std::size_t stride,
                          std::size_t padding) {
    if (input.rank() != 4) {
        throw ShapeError("basis_responses expects rank-4 input, got " + shape_str(input.dims()));
    }
    const std::size_t batch = input.dim(0);
    const std::size_t channels = input.dim(1);
    const Tensor<T> planes = input.reshaped({batch * channels, 1, input.dim(2), input.dim(3)});
    Tensor<T> z = conv2d_forward(planes, basis, stride, padding);
    const Shape zd = z.dims();
    z.reshape({batch, channels * zd[1], zd[2], zd[3]});
    return z;
}

template <typename T>
Conv2dGrads<T> basis_responses_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                                        const Tensor<T>& basis, std::size_t stride,
                                        std::size_t padding, bool need_input_grad) {
    const std::size_t batch = input.dim(0);
    const std::size_t channels = input.dim(1);
    const std::size_t filters = basis.dim(0);
    if (upstream.rank() != 4 || upstream.dim(1) != channels * filters) {
        throw ShapeError("basis_responses_backward: upstream " + shape_str(upstream.dims()));
    }
    const Tensor<T> planes = input.reshaped({batch * channels, 1, input.dim(2), input.dim(3)});
    const Tensor<T> up =
        upstream.reshaped({batch * channels, filters, upstream.dim(2), upstream.dim(3)});
    auto grads = conv2d_backward(up, planes, basis, stride, padding, need_input_grad);
    if (need_input_grad) {
        grads.input.reshape(input.dims());
    }
    return grads;
}

template <typename T>
Tensor<T> fold_filters(const Tensor<T>& weights, const Tensor<T>& basis) {
    check_fold_shapes(weights.dims(), basis.dims());
    const auto pairs = static_cast<Eigen::Index>(weights.dim(0) * weights.dim(1));
    const auto area = static_cast<Eigen::Index>(basis.dim(0));
    Tensor<T> folded(weights.dims());
    ConstMapRM<T> w(weights.data(), pairs, area);
    ConstMapRM<T> b(basis.data(), area, area);
    MapRM<T>(folded.data(), pairs, area).noalias() = w * b;
    return folded;
}

template <typename T>
FoldGrads<T> fold_filters_backward(const Tensor<T>& grad_folded, const Tensor<T>& weights,
                                   const Tensor<T>& basis) {
    check_fold_shapes(weights.dims(), basis.dims());
    if (grad_folded.dims() != weights.dims()) {
        throw ShapeError("fold backward: gradient " + shape_str(grad_folded.dims()));
    }
    const auto pairs = static_cast<Eigen::Index>(weights.dim(0) * weights.dim(1));
    const auto area = static_cast<Eigen::Index>(basis.dim(0));
    FoldGrads<T> grads{Tensor<T>(weights.dims()), Tensor<T>(basis.dims())};
    ConstMapRM<T> g(grad_folded.data(), pairs, area);
    ConstMapRM<T> w(weights.data(), pairs, area);
    ConstMapRM<T> b(basis.data(), area, area);
    MapRM<T>(grads.weights.data(), pairs, area).noalias() = g * b.transpose();
    MapRM<T>(grads.basis.data(), area, area).noalias() = w.transpose() * g;
    return grads;
}

template <typename T>
Tensor<T> fold_weights(const HarmonicBlockSpec& spec, const FilterBank& bank,
                       const Tensor<T>& weights) {
    spec.validate();
    if (spec.normalize) {
        throw ValueError("folding requires a linear block; normalize=true blocks cannot fold");
    }
    check_weights(spec, weights.dims());
    const Tensor<T> mask = selection_mask<T>(spec, bank);
    Tensor<T> active = weights;
    for (std::size_t i = 0; i < active.size(); ++i) {
        active[i] *= mask[i];
    }
    return fold_filters(active, basis_kernels<T>(bank));
}

template <typename T>
Tensor<T> harmonic_forward_expanded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                    const Tensor<T>& weights, const Tensor<T>& input, Mode mode,
                                    ActivationMeter* meter) {
    spec.validate();
    check_weights(spec, weights.dims());
    check_input(spec, input.dims());
    if (spec.normalize && mode == Mode::eval) {
        throw ValueError("stateless expanded pass has no running statistics for eval mode");
    }
    const Tensor<T> mask = selection_mask<T>(spec, bank);
    Tensor<T> active = weights;
    for (std::size_t i = 0; i < active.size(); ++i) {
        active[i] *= mask[i];
    }
    if (meter != nullptr) {
        meter->observe(input.size());
    }
    Tensor<T> z = basis_responses(input, basis_kernels<T>(bank), spec.stride, spec.padding);
    if (meter != nullptr) {
        meter->observe(z.size());
    }
    if (spec.normalize) {
        Tensor<T> mean({z.dim(1)}, T(0));
        Tensor<T> var({z.dim(1)}, T(1));
        BatchNormOptions options;
        options.affine = false;
        z = batchnorm_forward<T>(z, options, mode, mean, var, nullptr, nullptr,
                              static_cast<BatchNormCache<T>*>(nullptr));
    }
    const std::size_t m = spec.out_channels;
    active.reshape({m, z.dim(1), 1, 1});
    Tensor<T> out = conv2d_forward(z, active, 1, 0);
    if (meter != nullptr) {
        meter->observe(out.size());
    }
    return out;
}

template <typename T>
Tensor<T> harmonic_forward_folded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                  const Tensor<T>& weights, const Tensor<T>& input,
                                  ActivationMeter* meter) {
    check_input(spec, input.dims());
    const Tensor<T> folded = fold_weights(spec, bank, weights);
    if (meter != nullptr) {
        meter->observe(input.size());
    }
    Tensor<T> out = conv2d_forward(input, folded, spec.stride, spec.padding);
    if (meter != nullptr) {
        meter->observe(out.size());
    }
    return out;
}

CostReport cost_report(const HarmonicBlockSpec& spec, const Shape& input_dims,
                       HarmonicAlgorithm algorithm) {
    spec.validate();
    const Shape out = spec.output_shape(input_dims);
    const std::uint64_t batch = u64(input_dims[0]);
    const std::uint64_t n = u64(spec.in_channels);
    const std::uint64_t m = u64(spec.out_channels);
    const std::uint64_t k2 = u64(spec.kernel * spec.kernel);
    const std::uint64_t positions = u64(out[2] * out[3]);
    const std::uint64_t input_elems = batch * n * u64(input_dims[2] * input_dims[3]);
    const std::uint64_t output_elems = batch * m * positions;

    CostReport report;
    report.algorithm = algorithm;
    report.standard_conv_madds = batch * m * n * k2 * positions;
    if (algorithm == HarmonicAlgorithm::expanded) {
        report.overhead_madds = batch * n * k2 * k2 * positions;
        report.overhead_ratio = Rational(static_cast<std::int64_t>(report.overhead_madds),
                                         static_cast<std::int64_t>(report.standard_conv_madds));
        const std::uint64_t z_elems = batch * n * k2 * positions;
        report.peak_intermediate_elems = std::max({input_elems, z_elems, output_elems});
    } else {
        report.overhead_madds = m * n * k2 * k2;
        const std::uint64_t per_image_conv = m * n * k2 * positions;
        report.overhead_ratio = Rational(static_cast<std::int64_t>(report.overhead_madds),
                                         static_cast<std::int64_t>(per_image_conv));
        report.peak_intermediate_elems = std::max(input_elems, output_elems);
    }
    report.madds = report.standard_conv_madds + report.overhead_madds;
    report.ratio_vs_standard_conv = Rational(static_cast<std::int64_t>(report.madds),
                                             static_cast<std::int64_t>(report.standard_conv_madds));
    return report;
}

Tensor<double> reference_conv2d(const Tensor<double>& input, const Tensor<double>& kernels,
                                std::size_t stride, std::size_t padding, MaddCounter& counter) {
    const ConvGeometry g = ConvGeometry::infer(input.dims(), kernels.dims(), stride, padding);
    Tensor<double> out(g.output_shape());
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < g.in_channels; ++c) {
                        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
                            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                                ++counter.count;
                                const auto ih = static_cast<std::ptrdiff_t>(oh * stride + ki) -
                                                static_cast<std::ptrdiff_t>(padding);
                                const auto iw = static_cast<std::ptrdiff_t>(ow * stride + kj) -
                                                static_cast<std::ptrdiff_t>(padding);
                                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
                                    iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
                                    continue;
                                }
                                acc += kernels(o, c, ki, kj) *
                                       input(b, c, static_cast<std::size_t>(ih),
                                             static_cast<std::size_t>(iw));
                            }
                        }
                    }
                    out(b, o, oh, ow) = acc;
                }
            }
        }
    }
    return out;
}

Tensor<double> reference_harmonic_expanded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                           const Tensor<double>& weights,
                                           const Tensor<double>& input, MaddCounter& counter) {
    if (spec.normalize) {
        throw ValueError("reference expanded loop covers linear blocks only");
    }
    check_weights(spec, weights.dims());
    const Shape out_dims = spec.output_shape(input.dims());
    const std::size_t batch = input.dim(0);
    const std::size_t n_ch = spec.in_channels;
    const std::size_t k = spec.kernel;
    const std::size_t area = k * k;
    const std::size_t out_h = out_dims[2];
    const std::size_t out_w = out_dims[3];
    const Tensor<double> mask = selection_mask<double>(spec, bank);

    Tensor<double> z({batch, n_ch * area, out_h, out_w});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t n = 0; n < n_ch; ++n) {
            for (std::size_t f = 0; f < area; ++f) {
                const auto psi = bank.psi({static_cast<int>(f / k), static_cast<int>(f % k)});
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        double acc = 0.0;
                        for (std::size_t ki = 0; ki < k; ++ki) {
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                ++counter.count;
                                const auto ih = static_cast<std::ptrdiff_t>(oh * spec.stride + ki) -
                                                static_cast<std::ptrdiff_t>(spec.padding);
                                const auto iw = static_cast<std::ptrdiff_t>(ow * spec.stride + kj) -
                                                static_cast<std::ptrdiff_t>(spec.padding);
                                if (ih < 0 || iw < 0 ||
                                    ih >= static_cast<std::ptrdiff_t>(input.dim(2)) ||
                                    iw >= static_cast<std::ptrdiff_t>(input.dim(3))) {
                                    continue;
                                }
                                acc += psi[ki * k + kj] * input(b, n, static_cast<std::size_t>(ih),
                                                                static_cast<std::size_t>(iw));
                            }
                        }
                        z(b, n * area + f, oh, ow) = acc;
                    }
                }
            }
        }
    }
    Tensor<double> out(out_dims);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t m = 0; m < spec.out_channels; ++m) {
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                for (std::size_t ow = 0; ow < out_w; ++ow) {
                    double acc = 0.0;
                    for (std::size_t n = 0; n < n_ch; ++n) {
                        for (std::size_t f = 0; f < area; ++f) {
                            ++counter.count;
                            const std::size_t wi = (m * n_ch + n) * area + f;
                            acc += weights[wi] * mask[wi] * z(b, n * area + f, oh, ow);
                        }
                    }
                    out(b, m, oh, ow) = acc;
                }
            }
        }
    }
    return out;
}

Tensor<double> reference_harmonic_folded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                         const Tensor<double>& weights,
                                         const Tensor<double>& input, MaddCounter& counter) {
    if (spec.normalize) {
        throw ValueError("folding requires a linear block");
    }
    check_weights(spec, weights.dims());
    check_input(spec, input.dims());
    const std::size_t k = spec.kernel;
    const std::size_t area = k * k;
    const Tensor<double> mask = selection_mask<double>(spec, bank);
    Tensor<double> folded(spec.weight_shape());
    for (std::size_t m = 0; m < spec.out_channels; ++m) {
        for (std::size_t n = 0; n < spec.in_channels; ++n) {
            const std::size_t base = (m * spec.in_channels + n) * area;
            for (std::size_t f = 0; f < area; ++f) {
                const auto psi = bank.psi({static_cast<int>(f / k), static_cast<int>(f % k)});
                for (std::size_t tap = 0; tap < area; ++tap) {
                    ++counter.count;
                    folded[base + tap] += weights[base + f] * mask[base + f] * psi[tap];
                }
            }
        }
    }
    return reference_conv2d(input, folded, spec.stride, spec.padding, counter);
}

// --- HarmonicBlock layer ----------------------------------------------------------------

template <typename T>
HarmonicBlock<T>::HarmonicBlock(HarmonicBlockSpec spec, HarmonicAlgorithm algorithm, Rng& rng,
                                BasisKind basis)
    : spec_(spec), algorithm_(algorithm), basis_kind_(basis), bank_(spec.kernel) {
    spec_.validate();
    const std::size_t area = spec_.kernel * spec_.kernel;
    weights_ = Parameter<T>("weights", uniform_init<T>(spec_.weight_shape(),
                                                       spec_.in_channels * area, rng));
    weights_.set_mask(selection_mask<T>(spec_, bank_));
    if (basis_kind_ == BasisKind::learned) {
        basis_ = Parameter<T>("filters",
                              uniform_init<T>({area, 1, spec_.kernel, spec_.kernel}, area, rng));
    } else {
        basis_ = Parameter<T>("filters", basis_kernels<T>(bank_), false);
    }
    if (spec_.normalize) {
        const std::size_t channels = spec_.in_channels * area;
        running_mean_ = Parameter<T>("running_mean", Tensor<T>({channels}, T(0)), false);
        running_var_ = Parameter<T>("running_var", Tensor<T>({channels}, T(1)), false);
    }
}

template <typename T>
std::vector<Parameter<T>*> HarmonicBlock<T>::parameters() {
    if (basis_kind_ == BasisKind::learned) {
        return {&weights_, &basis_};
    }
    return {&weights_};
}

template <typename T>
std::vector<Parameter<T>*> HarmonicBlock<T>::buffers() {
    if (spec_.normalize) {
        return {&running_mean_, &running_var_};
    }
    return {};
}

template <typename T>
HarmonicAlgorithm HarmonicBlock<T>::algorithm() const noexcept {
    return spec_.normalize ? HarmonicAlgorithm::expanded : algorithm_;
}

template <typename T>
void HarmonicBlock<T>::set_algorithm(HarmonicAlgorithm algorithm) {
    algorithm_ = algorithm;
    folded_valid_ = false;
}

template <typename T>
std::string HarmonicBlock<T>::describe() const {
    return "in=" + std::to_string(spec_.in_channels) + " out=" + std::to_string(spec_.out_channels) +
           " k=" + std::to_string(spec_.kernel) + " stride=" + std::to_string(spec_.stride) +
           " pad=" + std::to_string(spec_.padding) + " " + spec_.selection.str() +
           " normalize=" + (spec_.normalize ? "1" : "0") +
           " alg=" + std::to_string(static_cast<int>(algorithm()));
}

template <typename T>
const Tensor<T>& HarmonicBlock<T>::folded_filters(Mode mode) {
    const bool fresh = folded_valid_ && folded_weights_version_ == weights_.version &&
                       folded_basis_version_ == basis_.version;
    if (mode == Mode::eval && fresh) {
        return folded_;
    }
    folded_ = fold_filters(weights_.value, basis_.value);
    folded_weights_version_ = weights_.version;
    folded_basis_version_ = basis_.version;
    folded_valid_ = true;
    ++fold_count_;
    return folded_;
}

template <typename T>
Tensor<T> HarmonicBlock<T>::forward(const Tensor<T>& x, Mode mode) {
    check_input(spec_, x.dims());
    mode_ = mode;
    input_ = x;
    last_path_ = algorithm();
    if (last_path_ == HarmonicAlgorithm::folded) {
        return conv2d_forward(x, folded_filters(mode), spec_.stride, spec_.padding);
    }
    Tensor<T> z = basis_responses(x, basis_.value, spec_.stride, spec_.padding);
    if (spec_.normalize) {
        BatchNormOptions options;
        options.affine = false;
        z = batchnorm_forward<T>(z, options, mode, running_mean_.value, running_var_.value, nullptr,
                              nullptr, &bn_cache_);
    }
    responses_ = std::move(z);
    const Tensor<T> combine = weights_.value.reshaped(
        {spec_.out_channels, responses_.dim(1), 1, 1});
    return conv2d_forward(responses_, combine, 1, 0);
}

template <typename T>
Tensor<T> HarmonicBlock<T>::backward(const Tensor<T>& upstream) {
    if (input_.empty()) {
        throw ValueError("harmonic block: backward called before forward");
    }
    const bool learn_basis = basis_kind_ == BasisKind::learned;
    Tensor<T> grad_input;
    Tensor<T> grad_weights;
    if (last_path_ == HarmonicAlgorithm::folded) {
        auto conv = conv2d_backward(upstream, input_, folded_, spec_.stride, spec_.padding);
        auto fold = fold_filters_backward(conv.kernels, weights_.value, basis_.value);
        grad_weights = std::move(fold.weights);
        grad_input = std::move(conv.input);
        if (learn_basis) {
            for (std::size_t i = 0; i < basis_.grad.size(); ++i) {
                basis_.grad[i] += fold.basis[i];
            }
        }
    } else {
        const Tensor<T> combine = weights_.value.reshaped(
            {spec_.out_channels, responses_.dim(1), 1, 1});
        auto mix = conv2d_backward(upstream, responses_, combine, 1, 0);
        grad_weights = std::move(mix.kernels);
        grad_weights.reshape(spec_.weight_shape());
        Tensor<T> grad_z = std::move(mix.input);
        if (spec_.normalize) {
            BatchNormOptions options;
            options.affine = false;
            grad_z = batchnorm_backward<T>(grad_z, bn_cache_, options, nullptr).input;
        }
        auto depthwise = basis_responses_backward(grad_z, input_, basis_.value, spec_.stride,
                                                  spec_.padding);
        grad_input = std::move(depthwise.input);
        if (learn_basis) {
            for (std::size_t i = 0; i < basis_.grad.size(); ++i) {
                basis_.grad[i] += depthwise.kernels[i];
            }
        }
    }
    for (std::size_t i = 0; i < grad_weights.size(); ++i) {
        weights_.grad[i] += weights_.mask[i] * grad_weights[i];
    }
    return grad_input;
}

#define HARMONIC_INSTANTIATE_BLOCK(T)                                                          \
    template Tensor<T> selection_mask<T>(const HarmonicBlockSpec&, const FilterBank&);        \
    template Tensor<T> basis_kernels<T>(const FilterBank&);                                   \
    template Tensor<T> basis_responses<T>(const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                                          std::size_t);                                       \
    template Conv2dGrads<T> basis_responses_backward<T>(const Tensor<T>&, const Tensor<T>&,   \
                                                        const Tensor<T>&, std::size_t,        \
                                                        std::size_t, bool);                   \
    template Tensor<T> fold_filters<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template FoldGrads<T> fold_filters_backward<T>(const Tensor<T>&, const Tensor<T>&,        \
                                                   const Tensor<T>&);                         \
    template Tensor<T> fold_weights<T>(const HarmonicBlockSpec&, const FilterBank&,           \
                                       const Tensor<T>&);                                     \
    template Tensor<T> harmonic_forward_expanded<T>(const HarmonicBlockSpec&,                 \
                                                    const FilterBank&, const Tensor<T>&,      \
                                                    const Tensor<T>&, Mode,                   \
                                                    ActivationMeter*);                        \
    template Tensor<T> harmonic_forward_folded<T>(const HarmonicBlockSpec&, const FilterBank&, \
                                                  const Tensor<T>&, const Tensor<T>&,         \
                                                  ActivationMeter*);                          \
    template class HarmonicBlock<T>;

HARMONIC_INSTANTIATE_BLOCK(float)
HARMONIC_INSTANTIATE_BLOCK(double)

#undef HARMONIC_INSTANTIATE_BLOCK

} // namespace harmonic
