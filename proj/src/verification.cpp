#include "harmonic/verification.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "harmonic/experiments.hpp"
#include "harmonic/grad_check.hpp"
#include "harmonic/harmonic_block.hpp"
#include "harmonic/lapped_dct.hpp"
#include "harmonic/layers.hpp"
#include "harmonic/rng.hpp"

namespace harmonic {

void SuiteResult::observe(double error, const std::string& label) {
    ++cases;
    if (cases == 1 || error > worst || std::isnan(error)) {
        worst = error;
        worst_case = label;
    }
    if (!informational && !(error <= tolerance)) {
        passed = false;
    }
}

namespace {

SuiteResult make_suite(std::string name, double tol, bool informational = false) {
    SuiteResult s;
    s.name = std::move(name);
    s.tolerance = tol;
    s.informational = informational;
    return s;
}

template <typename T>
Tensor<T> random_tensor(Shape dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(rng.uniform(lo, hi));
    }
    return t;
}

int draw(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

struct BlockCase {
    HarmonicBlockSpec spec;
    Shape input;
    std::string label;
};

BlockCase random_block_case(Rng& rng) {
    BlockCase c;
    c.spec.in_channels = static_cast<std::size_t>(draw(rng, 1, 8));
    c.spec.out_channels = static_cast<std::size_t>(draw(rng, 1, 8));
    c.spec.kernel = static_cast<std::size_t>(draw(rng, 3, 4));
    c.spec.stride = static_cast<std::size_t>(draw(rng, 1, 2));
    c.spec.padding = static_cast<std::size_t>(draw(rng, 0, 1));
    const int k = static_cast<int>(c.spec.kernel);
    switch (draw(rng, 0, 2)) {
    case 1:
        c.spec.selection = FilterSelection::lambda(draw(rng, 1, 2 * k - 1));
        break;
    case 2:
        c.spec.selection = FilterSelection::truncate(draw(rng, 1, k * k));
        break;
    default:
        break;
    }
    const std::size_t h = c.spec.kernel + static_cast<std::size_t>(draw(rng, 0, 7));
    const std::size_t w = c.spec.kernel + static_cast<std::size_t>(draw(rng, 0, 7));
    c.input = {static_cast<std::size_t>(draw(rng, 1, 3)), c.spec.in_channels, h, w};
    c.label = fmt::format("N={} M={} K={} s={} p={} {} in={}", c.spec.in_channels,
                          c.spec.out_channels, c.spec.kernel, c.spec.stride, c.spec.padding,
                          c.spec.selection.str(), shape_str(c.input));
    return c;
}

template <typename T>
void compare_block_paths(const BlockCase& c, std::uint64_t seed, SuiteResult& forward,
                         SuiteResult& grad_w, SuiteResult& grad_x) {
    Rng init_a(seed);
    Rng init_b(seed);
    HarmonicBlock<T> expanded(c.spec, HarmonicAlgorithm::expanded, init_a);
    HarmonicBlock<T> folded(c.spec, HarmonicAlgorithm::folded, init_b);
    Rng data(mix_seed(seed, 1));
    const Tensor<T> x = random_tensor<T>(c.input, data);
    const Tensor<T> ya = expanded.forward(x, Mode::train);
    const Tensor<T> yb = folded.forward(x, Mode::train);
    forward.observe(max_rel_diff(ya, yb), c.label);

    const Tensor<T> up = random_tensor<T>(ya.dims(), data);
    expanded.weights().zero_grad();
    folded.weights().zero_grad();
    const Tensor<T> ga = expanded.backward(up);
    const Tensor<T> gb = folded.backward(up);
    grad_w.observe(max_rel_diff(expanded.weights().grad, folded.weights().grad), c.label);
    grad_x.observe(max_rel_diff(ga, gb), c.label);
}

void run_layer(std::vector<SuiteResult>& out, const std::string& name, Layer<double>& layer,
               const Tensor<double>& input, const GradientOptions& options) {
    GradCheckOptions gc;
    gc.seed = mix_seed(options.seed, out.size());
    gc.check_input = true;
    const GradCheckReport r = grad_check_layer(layer, input, options.layer_tol, gc);
    SuiteResult s = make_suite("gradient " + name, options.layer_tol);
    s.cases = r.checked;
    s.worst = r.worst.error;
    s.worst_case = fmt::format("{}[{}]", r.worst.tensor, r.worst.index);
    s.passed = r.passed && r.checked > 0;
    out.push_back(std::move(s));
}

void run_model(std::vector<SuiteResult>& out, const std::string& name, ModelGraph<double>& model,
               const Tensor<double>& input, const std::vector<int>& labels, double tol,
               std::size_t samples, std::uint64_t seed, double step = 1e-5) {
    GradCheckOptions gc;
    gc.seed = seed;
    gc.step_scale = step;
    gc.refine_steps = 2;
    gc.check_input = true;
    gc.samples_per_tensor = samples;
    const GradCheckReport r = grad_check(model, input, labels, tol, gc);
    SuiteResult s = make_suite("gradient " + name, tol);
    s.cases = r.checked;
    s.worst = r.worst.error;
    s.worst_case = fmt::format("{}[{}]", r.worst.tensor, r.worst.index);
    s.passed = r.passed && r.checked > 0;
    out.push_back(std::move(s));
}

HarmonicBlockSpec block_spec(std::size_t n, std::size_t m, std::size_t k, std::size_t stride,
                             std::size_t pad, FilterSelection sel, bool normalize) {
    HarmonicBlockSpec s;
    s.in_channels = n;
    s.out_channels = m;
    s.kernel = k;
    s.stride = stride;
    s.padding = pad;
    s.selection = sel;
    s.normalize = normalize;
    return s;
}

} // namespace

SuiteResult verify_phase_suite(const LappedOptions& o) {
    SuiteResult s = make_suite("phase form of the sine transform", o.tol);
    for (int n = 2; n <= o.max_n; ++n) {
        for (int k = 1; k < n; ++k) {
            for (int z : o.zs) {
                const auto seed = mix_seed(o.seed, static_cast<std::uint64_t>(n * 1000 + k));
                s.observe(verify_phase_identity(n, k, z, o.trials, seed),
                          fmt::format("N={} k={} z={}", n, k, z));
            }
        }
    }
    return s;
}

SuiteResult verify_shifted_cosine_suite(const LappedOptions& o) {
    SuiteResult s = make_suite("sine transform as shifted cosine", o.tol);
    for (int n = 2; n <= o.max_n; ++n) {
        for (int k = 1; k < n; ++k) {
            for (int z : o.zs) {
                const auto seed = mix_seed(o.seed, static_cast<std::uint64_t>(n * 1000 + k));
                s.observe(verify_shifted_cosine(n, k, z, o.trials, seed),
                          fmt::format("N={} k={} z={}", n, k, z));
            }
        }
    }
    return s;
}

SuiteResult verify_delta_integrality_suite(const LappedOptions& o) {
    SuiteResult s = make_suite("shift integrality predicate", 0.0);
    for (int n = 1; n <= o.max_n; ++n) {
        for (int k = 1; k <= 2 * n; ++k) {
            for (int z = -10; z <= 10; ++z) {
                const bool predicate = shift_is_integral(n, k, z);
                const bool exact = shift_delta(n, k, z).is_integer();
                s.observe(predicate == exact ? 0.0 : 1.0, fmt::format("N={} k={} z={}", n, k, z));
            }
        }
    }
    return s;
}

SuiteResult verify_window_shift_suite(const LappedOptions& o) {
    SuiteResult s = make_suite("window shift, periodic signal, even k", o.shift_tol);
    Rng rng(o.seed);
    for (int n = 2; n <= o.max_n; ++n) {
        for (int k = 2; k < n; k += 2) {
            for (int z = -3; z <= 5; ++z) {
                if (!shift_is_integral(n, k, z)) {
                    continue;
                }
                const auto d = static_cast<std::size_t>(std::abs(shift_delta(n, k, z).num()));
                const auto signal = periodic_signal(static_cast<std::size_t>(n),
                                                    d + 3 * static_cast<std::size_t>(n), rng);
                s.observe(verify_window_shift(n, k, z, signal),
                          fmt::format("N={} k={} z={} delta={}", n, k, z, shift_delta(n, k, z).str()));
            }
        }
    }
    if (s.cases == 0) {
        s.passed = false;
        s.note = "no (N, k, z) with integral delta in range";
    }
    return s;
}

SuiteResult measure_odd_window_shift(const LappedOptions& o) {
    SuiteResult s = make_suite("window shift, periodic signal, odd k", 0.0, true);
    s.note = "not an identity: odd k needs an antisymmetric extension";
    Rng rng(mix_seed(o.seed, 99));
    for (int n = 2; n <= o.max_n; ++n) {
        for (int k = 1; k < n; k += 2) {
            for (int z = -3; z <= 5; ++z) {
                if (!shift_is_integral(n, k, z)) {
                    continue;
                }
                const auto d = static_cast<std::size_t>(std::abs(shift_delta(n, k, z).num()));
                const auto signal = periodic_signal(static_cast<std::size_t>(n),
                                                    d + 3 * static_cast<std::size_t>(n), rng);
                s.observe(measure_window_shift(n, k, z, signal),
                          fmt::format("N={} k={} z={}", n, k, z));
            }
        }
    }
    return s;
}

std::vector<SuiteResult> verify_equivalence_suites(const EquivalenceOptions& o) {
    std::vector<SuiteResult> out;
    SuiteResult f32_fwd = make_suite("expanded vs folded forward (f32)", o.tol_f32);
    SuiteResult f32_gw = make_suite("expanded vs folded weight gradient (f32)", o.tol_f32);
    SuiteResult f32_gx = make_suite("expanded vs folded input gradient (f32)", o.tol_f32);
    SuiteResult f64_fwd = make_suite("expanded vs folded forward (f64)", o.tol_f64);
    SuiteResult f64_gw = make_suite("expanded vs folded weight gradient (f64)", o.tol_f64);
    SuiteResult f64_gx = make_suite("expanded vs folded input gradient (f64)", o.tol_f64);
    Rng rng(o.seed);
    for (int i = 0; i < o.configs; ++i) {
        const BlockCase c = random_block_case(rng);
        const std::uint64_t seed = mix_seed(o.seed, static_cast<std::uint64_t>(i));
        compare_block_paths<float>(c, seed, f32_fwd, f32_gw, f32_gx);
        compare_block_paths<double>(c, seed, f64_fwd, f64_gw, f64_gx);
    }
    for (SuiteResult* s : {&f32_fwd, &f32_gw, &f32_gx, &f64_fwd, &f64_gw, &f64_gx}) {
        out.push_back(std::move(*s));
    }
    return out;
}

std::vector<SuiteResult> verify_gradient_suites(const GradientOptions& o) {
    std::vector<SuiteResult> out;
    Rng rng(o.seed);
    {
        Conv2d<double> layer(3, 4, 3, 2, 1, rng);
        run_layer(out, "conv2d", layer, random_tensor<double>({2, 3, 7, 7}, rng), o);
    }
    {
        BatchNorm<double> layer(3, true);
        layer.parameters()[0]->value = random_tensor<double>({3}, rng, 0.5, 1.5);
        layer.parameters()[1]->value = random_tensor<double>({3}, rng);
        run_layer(out, "batchnorm", layer, random_tensor<double>({4, 3, 3, 3}, rng), o);
    }
    {
        BatchNorm<double> layer(5, true);
        layer.parameters()[0]->value = random_tensor<double>({5}, rng, 0.5, 1.5);
        run_layer(out, "batchnorm (features)", layer, random_tensor<double>({6, 5}, rng), o);
    }
    {
        ReLU<double> layer;
        run_layer(out, "relu", layer, random_tensor<double>({2, 3, 4, 4}, rng), o);
    }
    {
        AvgPool2d<double> layer(PoolGeometry{3, 2, 1});
        run_layer(out, "avgpool", layer, random_tensor<double>({2, 2, 7, 7}, rng), o);
    }
    {
        UpsampleNearest<double> layer(7, 7);
        run_layer(out, "upsample_nearest", layer, random_tensor<double>({2, 2, 3, 3}, rng), o);
    }
    {
        Flatten<double> layer;
        run_layer(out, "flatten", layer, random_tensor<double>({2, 2, 3, 3}, rng), o);
    }
    {
        Dense<double> layer(6, 4, rng);
        layer.bias().value = random_tensor<double>({4}, rng);
        run_layer(out, "dense", layer, random_tensor<double>({3, 6}, rng), o);
    }
    {
        HarmonicBlock<double> layer(block_spec(2, 3, 3, 1, 1, FilterSelection::full(), true),
                                    HarmonicAlgorithm::expanded, rng);
        run_layer(out, "harmonic (expanded, normalized)", layer,
                  random_tensor<double>({3, 2, 5, 5}, rng), o);
    }
    {
        HarmonicBlock<double> layer(block_spec(2, 3, 4, 2, 1, FilterSelection::lambda(3), false),
                                    HarmonicAlgorithm::folded, rng);
        run_layer(out, "harmonic (folded, lambda=3)", layer,
                  random_tensor<double>({2, 2, 8, 8}, rng), o);
    }
    {
        HarmonicBlock<double> layer(block_spec(2, 3, 3, 1, 1, FilterSelection::full(), false),
                                    HarmonicAlgorithm::expanded, rng, BasisKind::learned);
        run_layer(out, "separable (expanded)", layer, random_tensor<double>({2, 2, 5, 5}, rng), o);
    }
    {
        HarmonicBlock<double> layer(block_spec(2, 3, 3, 2, 0, FilterSelection::full(), false),
                                    HarmonicAlgorithm::folded, rng, BasisKind::learned);
        run_layer(out, "separable (folded)", layer, random_tensor<double>({2, 2, 7, 7}, rng), o);
    }
    {
        ModelGraph<double> model;
        auto& dense = model.emplace<Dense<double>>(6, 10, rng);
        dense.bias().value = random_tensor<double>({10}, rng);
        const std::vector<int> labels{3, 0, 9, 3};
        run_model(out, "softmax_xent", model, random_tensor<double>({4, 6}, rng), labels,
                  o.layer_tol, 0, mix_seed(o.seed, 50));
    }
    if (o.include_model) {
        const std::vector<int> labels{7, 2, 1, 0};
        const Tensor<double> x = random_tensor<double>({4, 1, 28, 28}, rng);
        for (ModelVariant v : {ModelVariant::harmonic, ModelVariant::conv}) {
            ModelGraph<double> model = build_mnist_model<double>(v, HarmonicAlgorithm::expanded,
                                                                 mix_seed(o.seed, 60));
            run_model(out, "mnist model (" + variant_name(v) + ")", model, x, labels, o.model_tol,
                      o.model_samples, mix_seed(o.seed, 61), o.model_step);
        }
    }
    return out;
}

SuiteResult verify_cost_suite() {
    SuiteResult s = make_suite("multiply-add counts and overhead ratios", 0.0);
    struct Case {
        std::size_t b, n, m, k, stride, pad, h, w;
    };
    const Case cases[] = {
        {1, 1, 1, 3, 1, 1, 5, 5},  {2, 3, 4, 3, 1, 1, 6, 6},  {1, 2, 16, 3, 1, 1, 8, 8},
        {2, 4, 3, 4, 2, 0, 9, 9},  {1, 3, 5, 3, 2, 1, 7, 5},  {3, 2, 2, 4, 1, 0, 6, 7},
        {1, 5, 6, 3, 1, 0, 10, 10}, {2, 1, 8, 8, 4, 0, 16, 16},
    };
    Rng rng(13);
    for (const Case& c : cases) {
        const HarmonicBlockSpec spec =
            block_spec(c.n, c.m, c.k, c.stride, c.pad, FilterSelection::full(), false);
        const FilterBank bank(c.k);
        const Shape in{c.b, c.n, c.h, c.w};
        const Tensor<double> x = random_tensor<double>(in, rng);
        const Tensor<double> w = random_tensor<double>(spec.weight_shape(), rng);
        MaddCounter conv;
        MaddCounter expanded;
        MaddCounter folded;
        reference_conv2d(x, w, c.stride, c.pad, conv);
        reference_harmonic_expanded(spec, bank, w, x, expanded);
        reference_harmonic_folded(spec, bank, w, x, folded);
        const CostReport r1 = cost_report(spec, in, HarmonicAlgorithm::expanded);
        const CostReport r2 = cost_report(spec, in, HarmonicAlgorithm::folded);
        const Shape out = spec.output_shape(in);
        const auto k2 = static_cast<std::int64_t>(c.k * c.k);
        const auto positions = static_cast<std::int64_t>(out[2] * out[3]);
        const auto per_image = static_cast<std::int64_t>(conv.count / c.b);

        bool ok = conv.count == r1.standard_conv_madds && expanded.count == r1.madds &&
                  folded.count == r2.madds;
        // ratios measured from the instrumented counts
        ok = ok && Rational(static_cast<std::int64_t>(expanded.count - conv.count),
                            static_cast<std::int64_t>(conv.count)) ==
                       Rational(k2, static_cast<std::int64_t>(c.m));
        ok = ok && Rational(static_cast<std::int64_t>(folded.count - conv.count), per_image) ==
                       Rational(k2, positions);
        ok = ok && r1.overhead_ratio == Rational(k2, static_cast<std::int64_t>(c.m)) &&
             r2.overhead_ratio == Rational(k2, positions);
        s.observe(ok ? 0.0 : 1.0, fmt::format("B={} N={} M={} K={} s={} p={} {}x{}", c.b, c.n,
                                              c.m, c.k, c.stride, c.pad, c.h, c.w));
    }
    return s;
}

} // namespace harmonic
