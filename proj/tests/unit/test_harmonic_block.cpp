#include <cmath>

#include <gtest/gtest.h>

#include "harmonic/harmonic_block.hpp"
#include "harmonic/optimizer.hpp"
#include "oracles.hpp"

using namespace harmonic;
using harmonic::testing::direct_conv;
using harmonic::testing::random_tensor;

namespace {

HarmonicBlockSpec make_spec(std::size_t n, std::size_t m, std::size_t k, std::size_t stride = 1,
                            std::size_t pad = 0) {
    HarmonicBlockSpec s;
    s.in_channels = n;
    s.out_channels = m;
    s.kernel = k;
    s.stride = stride;
    s.padding = pad;
    return s;
}

} // namespace

TEST(HarmonicBlock, DcOnlyIsBoxMean) {
    Rng rng(1);
    const auto spec = make_spec(1, 1, 3);
    const FilterBank bank = build_basis(3);
    Tensor<double> w(spec.weight_shape());
    w[0] = 1.0;
    const auto x = random_tensor<double>({2, 1, 6, 6}, rng);
    const auto y = harmonic_forward_expanded(spec, bank, w, x);
    ASSERT_EQ(y.dims(), (Shape{2, 1, 4, 4}));
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < 3; ++p) {
                    for (std::size_t q = 0; q < 3; ++q) {
                        s += x(b, 0, i + p, j + q);
                    }
                }
                EXPECT_NEAR(y(b, 0, i, j), s / 9.0, 1e-14);
            }
        }
    }
}

TEST(HarmonicBlock, ExpandedEqualsFolded) {
    Rng rng(2);
    const FilterBank bank = build_basis(3);
    for (std::size_t pad : {0, 1}) {
        const auto spec = make_spec(3, 4, 3, 1, pad);
        const auto w = random_tensor<double>(spec.weight_shape(), rng);
        const auto x = random_tensor<double>({2, 3, 8, 8}, rng);
        const auto a = harmonic_forward_expanded(spec, bank, w, x);
        const auto b = harmonic_forward_folded(spec, bank, w, x);
        EXPECT_LT(max_rel_diff(a, b), 1e-10);
        // folded form is a plain convolution with the merged filters
        EXPECT_LT(max_abs_diff(b, direct_conv(x, fold_weights(spec, bank, w), 1, pad)), 1e-12);
    }
}

TEST(HarmonicBlock, EquivalenceOverRandomConfigsF32) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 3 + rng.below(2);
        auto spec = make_spec(1 + rng.below(8), 1 + rng.below(8), k, 1 + rng.below(2), rng.below(2));
        if (trial % 3 == 0) {
            spec.selection = FilterSelection::lambda(1 + static_cast<int>(rng.below(2 * k - 1)));
        }
        const FilterBank bank = build_basis(static_cast<int>(k));
        auto w = random_tensor<float>(spec.weight_shape(), rng);
        const auto mask = selection_mask<float>(spec, bank);
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] *= mask[i];
        }
        const auto x = random_tensor<float>({2, spec.in_channels, 9, 9}, rng);
        EXPECT_LE(max_rel_diff(harmonic_forward_expanded(spec, bank, w, x),
                               harmonic_forward_folded(spec, bank, w, x)),
                  1e-4);
    }
}

// With a K x K input each response is a single value per sample, so identical samples have
// zero variance in every (n,u,v) channel.
TEST(HarmonicBlock, NormalizedIdenticalSamplesGiveZero) {
    Rng rng(4);
    auto spec = make_spec(2, 3, 3);
    spec.normalize = true;
    const FilterBank bank = build_basis(3);
    const auto one = random_tensor<double>({1, 2, 3, 3}, rng);
    Tensor<double> x({4, 2, 3, 3});
    for (std::size_t b = 0; b < 4; ++b) {
        std::copy(one.values().begin(), one.values().end(), x.data() + b * one.size());
    }
    const auto w = random_tensor<double>(spec.weight_shape(), rng);
    const auto y = harmonic_forward_expanded(spec, bank, w, x);
    ASSERT_EQ(y.dims(), (Shape{4, 3, 1, 1}));
    for (double v : y.values()) {
        EXPECT_EQ(v, 0.0);
    }
    EXPECT_THROW(harmonic_forward_expanded(spec, bank, w, one), ValueError);
    EXPECT_THROW(fold_weights(spec, bank, w), ValueError);
}

TEST(Fold, OneHotSelectsBasisFilter) {
    const auto spec = make_spec(2, 2, 3);
    const FilterBank bank = build_basis(3);
    Tensor<double> w(spec.weight_shape());
    // m=1, n=0, (u,v)=(2,1)
    w(1, 0, 2, 1) = 1.0;
    const auto g = fold_weights(spec, bank, w);
    for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t y = 0; y < 3; ++y) {
            EXPECT_EQ(g(1, 0, x, y), bank.psi({2, 1}, x, y));
            EXPECT_EQ(g(0, 0, x, y), 0.0);
            EXPECT_EQ(g(1, 1, x, y), 0.0);
        }
    }
}

TEST(Fold, Linearity) {
    Rng rng(5);
    const auto spec = make_spec(3, 2, 4);
    const FilterBank bank = build_basis(4);
    const auto w1 = random_tensor<double>(spec.weight_shape(), rng);
    const auto w2 = random_tensor<double>(spec.weight_shape(), rng);
    const double a = 1.7, b = -0.4;
    Tensor<double> mix(spec.weight_shape());
    for (std::size_t i = 0; i < mix.size(); ++i) {
        mix[i] = a * w1[i] + b * w2[i];
    }
    const auto g1 = fold_weights(spec, bank, w1);
    const auto g2 = fold_weights(spec, bank, w2);
    const auto g = fold_weights(spec, bank, mix);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(g[i], a * g1[i] + b * g2[i], 1e-12);
    }
}

// Orthogonality of the basis makes the coefficients recoverable by projection.
TEST(Fold, CoefficientsRecoverableByProjection) {
    Rng rng(6);
    const auto spec = make_spec(2, 3, 3);
    const FilterBank bank = build_basis(3);
    const auto w = random_tensor<double>(spec.weight_shape(), rng);
    const auto g = fold_weights(spec, bank, w);
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t n = 0; n < 2; ++n) {
            for (const auto& f : bank.zigzag()) {
                const auto psi = bank.psi(f);
                double num = 0.0, den = 0.0;
                for (std::size_t t = 0; t < 9; ++t) {
                    num += g[(m * 2 + n) * 9 + t] * psi[t];
                    den += psi[t] * psi[t];
                }
                EXPECT_NEAR(num / den, w(m, n, static_cast<std::size_t>(f.u), static_cast<std::size_t>(f.v)),
                            1e-9);
            }
        }
    }
}

TEST(Fold, ZeroWeightsGiveZeroOutput) {
    const auto spec = make_spec(2, 3, 3, 1, 1);
    const FilterBank bank = build_basis(3);
    Rng rng(7);
    const auto x = random_tensor<double>({1, 2, 5, 5}, rng);
    const auto y = harmonic_forward_folded(spec, bank, Tensor<double>(spec.weight_shape()), x);
    for (double v : y.values()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(HarmonicBlock, GradientsAgreeAcrossAlgorithms) {
    Rng data(8);
    for (std::size_t stride : {1, 2}) {
        auto spec = make_spec(3, 4, 3, stride, 1);
        spec.selection = FilterSelection::lambda(3);
        Rng r1(9), r2(9);
        HarmonicBlock<double> expanded(spec, HarmonicAlgorithm::expanded, r1);
        HarmonicBlock<double> folded(spec, HarmonicAlgorithm::folded, r2);
        ASSERT_EQ(expanded.weights().value, folded.weights().value);
        const auto x = random_tensor<double>({2, 3, 7, 7}, data);
        const auto ya = expanded.forward(x, Mode::train);
        const auto yb = folded.forward(x, Mode::train);
        EXPECT_LT(max_rel_diff(ya, yb), 1e-10);
        const auto up = random_tensor<double>(ya.dims(), data);
        expanded.weights().zero_grad();
        folded.weights().zero_grad();
        const auto ga = expanded.backward(up);
        const auto gb = folded.backward(up);
        EXPECT_LT(max_abs_diff(expanded.weights().grad, folded.weights().grad), 1e-8);
        EXPECT_LT(max_rel_diff(ga, gb), 1e-10);
    }
}

TEST(HarmonicBlock, HomogeneityAndStrideConsistency) {
    Rng rng(10);
    const FilterBank bank = build_basis(4);
    const auto spec1 = make_spec(2, 3, 4, 1, 0);
    const auto spec2 = make_spec(2, 3, 4, 2, 0);
    const auto w = random_tensor<double>(spec1.weight_shape(), rng);
    auto x = random_tensor<double>({1, 2, 10, 10}, rng);
    const auto y = harmonic_forward_expanded(spec1, bank, w, x);
    Tensor<double> x3 = x;
    for (auto& v : x3.values()) {
        v *= 3.0;
    }
    const auto y3 = harmonic_forward_expanded(spec1, bank, w, x3);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_NEAR(y3[i], 3.0 * y[i], 1e-12);
    }
    const auto full = harmonic_forward_folded(spec1, bank, w, x);
    const auto strided = harmonic_forward_folded(spec2, bank, w, x);
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t i = 0; i < strided.dim(2); ++i) {
            for (std::size_t j = 0; j < strided.dim(3); ++j) {
                EXPECT_NEAR(strided(0, m, i, j), full(0, m, 2 * i, 2 * j), 1e-12);
            }
        }
    }
}

TEST(HarmonicBlock, ExcludedWeightsStayZeroUnderTraining) {
    auto spec = make_spec(2, 3, 3, 1, 1);
    spec.selection = FilterSelection::truncate(4);
    Rng rng(11);
    HarmonicBlock<double> block(spec, HarmonicAlgorithm::folded, rng);
    const auto mask = selection_mask<double>(spec, block.bank());
    std::vector<Parameter<double>*> params = block.parameters();
    for (int step = 0; step < 10; ++step) {
        const auto x = random_tensor<double>({2, 2, 5, 5}, rng);
        const auto y = block.forward(x, Mode::train);
        for (auto* p : params) {
            p->zero_grad();
        }
        block.backward(random_tensor<double>(y.dims(), rng));
        sgd_step<double>(params, SgdOptions{0.1, 0.9, true, 0.01});
    }
    const auto& w = block.weights().value;
    std::size_t active = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (mask[i] == 0.0) {
            EXPECT_EQ(w[i], 0.0);
        } else {
            ++active;
        }
    }
    EXPECT_EQ(active, 2u * 3u * 4u);
}

TEST(HarmonicBlock, EvalReusesFoldedFilters) {
    const auto spec = make_spec(2, 2, 3, 1, 1);
    Rng rng(12);
    HarmonicBlock<float> block(spec, HarmonicAlgorithm::folded, rng);
    const auto x = random_tensor<float>({1, 2, 4, 4}, rng);
    block.forward(x, Mode::eval);
    block.forward(x, Mode::eval);
    EXPECT_EQ(block.fold_count(), 1u);
    block.weights().value[0] += 1.0f;
    block.weights().touch();
    block.forward(x, Mode::eval);
    EXPECT_EQ(block.fold_count(), 2u);
    block.forward(x, Mode::train);
    block.forward(x, Mode::train);
    EXPECT_EQ(block.fold_count(), 4u);
}

TEST(HarmonicBlock, NormalizedBlockRunsExpanded) {
    auto spec = make_spec(1, 2, 3);
    spec.normalize = true;
    Rng rng(13);
    HarmonicBlock<double> block(spec, HarmonicAlgorithm::folded, rng);
    EXPECT_EQ(block.algorithm(), HarmonicAlgorithm::expanded);
}

TEST(HarmonicBlock, SpecValidation) {
    auto spec = make_spec(0, 2, 3);
    EXPECT_THROW(spec.validate(), ValueError);
    spec = make_spec(1, 1, 3);
    spec.selection = FilterSelection::truncate(10);
    EXPECT_THROW(spec.validate(), ValueError);
    const FilterBank bank = build_basis(3);
    const Tensor<double> w(make_spec(2, 1, 3).weight_shape());
    EXPECT_THROW(harmonic_forward_folded(make_spec(2, 1, 3), bank, w, Tensor<double>({1, 3, 5, 5})),
                 ShapeError);
}

TEST(Cost, OverheadExamples) {
    const auto a1 = cost_report(make_spec(8, 16, 3, 1, 1), {2, 8, 32, 32}, HarmonicAlgorithm::expanded);
    EXPECT_EQ(a1.overhead_ratio, Rational(9, 16));
    EXPECT_DOUBLE_EQ(a1.overhead_ratio.value(), 0.5625);
    const auto a2 = cost_report(make_spec(8, 16, 3, 1, 1), {2, 8, 32, 32}, HarmonicAlgorithm::folded);
    EXPECT_EQ(a2.overhead_ratio, Rational(9, 1024));
    EXPECT_NEAR(a2.overhead_ratio.value(), 0.00879, 1e-5);
}

TEST(Cost, ExpandedPeakDominatesWhenResponsesAreWide) {
    for (std::size_t n : {1, 4, 64}) {
        for (std::size_t m : {1, 8, 64}) {
            const auto spec = make_spec(n, m, 3, 1, 1);
            const Shape in{2, n, 16, 16};
            const auto e = cost_report(spec, in, HarmonicAlgorithm::expanded);
            const auto f = cost_report(spec, in, HarmonicAlgorithm::folded);
            if (n * 9 > std::max(n, m)) {
                EXPECT_GT(e.peak_intermediate_elems, f.peak_intermediate_elems);
            }
        }
    }
}

TEST(Cost, ReferenceLoopsMatchAnalyticCounts) {
    Rng rng(14);
    const FilterBank bank = build_basis(3);
    for (std::size_t pad : {0, 1}) {
        for (std::size_t stride : {1, 2}) {
            const auto spec = make_spec(2, 5, 3, stride, pad);
            const auto x = random_tensor<double>({2, 2, 7, 7}, rng);
            const auto w = random_tensor<double>(spec.weight_shape(), rng);
            MaddCounter ce, cf;
            const auto ye = reference_harmonic_expanded(spec, bank, w, x, ce);
            const auto yf = reference_harmonic_folded(spec, bank, w, x, cf);
            EXPECT_EQ(ce.count, cost_report(spec, x.dims(), HarmonicAlgorithm::expanded).madds);
            EXPECT_EQ(cf.count, cost_report(spec, x.dims(), HarmonicAlgorithm::folded).madds);
            EXPECT_LT(max_abs_diff(ye, harmonic_forward_expanded(spec, bank, w, x)), 1e-12);
            EXPECT_LT(max_abs_diff(yf, harmonic_forward_folded(spec, bank, w, x)), 1e-12);
        }
    }
}

TEST(Separable, LearnedFiltersAreTrainable) {
    const auto spec = make_spec(2, 3, 3, 1, 1);
    Rng rng(15);
    HarmonicBlock<double> dct(spec, HarmonicAlgorithm::expanded, rng);
    HarmonicBlock<double> sep(spec, HarmonicAlgorithm::expanded, rng, BasisKind::learned);
    EXPECT_EQ(dct.parameters().size(), 1u);
    EXPECT_EQ(sep.parameters().size(), 2u);
    EXPECT_EQ(sep.basis().dims(), (Shape{9, 1, 3, 3}));
    EXPECT_EQ(sep.kind(), LayerKind::separable);
}
