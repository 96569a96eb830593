#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "harmonic/dct_basis.hpp"
#include "harmonic/layers.hpp"
#include "harmonic/ops.hpp"
#include "harmonic/rational.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

// Expanded: DCT responses z are materialized, optionally normalized, then recombined by a 1x1
// convolution. Folded: the weights are first merged with the basis into ordinary K x K filters
// and applied as one convolution. Folding is only valid for linear blocks (no normalization).
enum class HarmonicAlgorithm : std::uint8_t { expanded = 1, folded = 2 };

HarmonicAlgorithm parse_algorithm(int value);

// Which basis filters a block may use. Excluded filters keep their weights pinned at zero.
struct FilterSelection {
    enum class Kind : std::uint8_t { full, lambda, truncate };

    Kind kind = Kind::full;
    int value = 0;

    static FilterSelection full() { return {}; }
    static FilterSelection lambda(int l) { return {Kind::lambda, l}; }
    static FilterSelection truncate(int t) { return {Kind::truncate, t}; }

    std::vector<FrequencyPair> pairs(const FilterBank& bank) const;
    std::string str() const;
};

struct HarmonicBlockSpec {
    std::size_t in_channels = 1;   // N
    std::size_t out_channels = 1;  // M
    std::size_t kernel = 3;        // K
    std::size_t stride = 1;
    std::size_t padding = 0;
    FilterSelection selection;
    // Batch-normalize every DCT response (no affine terms) before recombination.
    bool normalize = false;

    void validate() const;
    Shape weight_shape() const { return {out_channels, in_channels, kernel, kernel}; }
    Shape output_shape(const Shape& input) const;
};

// [M,N,K,K] tensor of ones at selected (u,v), zeros elsewhere.
template <typename T>
Tensor<T> selection_mask(const HarmonicBlockSpec& spec, const FilterBank& bank);

// psi filters as convolution kernels [K*K, 1, K, K], filter index u*K + v.
template <typename T>
Tensor<T> basis_kernels(const FilterBank& bank);

// Depthwise stage: every basis filter applied to every input channel.
// input [B,N,H,W], basis [F,1,K,K] -> [B, N*F, H', W'], channel index n*F + f.
template <typename T>
Tensor<T> basis_responses(const Tensor<T>& input, const Tensor<T>& basis, std::size_t stride,
                          std::size_t padding);

template <typename T>
Conv2dGrads<T> basis_responses_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                                        const Tensor<T>& basis, std::size_t stride,
                                        std::size_t padding, bool need_input_grad = true);

// g[m,n] = sum_f w[m,n,f] * basis[f]; weights [M,N,K,K], basis [K*K,1,K,K] -> [M,N,K,K].
template <typename T>
Tensor<T> fold_filters(const Tensor<T>& weights, const Tensor<T>& basis);

template <typename T>
struct FoldGrads {
    Tensor<T> weights;
    Tensor<T> basis;
};

template <typename T>
FoldGrads<T> fold_filters_backward(const Tensor<T>& grad_folded, const Tensor<T>& weights,
                                   const Tensor<T>& basis);

// Tracks the largest activation tensor materialized by a forward pass.
struct ActivationMeter {
    std::size_t peak = 0;
    void observe(std::size_t elems) { peak = elems > peak ? elems : peak; }
};

// Merges weights with the DCT bank. Throws ValueError when spec.normalize is set.
template <typename T>
Tensor<T> fold_weights(const HarmonicBlockSpec& spec, const FilterBank& bank,
                       const Tensor<T>& weights);

// Stateless expanded pass. With spec.normalize, batch statistics are used in train mode;
// eval mode is rejected because there are no running statistics here (use HarmonicBlock).
template <typename T>
Tensor<T> harmonic_forward_expanded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                    const Tensor<T>& weights, const Tensor<T>& input,
                                    Mode mode = Mode::train, ActivationMeter* meter = nullptr);

template <typename T>
Tensor<T> harmonic_forward_folded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                  const Tensor<T>& weights, const Tensor<T>& input,
                                  ActivationMeter* meter = nullptr);

// Analytic multiply-add and memory accounting for one block over one batch.
//   standard conv : B*M*N*K^2*H'*W'
//   expanded      : + B*N*K^2*K^2*H'*W' for the basis stage; the combination costs the same as
//                   a standard conv, so overhead / standard = K^2 / M
//   folded        : + M*N*K^4 once per batch for the fold; relative to the conv cost of a
//                   single image this is K^2 / (H'*W'), i.e. K^2/(A*B) for same-size output
// Peak counts the largest single activation tensor (input, z for expanded, output).
struct CostReport {
    HarmonicAlgorithm algorithm = HarmonicAlgorithm::expanded;
    std::uint64_t madds = 0;
    std::uint64_t standard_conv_madds = 0;
    std::uint64_t overhead_madds = 0;
    Rational overhead_ratio;
    Rational ratio_vs_standard_conv;
    std::uint64_t peak_intermediate_elems = 0;
};

CostReport cost_report(const HarmonicBlockSpec& spec, const Shape& input_dims,
                       HarmonicAlgorithm algorithm);

struct MaddCounter {
    std::uint64_t count = 0;
};

// Plain nested-loop implementations that count every multiply-add, padded taps included.
// They double as output oracles for the vectorized paths.
Tensor<double> reference_conv2d(const Tensor<double>& input, const Tensor<double>& kernels,
                                std::size_t stride, std::size_t padding, MaddCounter& counter);
Tensor<double> reference_harmonic_expanded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                           const Tensor<double>& weights,
                                           const Tensor<double>& input, MaddCounter& counter);
Tensor<double> reference_harmonic_folded(const HarmonicBlockSpec& spec, const FilterBank& bank,
                                         const Tensor<double>& weights,
                                         const Tensor<double>& input, MaddCounter& counter);

// Fixed DCT filters (harmonic block) or K*K learned spatial filters shared across input
// channels (depth-separable baseline). The recombination stage is identical.
enum class BasisKind : std::uint8_t { dct, learned };

template <typename T>
class HarmonicBlock final : public Layer<T> {
public:
    HarmonicBlock(HarmonicBlockSpec spec, HarmonicAlgorithm algorithm, Rng& rng,
                  BasisKind basis = BasisKind::dct);

    LayerKind kind() const override {
        return basis_kind_ == BasisKind::dct ? LayerKind::harmonic : LayerKind::separable;
    }
    Shape output_shape(const Shape& input) const override { return spec_.output_shape(input); }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& upstream) override;
    std::vector<Parameter<T>*> parameters() override;
    std::vector<Parameter<T>*> buffers() override;
    std::string describe() const override;

    const HarmonicBlockSpec& spec() const noexcept { return spec_; }
    BasisKind basis_kind() const noexcept { return basis_kind_; }
    // Normalized blocks always run expanded.
    HarmonicAlgorithm algorithm() const noexcept;
    void set_algorithm(HarmonicAlgorithm algorithm);

    Parameter<T>& weights() { return weights_; }
    // Learned filters of a separable block, or the frozen DCT filters.
    const Tensor<T>& basis() const { return basis_.value; }
    const FilterBank& bank() const { return bank_; }

    // Number of times folded filters were rebuilt; eval passes reuse them until weights change.
    std::size_t fold_count() const noexcept { return fold_count_; }

private:
    const Tensor<T>& folded_filters(Mode mode);

    HarmonicBlockSpec spec_;
    HarmonicAlgorithm algorithm_;
    BasisKind basis_kind_;
    FilterBank bank_;
    Parameter<T> weights_;
    Parameter<T> basis_;
    Parameter<T> running_mean_;
    Parameter<T> running_var_;

    // forward caches
    Mode mode_ = Mode::train;
    HarmonicAlgorithm last_path_ = HarmonicAlgorithm::expanded;
    Tensor<T> input_;
    Tensor<T> responses_;  // z after optional normalization (expanded)
    BatchNormCache<T> bn_cache_;
    Tensor<T> folded_;
    std::uint64_t folded_weights_version_ = UINT64_MAX;
    std::uint64_t folded_basis_version_ = UINT64_MAX;
    bool folded_valid_ = false;
    std::size_t fold_count_ = 0;
};

} // namespace harmonic
