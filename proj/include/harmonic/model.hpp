#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "harmonic/layers.hpp"
#include "harmonic/ops.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

// Ordered sequence of differentiable layers ending in a softmax cross-entropy head.
// Reverse-mode differentiation walks the layers backwards, each using the activations it saved
// during forward().
template <typename T>
class ModelGraph {
public:
    ModelGraph() = default;
    ModelGraph(ModelGraph&&) noexcept = default;
    ModelGraph& operator=(ModelGraph&&) noexcept = default;

    // Parameter names become "<index>.<kind>.<local name>".
    Layer<T>& add(std::unique_ptr<Layer<T>> layer);

    template <typename L, typename... Args>
    L& emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        add(std::move(layer));
        return ref;
    }

    // Logits for a batch.
    Tensor<T> forward(const Tensor<T>& x, Mode mode);

    // Mean cross-entropy; remembers probabilities and labels for backward().
    double forward_loss(const Tensor<T>& x, std::span<const int> labels, Mode mode);

    // Backpropagates the last forward_loss; returns the gradient wrt the network input.
    Tensor<T> backward();
    // Backpropagates an explicit gradient wrt the logits.
    Tensor<T> backward(const Tensor<T>& logits_grad);

    const Tensor<T>& probabilities() const { return probabilities_; }

    std::vector<Parameter<T>*> parameters();
    std::vector<Parameter<T>*> buffers();
    // parameters() followed by buffers(); the checkpoint order.
    std::vector<Parameter<T>*> state();
    void zero_grad();
    std::size_t parameter_count();

    std::vector<LayerKind> topology() const;
    // Output shape after each layer for the given input shape.
    std::vector<Shape> trace_shapes(const Shape& input) const;

    std::size_t size() const noexcept { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
    const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

    // Builder description used to reconstruct the graph from a checkpoint.
    const std::string& arch() const noexcept { return arch_; }
    void set_arch(std::string arch) { arch_ = std::move(arch); }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    Tensor<T> probabilities_;
    std::vector<int> labels_;
    std::string arch_;
};

} // namespace harmonic
