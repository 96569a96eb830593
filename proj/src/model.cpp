#include "harmonic/model.hpp"

#include <string>

namespace harmonic {

template <typename T>
Layer<T>& ModelGraph<T>::add(std::unique_ptr<Layer<T>> layer) {
    const std::string prefix =
        std::to_string(layers_.size()) + "." + std::string(layer_kind_name(layer->kind())) + ".";
    for (Parameter<T>* p : layer->parameters()) {
        p->name = prefix + p->name;
    }
    for (Parameter<T>* p : layer->buffers()) {
        p->name = prefix + p->name;
    }
    layers_.push_back(std::move(layer));
    return *layers_.back();
}

template <typename T>
Tensor<T> ModelGraph<T>::forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i]->forward(h, mode);
        if (!h.all_finite()) {
            throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                               std::string(layer_kind_name(layers_[i]->kind())) + ")");
        }
    }
    return h;
}

template <typename T>
double ModelGraph<T>::forward_loss(const Tensor<T>& x, std::span<const int> labels, Mode mode) {
    const Tensor<T> logits = forward(x, mode);
    auto result = softmax_xent_forward(logits, labels);
    probabilities_ = std::move(result.probabilities);
    labels_.assign(labels.begin(), labels.end());
    return result.loss;
}

template <typename T>
Tensor<T> ModelGraph<T>::backward() {
    if (probabilities_.empty()) {
        throw ValueError("backward() before forward_loss()");
    }
    return backward(softmax_xent_backward(probabilities_, labels_));
}

template <typename T>
Tensor<T> ModelGraph<T>::backward(const Tensor<T>& logits_grad) {
    Tensor<T> g = logits_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = layers_[i]->backward(g);
        if (!g.all_finite()) {
            throw NumericError("non-finite gradient entering layer " + std::to_string(i) + " (" +
                               std::string(layer_kind_name(layers_[i]->kind())) + ")");
        }
    }
    return g;
}

template <typename T>
std::vector<Parameter<T>*> ModelGraph<T>::parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& layer : layers_) {
        for (Parameter<T>* p : layer->parameters()) {
            out.push_back(p);
        }
    }
    return out;
}

template <typename T>
std::vector<Parameter<T>*> ModelGraph<T>::buffers() {
    std::vector<Parameter<T>*> out;
    for (auto& layer : layers_) {
        for (Parameter<T>* p : layer->buffers()) {
            out.push_back(p);
        }
    }
    return out;
}

template <typename T>
std::vector<Parameter<T>*> ModelGraph<T>::state() {
    auto out = parameters();
    for (Parameter<T>* p : buffers()) {
        out.push_back(p);
    }
    return out;
}

template <typename T>
void ModelGraph<T>::zero_grad() {
    for (Parameter<T>* p : parameters()) {
        p->zero_grad();
    }
}

template <typename T>
std::size_t ModelGraph<T>::parameter_count() {
    std::size_t n = 0;
    for (Parameter<T>* p : parameters()) {
        n += p->value.size();
    }
    return n;
}

template <typename T>
std::vector<LayerKind> ModelGraph<T>::topology() const {
    std::vector<LayerKind> out;
    out.reserve(layers_.size() + 1);
    for (const auto& layer : layers_) {
        out.push_back(layer->kind());
    }
    out.push_back(LayerKind::softmax_xent);
    return out;
}

template <typename T>
std::vector<Shape> ModelGraph<T>::trace_shapes(const Shape& input) const {
    std::vector<Shape> out;
    Shape s = input;
    for (const auto& layer : layers_) {
        s = layer->output_shape(s);
        out.push_back(s);
    }
    return out;
}

template class ModelGraph<float>;
template class ModelGraph<double>;

} // namespace harmonic
