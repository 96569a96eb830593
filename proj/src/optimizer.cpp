#include "harmonic/optimizer.hpp"

#include <string>

namespace harmonic {

template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, const SgdOptions& options) {
    if (!(options.lr > 0.0)) {
        throw ValueError("sgd_step: learning rate must be positive, got " +
                         std::to_string(options.lr));
    }
    if (options.momentum < 0.0 || options.weight_decay < 0.0) {
        throw ValueError("sgd_step: momentum and weight decay must be non-negative");
    }
    const T lr = static_cast<T>(options.lr);
    const T momentum = static_cast<T>(options.momentum);
    const T decay = static_cast<T>(options.weight_decay);
    for (Parameter<T>* p : params) {
        if (!p->trainable) {
            continue;
        }
        if (p->grad.dims() != p->value.dims() || p->momentum_buffer.dims() != p->value.dims()) {
            throw ShapeError("sgd_step: state of " + p->name + " does not match its value");
        }
        T* value = p->value.data();
        const T* grad = p->grad.data();
        T* buf = p->momentum_buffer.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            if (p->frozen(i)) {
                value[i] = T(0);
                buf[i] = T(0);
                continue;
            }
            const T g = grad[i] + decay * value[i];
            buf[i] = momentum * buf[i] + g;
            value[i] -= options.nesterov ? lr * (g + momentum * buf[i]) : lr * buf[i];
        }
        p->touch();
    }
}

template void sgd_step<float>(std::span<Parameter<float>* const>, const SgdOptions&);
template void sgd_step<double>(std::span<Parameter<double>* const>, const SgdOptions&);

} // namespace harmonic
