#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "harmonic/tensor.hpp"

namespace harmonic {

// A trainable tensor with its gradient and optimizer state. Non-trainable instances hold layer
// state that must survive checkpoints (batch-norm running statistics).
template <typename T>
struct Parameter {
    Parameter() = default;
    Parameter(std::string name_, Tensor<T> value_, bool trainable_ = true)
        : name(std::move(name_)),
          value(std::move(value_)),
          grad(value.dims()),
          momentum_buffer(value.dims()),
          trainable(trainable_) {}

    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> momentum_buffer;
    // Empty, or a 0/1 tensor shaped like value; zero entries are pinned at zero.
    Tensor<T> mask;
    bool trainable = true;
    // Bumped on every in-place update so dependent caches can tell they are stale.
    std::uint64_t version = 0;

    void zero_grad() { grad.fill(T(0)); }
    void touch() noexcept { ++version; }
    bool has_mask() const noexcept { return !mask.empty(); }
    bool frozen(std::size_t i) const noexcept { return has_mask() && mask[i] == T(0); }

    void set_mask(Tensor<T> m) {
        if (m.dims() != value.dims()) {
            throw ShapeError("mask " + shape_str(m.dims()) + " does not match parameter " + name);
        }
        mask = std::move(m);
        apply_mask();
    }

    // Zeroes value, grad and momentum at frozen coordinates.
    void apply_mask() {
        if (!has_mask()) {
            return;
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (mask[i] == T(0)) {
                value[i] = T(0);
                grad[i] = T(0);
                momentum_buffer[i] = T(0);
            }
        }
        touch();
    }
};

} // namespace harmonic
