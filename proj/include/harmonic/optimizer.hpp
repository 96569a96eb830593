#pragma once

#include <span>

#include "harmonic/parameter.hpp"

namespace harmonic {

struct SgdOptions {
    double lr = 0.01;
    double momentum = 0.0;
    bool nesterov = false;
    double weight_decay = 0.0;
};

// Classical SGD with L2 weight decay folded into the gradient:
//   g   <- grad + weight_decay * value
//   buf <- momentum * buf + g
//   value <- value - lr * (g + momentum * buf)   (nesterov)
//   value <- value - lr * buf                    (otherwise)
// Non-trainable parameters are skipped; masked coordinates stay at zero.
template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, const SgdOptions& options);

} // namespace harmonic
