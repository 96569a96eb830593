#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "harmonic/layers.hpp"
#include "harmonic/model.hpp"

namespace harmonic {

struct GradCheckOptions {
    // Coordinates sampled per tensor; 0 checks every coordinate.
    std::size_t samples_per_tensor = 0;
    std::uint64_t seed = 0;
    // Also compare the gradient wrt the network/layer input.
    bool check_input = false;
    // Central-difference step is step_scale * max(1, |theta|).
    double step_scale = 1e-5;
    // When a coordinate disagrees, retry with the step divided by 10 up to this many times and
    // keep the best agreement. Central differences are invalid when the step straddles a ReLU
    // kink; a wrong gradient disagrees at every step.
    int refine_steps = 0;
    Mode mode = Mode::train;
};

struct GradCheckEntry {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    // |analytic - numeric| / max(1, |analytic|, |numeric|)
    double error = 0.0;
};

struct GradCheckReport {
    bool passed = true;
    double tolerance = 0.0;
    std::size_t checked = 0;
    GradCheckEntry worst;
    std::vector<GradCheckEntry> failures;
};

// Compares backprop gradients of the model's mean cross-entropy against central differences.
// Masked (frozen) coordinates are skipped.
GradCheckReport grad_check(ModelGraph<double>& model, const Tensor<double>& input,
                           std::span<const int> labels, double tol,
                           const GradCheckOptions& options = {});

// Same check for a single layer with the scalar objective sum(r * layer(x)), r drawn from the
// options seed.
GradCheckReport grad_check_layer(Layer<double>& layer, const Tensor<double>& input, double tol,
                                 const GradCheckOptions& options = {});

} // namespace harmonic
