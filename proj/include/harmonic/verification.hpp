#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace harmonic {

// Outcome of one numerical check family.
struct SuiteResult {
    std::string name;
    bool passed = true;
    // Informational suites are reported but never fail a run.
    bool informational = false;
    std::size_t cases = 0;
    double worst = 0.0;
    double tolerance = 0.0;
    std::string worst_case;
    std::string note;

    void observe(double error, const std::string& label);
};

struct LappedOptions {
    int max_n = 32;
    std::vector<int> zs{-3, 0, 5};
    int trials = 20;
    double tol = 1e-12;
    double shift_tol = 1e-10;
    std::uint64_t seed = 7;
};

// Phase form and shifted-cosine form of the sine transform, for 2 <= N <= max_n, 1 <= k < N.
SuiteResult verify_phase_suite(const LappedOptions& options);
SuiteResult verify_shifted_cosine_suite(const LappedOptions& options);
// Integer divisibility predicate for delta against exact rational reduction, z in [-10, 10],
// k in [1, 2N].
SuiteResult verify_delta_integrality_suite(const LappedOptions& options);
// Window-shift identity on periodic signals, even k, integral delta.
SuiteResult verify_window_shift_suite(const LappedOptions& options);
// Same measurement for odd k (not an identity; reported only).
SuiteResult measure_odd_window_shift(const LappedOptions& options);

struct EquivalenceOptions {
    int configs = 50;
    std::uint64_t seed = 11;
    double tol_f32 = 1e-4;
    double tol_f64 = 1e-10;
};

// Expanded vs folded block: forward output, weight gradient and input gradient, f32 and f64.
std::vector<SuiteResult> verify_equivalence_suites(const EquivalenceOptions& options);

struct GradientOptions {
    double layer_tol = 1e-6;
    double model_tol = 1e-4;
    std::uint64_t seed = 5;
    // Coordinates sampled per tensor of the full model check.
    std::size_t model_samples = 6;
    // Smaller than the layer step: with a wider one some of the many ReLU inputs of the full
    // network cross zero, which breaks the central difference rather than the gradient.
    double model_step = 1e-6;
    bool include_model = true;
};

// One suite per layer kind, then the full MNIST-shaped model.
std::vector<SuiteResult> verify_gradient_suites(const GradientOptions& options);

// Reference-loop multiply-add counts against the analytic cost model and the overhead ratios.
SuiteResult verify_cost_suite();

} // namespace harmonic
