#include "harmonic/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "harmonic/rng.hpp"

namespace harmonic {

namespace {

std::vector<std::size_t> pick_coordinates(std::size_t size, std::size_t samples, Rng& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (samples == 0 || samples >= size) {
        return idx;
    }
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(samples);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

void record(GradCheckReport& report, std::string tensor, std::size_t index, double analytic,
            double numeric) {
    GradCheckEntry entry{std::move(tensor), index, analytic, numeric,
                         relative_error(analytic, numeric)};
    ++report.checked;
    if (report.checked == 1 || entry.error > report.worst.error) {
        report.worst = entry;
    }
    if (!(entry.error <= report.tolerance)) {
        report.passed = false;
        report.failures.push_back(std::move(entry));
    }
}

// Perturbs coordinates of `values` and compares the objective's central difference with
// `analytic`.
void check_tensor(GradCheckReport& report, const std::string& name, Tensor<double>& values,
                  const Tensor<double>& analytic, const Tensor<double>* mask,
                  const std::function<double()>& objective, const GradCheckOptions& options,
                  Rng& rng) {
    for (std::size_t i : pick_coordinates(values.size(), options.samples_per_tensor, rng)) {
        if (mask != nullptr && !mask->empty() && (*mask)[i] == 0.0) {
            continue;
        }
        const double original = values[i];
        double h = options.step_scale * std::max(1.0, std::abs(original));
        double best = 0.0;
        double best_error = 0.0;
        for (int attempt = 0; attempt <= options.refine_steps; ++attempt, h /= 10.0) {
            values[i] = original + h;
            const double plus = objective();
            values[i] = original - h;
            const double minus = objective();
            values[i] = original;
            const double numeric = (plus - minus) / (2.0 * h);
            const double error = relative_error(analytic[i], numeric);
            if (attempt == 0 || error < best_error) {
                best = numeric;
                best_error = error;
            }
            if (best_error <= report.tolerance) {
                break;
            }
        }
        record(report, name, i, analytic[i], best);
    }
}

} // namespace

GradCheckReport grad_check(ModelGraph<double>& model, const Tensor<double>& input,
                           std::span<const int> labels, double tol,
                           const GradCheckOptions& options) {
    GradCheckReport report;
    report.tolerance = tol;
    Rng rng(options.seed);

    model.zero_grad();
    model.forward_loss(input, labels, options.mode);
    const Tensor<double> input_grad = model.backward();

    std::vector<Tensor<double>> analytic;
    for (Parameter<double>* p : model.parameters()) {
        analytic.push_back(p->grad);
    }

    Tensor<double> probe = input;
    auto objective = [&]() { return model.forward_loss(probe, labels, options.mode); };
    const auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter<double>* p = params[k];
        check_tensor(report, p->name, p->value, analytic[k], &p->mask,
                     [&]() {
                         p->touch();
                         return objective();
                     },
                     options, rng);
        p->touch();
    }
    if (options.check_input) {
        check_tensor(report, "input", probe, input_grad, nullptr, objective, options, rng);
    }
    return report;
}

GradCheckReport grad_check_layer(Layer<double>& layer, const Tensor<double>& input, double tol,
                                 const GradCheckOptions& options) {
    GradCheckReport report;
    report.tolerance = tol;
    Rng rng(options.seed);

    const Shape out_dims = layer.output_shape(input.dims());
    Tensor<double> weights(out_dims);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] = rng.uniform(-1.0, 1.0);
    }

    for (Parameter<double>* p : layer.parameters()) {
        p->zero_grad();
    }
    layer.forward(input, options.mode);
    const Tensor<double> input_grad = layer.backward(weights);
    std::vector<Tensor<double>> analytic;
    for (Parameter<double>* p : layer.parameters()) {
        analytic.push_back(p->grad);
    }

    Tensor<double> probe = input;
    auto objective = [&]() {
        const Tensor<double> out = layer.forward(probe, options.mode);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            acc += weights[i] * out[i];
        }
        return acc;
    };
    const auto params = layer.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter<double>* p = params[k];
        check_tensor(report, p->name, p->value, analytic[k], &p->mask,
                     [&]() {
                         p->touch();
                         return objective();
                     },
                     options, rng);
        p->touch();
    }
    if (options.check_input) {
        check_tensor(report, "input", probe, input_grad, nullptr, objective, options, rng);
    }
    return report;
}

} // namespace harmonic
