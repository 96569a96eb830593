// Runs every acceptance criterion and prints one PASS/FAIL line each.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "harmonic/dct_basis.hpp"
#include "harmonic/experiments.hpp"
#include "harmonic/lapped_dct.hpp"
#include "harmonic/verification.hpp"
#include "oracles.hpp"

using namespace harmonic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

using Check = std::function<Outcome()>;

std::string describe(const SuiteResult& s) {
    return fmt::format("{} worst {:.3e} (tol {:.0e}, {} cases)", s.name, s.worst, s.tolerance, s.cases);
}

Outcome all_pass(const std::vector<SuiteResult>& suites) {
    Outcome o{true, {}};
    for (const auto& s : suites) {
        if (!s.informational && !s.passed) {
            o.passed = false;
        }
        if (!o.detail.empty()) {
            o.detail += "; ";
        }
        o.detail += (s.informational ? "[info] " : (s.passed ? "" : "[FAIL] ")) + describe(s);
    }
    return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every psi has unit L1 norm and distinct raw filters are orthogonal.
Outcome basis() {
    double worst_norm = 0.0, worst_dot = 0.0;
    for (int k : {2, 3, 4, 8}) {
        const FilterBank bank = build_basis(k);
        const auto& pairs = bank.zigzag();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            double l1 = 0.0;
            for (double v : bank.psi(pairs[i])) {
                l1 += std::abs(v);
            }
            worst_norm = std::max(worst_norm, std::abs(l1 - 1.0));
            for (std::size_t j = i + 1; j < pairs.size(); ++j) {
                const auto a = bank.phi(pairs[i]);
                const auto b = bank.phi(pairs[j]);
                double d = 0.0;
                for (std::size_t t = 0; t < a.size(); ++t) {
                    d += a[t] * b[t];
                }
                worst_dot = std::max(worst_dot, std::abs(d));
            }
        }
    }
    return {worst_norm <= 1e-12 && worst_dot < 1e-9,
            fmt::format("K in {{2,3,4,8}}: max |L1-1| = {:.2e} (tol 1e-12), max |<phi,phi'>| = {:.2e} "
                        "(tol 1e-9)",
                        worst_norm, worst_dot)};
}

Outcome equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    const EquivalenceOptions opt;  // 50 configs, 1e-4 f32, 1e-10 f64
    Outcome o = all_pass(verify_equivalence_suites(opt));
    const double elapsed = seconds_since(t0);
    o.passed = o.passed && elapsed < 60.0;
    o.detail += fmt::format("; {} configs in {:.1f} s (limit 60 s)", opt.configs, elapsed);
    return o;
}

Outcome gradient() {
    GradientOptions opt;  // layers 1e-6, full model 1e-4
    return all_pass(verify_gradient_suites(opt));
}

Outcome lapped() {
    LappedOptions opt;  // N <= 32, z in {-3,0,5}, 1e-12 and 1e-10
    std::vector<SuiteResult> suites{verify_phase_suite(opt), verify_shifted_cosine_suite(opt),
                                    verify_delta_integrality_suite(opt),
                                    verify_window_shift_suite(opt), measure_odd_window_shift(opt)};
    Outcome o = all_pass(suites);
    // the smallest worked example, checked on its own
    Rng rng(1);
    const double err = verify_window_shift(4, 2, 0, periodic_signal(4, 64, rng));
    o.passed = o.passed && shift_delta(4, 2, 0) == Rational(1, 1) && err < 1e-10;
    o.detail += fmt::format("; (N=4,k=2,z=0,delta=1) error {:.2e}", err);
    return o;
}

Outcome cost() {
    return all_pass({verify_cost_suite()});
}

// Peak live activations and wall time of the two algorithms for N=M=64, K=3 on 32x32 inputs.
Outcome table1() {
    HarmonicBlockSpec spec;
    spec.in_channels = 64;
    spec.out_channels = 64;
    spec.kernel = 3;
    spec.padding = 1;
    const FilterBank bank = build_basis(3);
    Rng rng(3);
    const auto w = harmonic::testing::random_tensor<float>(spec.weight_shape(), rng);
    const auto x = harmonic::testing::random_tensor<float>({8, 64, 32, 32}, rng);
    ActivationMeter m1, m2;
    harmonic_forward_expanded(spec, bank, w, x, Mode::train, &m1);
    harmonic_forward_folded(spec, bank, w, x, &m2);
    std::vector<double> t1, t2;
    for (int rep = 0; rep < 5; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        harmonic_forward_expanded(spec, bank, w, x);
        t1.push_back(seconds_since(t0));
        t0 = std::chrono::steady_clock::now();
        harmonic_forward_folded(spec, bank, w, x);
        t2.push_back(seconds_since(t0));
    }
    const double w1 = median(t1), w2 = median(t2);
    return {m1.peak > m2.peak && w1 > w2,
            fmt::format("batch 8: peak elems alg1 {} vs alg2 {}; median wall alg1 {:.1f} ms vs alg2 "
                        "{:.1f} ms",
                        m1.peak, m2.peak, 1e3 * w1, 1e3 * w2)};
}

fs::path data_root() {
    return default_data_root();
}

bool mnist_present() {
    try {
        mnist_files(data_root(), true);
        mnist_files(data_root(), false);
        return true;
    } catch (const Error&) {
        return false;
    }
}

Outcome mnist() {
    if (!mnist_present()) {
        return {false, "MNIST not found under " + data_root().string()};
    }
    Table2Options opt;
    opt.sizes = {300, 1000};
    opt.variants = {ModelVariant::conv, ModelVariant::harmonic};
    opt.seeds = 5;
    opt.base.data_dir = data_root().string();
    opt.base.eval_every = opt.base.epochs;  // only the final test error is used
    opt.runs_csv = "acceptance_mnist_runs.csv";
    opt.summary_csv = "acceptance_mnist_summary.csv";
    opt.verbose = true;
    const auto rows = run_table2(opt);
    auto med = [&](std::size_t size, ModelVariant v) {
        for (const auto& r : rows) {
            if (r.size == size && r.variant == v) {
                return r.median;
            }
        }
        return std::nan("");
    };
    const double h300 = med(300, ModelVariant::harmonic), c300 = med(300, ModelVariant::conv);
    const double h1k = med(1000, ModelVariant::harmonic), c1k = med(1000, ModelVariant::conv);
    const bool ok = h300 <= 5.0 && h1k <= 2.6 && h300 <= c300 && h1k <= c1k;
    return {ok, fmt::format("median test error over 5 seeds: n=300 harmonic {:.2f}% (limit 5.0) conv "
                            "{:.2f}%; n=1000 harmonic {:.2f}% (limit 2.6) conv {:.2f}%",
                            h300, c300, h1k, c1k)};
}

bool cifar_present() {
    try {
        cifar10_files(data_root(), true);
        cifar10_files(data_root(), false);
        return true;
    } catch (const Error&) {
        return false;
    }
}

Outcome stridesweep() {
    if (!cifar_present()) {
        return {false, "CIFAR-10 binary batches not found under " + data_root().string() +
                           "; the sweep could not be run"};
    }
    StrideSweepOptions opt;
    opt.kernel = 4;
    opt.seeds = 5;
    opt.strides = {1, 4};
    opt.base.lr = 0.01;
    opt.base.lr_schedule = {{15, 0.1}};
    opt.base.weight_decay = 0.0005;
    opt.base.train_size = 0;
    opt.base.data_dir = data_root().string();
    opt.base.eval_every = opt.base.epochs;
    opt.verbose = true;
    auto cell = [](const std::vector<SweepCell>& cells, std::size_t stride, int t) {
        for (const auto& c : cells) {
            if (c.stride == stride && c.truncate == t) {
                return c.mean;
            }
        }
        return std::nan("");
    };
    opt.mode = ShallowMode::replicate;
    opt.truncations = {16};
    opt.summary_csv = "acceptance_sweep_replicate.csv";
    const auto rep = run_stride_sweep(opt);
    opt.mode = ShallowMode::balanced;
    opt.truncations = {3, 16};
    opt.summary_csv = "acceptance_sweep_balanced.csv";
    const auto bal = run_stride_sweep(opt);
    const double r1 = cell(rep, 1, 16), r4 = cell(rep, 4, 16);
    const double b1 = cell(bal, 1, 16), b4 = cell(bal, 4, 16);
    const double b1t = cell(bal, 1, 3), b4t = cell(bal, 4, 3);
    const bool ok = r1 - r4 >= 2.0 && std::abs(b1 - b4) <= 2.0 && (b4 - b4t) > (b1 - b1t);
    return {ok, fmt::format("replicate full: s1 {:.2f} s4 {:.2f}; balanced full: s1 {:.2f} s4 {:.2f}; "
                            "balanced T=3 drop: s1 {:.2f} s4 {:.2f}",
                            r1, r4, b1, b4, b1 - b1t, b4 - b4t)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Tiny MNIST-format files for when the real dataset is absent.
void write_synthetic_mnist(const fs::path& root) {
    fs::create_directories(root / "mnist");
    Rng rng(9);
    for (const std::string split : {"train", "t10k"}) {
        RawImages raw;
        raw.rows = 28;
        raw.cols = 28;
        for (int i = 0; i < 300; ++i) {
            raw.labels.push_back(i % 10);
            for (int p = 0; p < 784; ++p) {
                raw.pixels.push_back(static_cast<std::uint8_t>(rng.below(256)));
            }
        }
        write_mnist_idx(raw, root / "mnist" / (split + "-images-idx3-ubyte"),
                        root / "mnist" / (split + "-labels-idx1-ubyte"));
    }
}

Outcome determinism() {
    harmonic::testing::TempDir dir("determinism");
    fs::path root = data_root();
    std::string source = "MNIST";
    if (!mnist_present()) {
        write_synthetic_mnist(dir.path());
        root = dir.path();
        source = "synthetic MNIST-format data";
    }
    Outcome o{true, {}};
    for (const char* model : {"harmonic", "separable", "conv"}) {
        std::string first;
        for (int run = 0; run < 2; ++run) {
            TrainConfig cfg;
            cfg.model = model;
            cfg.alg = 2;
            cfg.epochs = 3;
            cfg.seed = 13;
            cfg.train_size = 300;
            cfg.test_size = 1000;
            cfg.data_dir = root.string();
            cfg.metrics_path = (dir / fmt::format("{}_{}.csv", model, run)).string();
            run_training(cfg);
            const std::string bytes = slurp(cfg.metrics_path);
            if (run == 0) {
                first = bytes;
            } else if (bytes != first || bytes.empty()) {
                o.passed = false;
            }
        }
        o.detail += fmt::format("{}{}: {}", o.detail.empty() ? "" : "; ", model,
                                o.passed ? "identical CSV" : "CSV differs");
    }
    o.detail += " (3 epochs, seed 13, " + source + ")";
    return o;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, Check>> criteria{
        {"basis", basis},   {"equivalence", equivalence}, {"gradient", gradient},
        {"lapped", lapped}, {"cost", cost},               {"table1", table1},
        {"mnist", mnist},   {"stridesweep", stridesweep}, {"determinism", determinism},
    };
    std::vector<std::string> names;
    for (const auto& c : criteria) {
        names.push_back(c.first);
    }

    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> only;
    app.add_option("--only", only, "Run only these criteria")->check(CLI::IsMember(names));
    CLI11_PARSE(app, argc, argv);

    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        fmt::print("{} {}: {} [{:.1f} s]\n", o.passed ? "PASS" : "FAIL", name, o.detail,
                   seconds_since(t0));
        std::fflush(stdout);
        failed += o.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
