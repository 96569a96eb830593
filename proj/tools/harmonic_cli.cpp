// harmonic: command-line front end for the DCT filter bank, block verification, training and
// benchmarking.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "harmonic/dct_basis.hpp"
#include "harmonic/errors.hpp"
#include "harmonic/experiments.hpp"
#include "harmonic/harmonic_block.hpp"
#include "harmonic/rng.hpp"
#include "harmonic/verification.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace harmonic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct Common {
    bool json_output = false;
};

struct TrainArgs {
    std::string config;
    std::vector<std::string> overrides;
    bool verbose = false;
};

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                        TrainConfig base = {}) {
    TrainConfig cfg = path.empty() ? base : TrainConfig::from_file(path);
    for (const auto& o : overrides) {
        cfg.apply_override(o);
    }
    return cfg;
}

json suite_json(const SuiteResult& s) {
    return {{"name", s.name},           {"passed", s.passed},   {"informational", s.informational},
            {"cases", s.cases},         {"worst", s.worst},     {"tolerance", s.tolerance},
            {"worst_case", s.worst_case}, {"note", s.note}};
}

// --- filters ----------------------------------------------------------------------------

struct FiltersArgs {
    int size = 0;
    std::optional<int> lambda;
    std::optional<int> truncate;
    std::string out;
};

int run_filters(const FiltersArgs& a, const Common& c) {
    const FilterBank bank = build_basis(a.size);
    std::vector<FrequencyPair> subset = bank.zigzag();
    if (a.lambda) {
        subset = lambda_subset(bank, *a.lambda);
    } else if (a.truncate) {
        subset = truncation_prefix(bank, *a.truncate);
    }
    const FilterExport ex = export_filters(bank, subset, a.out);
    if (c.json_output) {
        json files = json::array();
        for (const auto& p : ex.images) {
            files.push_back(p.string());
        }
        std::cout << json{{"kernel", a.size}, {"filters", subset.size()}, {"images", files},
                          {"csv", ex.csv.string()}}
                         .dump(2)
                  << "\n";
    } else {
        fmt::print("wrote {} filters of size {}x{} to {}\n", subset.size(), a.size, a.size, a.out);
        for (const auto& f : subset) {
            fmt::print("  (u={}, v={})\n", f.u, f.v);
        }
        fmt::print("values: {}\n", ex.csv.string());
    }
    return kExitOk;
}

// --- verify -----------------------------------------------------------------------------

struct VerifyArgs {
    int max_n = 32;
    double tol = 1e-10;
    int configs = 50;
    bool skip_model = false;
};

int run_verify(const VerifyArgs& a, const Common& c) {
    if (a.max_n < 2) {
        throw ValueError("--max-n must be >= 2");
    }
    LappedOptions lapped;
    lapped.max_n = a.max_n;
    lapped.tol = a.tol;
    lapped.shift_tol = a.tol;
    EquivalenceOptions eq;
    eq.configs = a.configs;
    eq.tol_f64 = a.tol;
    GradientOptions grad;
    grad.include_model = !a.skip_model;

    std::vector<SuiteResult> suites;
    suites.push_back(verify_phase_suite(lapped));
    suites.push_back(verify_shifted_cosine_suite(lapped));
    suites.push_back(verify_delta_integrality_suite(lapped));
    suites.push_back(verify_window_shift_suite(lapped));
    suites.push_back(measure_odd_window_shift(lapped));
    for (auto& s : verify_equivalence_suites(eq)) {
        suites.push_back(std::move(s));
    }
    suites.push_back(verify_cost_suite());
    for (auto& s : verify_gradient_suites(grad)) {
        suites.push_back(std::move(s));
    }

    const bool ok = std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) {
        return s.informational || s.passed;
    });
    if (c.json_output) {
        json arr = json::array();
        for (const auto& s : suites) {
            arr.push_back(suite_json(s));
        }
        std::cout << json{{"passed", ok}, {"suites", arr}}.dump(2) << "\n";
    } else {
        fmt::print("{:<48} {:>6} {:>7} {:>11} {:>11}\n", "suite", "result", "cases", "worst",
                   "tolerance");
        for (const auto& s : suites) {
            const char* status = s.informational ? "info" : (s.passed ? "PASS" : "FAIL");
            fmt::print("{:<48} {:>6} {:>7} {:>11.3e} {:>11.3e}\n", s.name, status, s.cases, s.worst,
                       s.tolerance);
            if (!s.passed || s.informational) {
                fmt::print("    worst at {}{}\n", s.worst_case, s.note.empty() ? "" : "; " + s.note);
            }
        }
        fmt::print("{}\n", ok ? "all suites passed" : "verification FAILED");
    }
    return ok ? kExitOk : kExitFailed;
}

// --- train / eval -----------------------------------------------------------------------

int run_train(const TrainArgs& a, const Common& c) {
    const TrainConfig cfg = load_config(a.config, a.overrides);
    const TrainResult r = run_training(cfg);
    if (c.json_output) {
        json epochs = json::array();
        for (const auto& rec : r.records) {
            epochs.push_back({{"epoch", rec.epoch},
                              {"train_loss", rec.train_loss},
                              {"train_acc", rec.train_acc},
                              {"test_err", rec.test_err ? json(*rec.test_err) : json(nullptr)}});
        }
        std::cout << json{{"run_id", cfg.effective_run_id()},
                          {"seed", cfg.seed},
                          {"final_test_err", r.final_test_err},
                          {"final_train_acc", r.final_train_acc},
                          {"epochs", epochs}}
                         .dump(2)
                  << "\n";
    } else {
        if (a.verbose) {
            std::cout << metrics_csv_header() << "\n";
            for (const auto& rec : r.records) {
                std::cout << metrics_csv_row(rec) << "\n";
            }
        }
        fmt::print("{} seed={} final train_acc={:.4f}% test_err={:.4f}%\n", cfg.effective_run_id(),
                   cfg.seed, r.final_train_acc, r.final_test_err);
    }
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::size_t test_size = 0;
    std::size_t batch = 256;
};

template <typename T>
EvalResult eval_typed(const EvalArgs& a, const LabeledDataset& test, std::string& arch) {
    ModelGraph<T> model = load_checkpoint<T>(a.checkpoint);
    arch = model.arch();
    return evaluate(model, test, a.batch);
}

int run_eval(const EvalArgs& a, const Common& c) {
    const DType dtype = checkpoint_dtype(a.checkpoint);
    // the architecture decides which test set applies; peek with a cheap f32 load
    const std::string arch = load_checkpoint<float>(a.checkpoint).arch();
    const fs::path root = a.data.empty() ? default_data_root() : fs::path(a.data);
    LabeledDataset test =
        arch.rfind("shallow", 0) == 0 ? load_cifar10(root, false) : load_mnist(root, false);
    if (a.test_size != 0 && a.test_size < test.size()) {
        std::vector<std::size_t> idx(a.test_size);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = i;
        }
        test = test.select(idx);
    }
    std::string used;
    const EvalResult r = dtype == DType::f64 ? eval_typed<double>(a, test, used)
                                             : eval_typed<float>(a, test, used);
    if (c.json_output) {
        std::cout << json{{"arch", used},         {"dtype", dtype_name(dtype)}, {"test_err", r.error},
                          {"test_loss", r.loss},  {"correct", r.correct},      {"total", r.total}}
                         .dump(2)
                  << "\n";
    } else {
        fmt::print("{} ({}): test_err={:.4f}% loss={:.6f} ({}/{} correct)\n", used,
                   dtype_name(dtype), r.error, r.loss, r.correct, r.total);
    }
    return kExitOk;
}

// --- table2 -----------------------------------------------------------------------------

struct Table2Args {
    std::vector<std::size_t> sizes{300, 1000};
    std::vector<std::string> variants{"conv", "separable", "harmonic"};
    int seeds = 5;
    std::uint64_t first_seed = 0;
    std::string runs_csv;
    std::string summary_csv;
    TrainArgs train;
};

int run_table2_cmd(const Table2Args& a, const Common& c) {
    Table2Options o;
    o.sizes = a.sizes;
    o.variants.clear();
    for (const auto& v : a.variants) {
        o.variants.push_back(parse_variant(v));
    }
    o.seeds = a.seeds;
    o.first_seed = a.first_seed;
    o.base = load_config(a.train.config, a.train.overrides);
    o.runs_csv = a.runs_csv;
    o.summary_csv = a.summary_csv;
    o.verbose = a.train.verbose;
    const auto rows = run_table2(o);
    if (c.json_output) {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"size", r.size},
                           {"variant", variant_name(r.variant)},
                           {"errors", r.errors},
                           {"median_test_err", r.median}});
        }
        std::cout << json{{"rows", arr}}.dump(2) << "\n";
    } else {
        fmt::print("{:>6} {:<10} {:>6} {:>12}\n", "size", "variant", "seeds", "median err %");
        for (const auto& r : rows) {
            fmt::print("{:>6} {:<10} {:>6} {:>12.2f}\n", r.size, variant_name(r.variant),
                       r.errors.size(), r.median);
        }
    }
    return kExitOk;
}

// --- stridesweep ------------------------------------------------------------------------

struct SweepArgs {
    std::size_t kernel = 4;
    std::string mode = "replicate";
    std::vector<std::size_t> strides;
    std::vector<int> truncations;
    int seeds = 5;
    std::uint64_t first_seed = 0;
    std::string out;
    TrainArgs train;
};

TrainConfig stride_sweep_defaults() {
    TrainConfig cfg;
    cfg.dataset = "cifar10";
    cfg.model = "shallow";
    cfg.lr = 0.01;
    cfg.lr_schedule = {{15, 0.1}};
    cfg.weight_decay = 0.0005;
    cfg.train_size = 0;
    return cfg;
}

int run_sweep_cmd(const SweepArgs& a, const Common& c) {
    StrideSweepOptions o;
    o.kernel = a.kernel;
    o.mode = parse_shallow_mode(a.mode);
    o.strides = a.strides;
    o.truncations = a.truncations;
    o.seeds = a.seeds;
    o.first_seed = a.first_seed;
    o.summary_csv = a.out;
    o.verbose = a.train.verbose;
    TrainConfig base = stride_sweep_defaults();
    if (!a.train.config.empty()) {
        base = TrainConfig::from_file(a.train.config);
    }
    o.base = load_config("", a.train.overrides, base);
    const auto cells = run_stride_sweep(o);
    if (c.json_output) {
        json arr = json::array();
        for (const auto& cell : cells) {
            arr.push_back({{"stride", cell.stride},
                           {"truncate", cell.truncate},
                           {"features", cell.features},
                           {"accuracies", cell.accuracies},
                           {"mean_acc", cell.mean}});
        }
        std::cout << json{{"kernel", a.kernel}, {"mode", a.mode}, {"cells", arr}}.dump(2) << "\n";
    } else {
        fmt::print("{:>6} {:>8} {:>8} {:>10}\n", "stride", "features", "T", "mean acc %");
        for (const auto& cell : cells) {
            fmt::print("{:>6} {:>8} {:>8} {:>10.2f}\n", cell.stride, cell.features, cell.truncate,
                       cell.mean);
        }
    }
    return kExitOk;
}

// --- bench ------------------------------------------------------------------------------

struct BenchArgs {
    std::vector<int> algs{1, 2};
    std::size_t n = 64;
    std::size_t m = 64;
    std::size_t k = 3;
    std::vector<std::size_t> hw{32, 32};
    std::size_t batch = 8;
    int reps = 3;
};

int run_bench(const BenchArgs& a, const Common& c) {
    if (a.hw.size() != 2) {
        throw ValueError("--hw takes two extents, e.g. 32,32");
    }
    if (a.reps < 1) {
        throw ValueError("--reps must be >= 1");
    }
    HarmonicBlockSpec spec;
    spec.in_channels = a.n;
    spec.out_channels = a.m;
    spec.kernel = a.k;
    spec.padding = a.k / 2;
    spec.validate();
    const FilterBank bank(a.k);
    const Shape in{a.batch, a.n, a.hw[0], a.hw[1]};
    Rng rng(1);
    Tensor<float> x(in);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    Tensor<float> w(spec.weight_shape());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<float>(rng.uniform(-0.1, 0.1));
    }

    json arr = json::array();
    if (!c.json_output) {
        fmt::print("block N={} M={} K={} input {} (padding {})\n", a.n, a.m, a.k, shape_str(in),
                   spec.padding);
        fmt::print("{:>4} {:>14} {:>14} {:>10} {:>14} {:>14} {:>10}\n", "alg", "madds",
                   "overhead", "ratio", "peak (model)", "peak (meas.)", "wall ms");
    }
    for (int alg_id : a.algs) {
        const HarmonicAlgorithm alg = parse_algorithm(alg_id);
        const CostReport r = cost_report(spec, in, alg);
        ActivationMeter meter;
        std::vector<double> times;
        for (int rep = 0; rep < a.reps; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const Tensor<float> y = alg == HarmonicAlgorithm::expanded
                                        ? harmonic_forward_expanded(spec, bank, w, x, Mode::train,
                                                                    &meter)
                                        : harmonic_forward_folded(spec, bank, w, x, &meter);
            times.push_back(std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
            if (y.empty()) {
                throw NumericError("empty benchmark output");
            }
        }
        const double wall = median(times);
        if (c.json_output) {
            arr.push_back({{"alg", alg_id},
                           {"madds", r.madds},
                           {"standard_conv_madds", r.standard_conv_madds},
                           {"overhead_madds", r.overhead_madds},
                           {"overhead_ratio", r.overhead_ratio.str()},
                           {"ratio_vs_standard_conv", r.ratio_vs_standard_conv.str()},
                           {"peak_intermediate_elems", r.peak_intermediate_elems},
                           {"measured_peak_elems", meter.peak},
                           {"wall_ms", wall}});
        } else {
            fmt::print("{:>4} {:>14} {:>14} {:>10} {:>14} {:>14} {:>10.2f}\n", alg_id, r.madds,
                       r.overhead_madds, r.overhead_ratio.str(), r.peak_intermediate_elems,
                       meter.peak, wall);
        }
    }
    if (c.json_output) {
        std::cout << json{{"n", a.n}, {"m", a.m}, {"k", a.k}, {"input", in}, {"results", arr}}.dump(2)
                  << "\n";
    }
    return kExitOk;
}

// --- compute-stats ----------------------------------------------------------------------

struct StatsArgs {
    std::string dataset = "mnist";
    std::string data;
};

int run_stats(const StatsArgs& a, const Common& c) {
    const fs::path root = a.data.empty() ? default_data_root() : fs::path(a.data);
    RawImages raw;
    const ChannelStats* frozen = nullptr;
    if (a.dataset == "mnist") {
        const MnistFiles f = mnist_files(root, true);
        raw = read_mnist_idx(f.images, f.labels);
        frozen = &mnist_stats();
    } else if (a.dataset == "cifar10") {
        raw = read_cifar10_bin(cifar10_files(root, true));
        frozen = &cifar10_stats();
    } else {
        throw ValueError("--dataset must be mnist or cifar10");
    }
    const ChannelStats s = compute_stats(raw);
    if (c.json_output) {
        std::cout << json{{"dataset", a.dataset},      {"samples", raw.count()},
                          {"mean", s.mean},            {"std", s.std},
                          {"frozen_mean", frozen->mean}, {"frozen_std", frozen->std}}
                         .dump(2)
                  << "\n";
    } else {
        fmt::print("{} training set, {} samples\n", a.dataset, raw.count());
        for (std::size_t ch = 0; ch < s.mean.size(); ++ch) {
            fmt::print("  channel {}: mean {:.4f} (frozen {:.4f})  std {:.4f} (frozen {:.4f})\n", ch,
                       s.mean[ch], frozen->mean[ch], s.std[ch], frozen->std[ch]);
        }
    }
    return kExitOk;
}

void add_train_options(CLI::App* cmd, TrainArgs& t, bool config_required = false) {
    auto* opt = cmd->add_option("--config", t.config, "key=value training configuration file");
    if (config_required) {
        opt->required();
    }
    cmd->add_option("--override", t.overrides, "key=value assignments applied after the file");
    cmd->add_flag("--verbose", t.verbose, "Print per-epoch or per-run progress");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DCT harmonic blocks: filters, verification, training and benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_flag("--json", common.json_output, "Machine-readable output");

    FiltersArgs filters;
    auto* c_filters = app.add_subcommand("filters", "Export the DCT filter bank as PGM images and CSV");
    c_filters->add_option("--size", filters.size, "Kernel size K")->required()->check(CLI::PositiveNumber);
    auto* lam = c_filters->add_option("--lambda", filters.lambda, "Keep filters with u+v < lambda");
    auto* trunc = c_filters->add_option("--truncate", filters.truncate, "Keep the first T zigzag filters");
    lam->excludes(trunc);
    c_filters->add_option("--out", filters.out, "Output directory")->required();

    VerifyArgs verify;
    auto* c_verify = app.add_subcommand("verify", "Run lapped-DCT, equivalence, cost and gradient suites");
    c_verify->add_option("--max-n", verify.max_n, "Largest window length for lapped-DCT suites");
    c_verify->add_option("--tol", verify.tol, "Tolerance for lapped-DCT and f64 equivalence suites");
    c_verify->add_option("--configs", verify.configs, "Random block configurations");
    c_verify->add_flag("--skip-model", verify.skip_model, "Skip the full-model gradient check");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train one model from a configuration file");
    add_train_options(c_train, train);

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
    c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    c_eval->add_option("--data", eval.data, "Dataset root (default $HARM_DATA_DIR)");
    c_eval->add_option("--test-size", eval.test_size, "Use only the first n test samples");
    c_eval->add_option("--batch", eval.batch, "Evaluation batch size")->check(CLI::PositiveNumber);

    Table2Args t2;
    auto* c_t2 = app.add_subcommand("table2", "MNIST limited-data comparison, median over seeds");
    c_t2->add_option("--sizes", t2.sizes, "Training-set sizes")->delimiter(',');
    c_t2->add_option("--variants", t2.variants, "conv, separable, harmonic")->delimiter(',');
    c_t2->add_option("--seeds", t2.seeds, "Runs per cell")->check(CLI::PositiveNumber);
    c_t2->add_option("--first-seed", t2.first_seed, "Seed of the first run");
    c_t2->add_option("--runs-csv", t2.runs_csv, "Per-run results CSV");
    c_t2->add_option("--summary-csv", t2.summary_csv, "Per-cell median CSV");
    add_train_options(c_t2, t2.train);

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("stridesweep", "Shallow-network stride and truncation sweep");
    c_sweep->add_option("--k", sweep.kernel, "Kernel size (4 or 8)")->check(CLI::IsMember({4, 8}));
    c_sweep->add_option("--mode", sweep.mode, "replicate or balanced")
        ->check(CLI::IsMember({"replicate", "balanced"}));
    c_sweep->add_option("--strides", sweep.strides, "Strides (default 1, K/2, K)")->delimiter(',');
    c_sweep->add_option("--truncations", sweep.truncations, "Retained coefficient counts")
        ->delimiter(',');
    c_sweep->add_option("--seeds", sweep.seeds, "Runs per cell")->check(CLI::PositiveNumber);
    c_sweep->add_option("--first-seed", sweep.first_seed, "Seed of the first run");
    c_sweep->add_option("--out", sweep.out, "Summary CSV");
    add_train_options(c_sweep, sweep.train);

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Cost model and timing of the two block algorithms");
    c_bench->add_option("--alg", bench.algs, "1 (expanded), 2 (folded); default both")
        ->delimiter(',')
        ->check(CLI::IsMember({1, 2}));
    c_bench->add_option("--n", bench.n, "Input channels")->check(CLI::PositiveNumber);
    c_bench->add_option("--m", bench.m, "Output channels")->check(CLI::PositiveNumber);
    c_bench->add_option("--k", bench.k, "Kernel size")->check(CLI::PositiveNumber);
    c_bench->add_option("--hw", bench.hw, "Input height,width")->delimiter(',');
    c_bench->add_option("--batch", bench.batch, "Batch size")->check(CLI::PositiveNumber);
    c_bench->add_option("--reps", bench.reps, "Timed repetitions (median reported)");

    StatsArgs stats;
    auto* c_stats = app.add_subcommand("compute-stats", "Recompute normalization constants");
    c_stats->add_option("--dataset", stats.dataset, "mnist or cifar10");
    c_stats->add_option("--data", stats.data, "Dataset root (default $HARM_DATA_DIR)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_filters->parsed()) {
            return run_filters(filters, common);
        }
        if (c_verify->parsed()) {
            return run_verify(verify, common);
        }
        if (c_train->parsed()) {
            return run_train(train, common);
        }
        if (c_eval->parsed()) {
            return run_eval(eval, common);
        }
        if (c_t2->parsed()) {
            return run_table2_cmd(t2, common);
        }
        if (c_sweep->parsed()) {
            return run_sweep_cmd(sweep, common);
        }
        if (c_bench->parsed()) {
            return run_bench(bench, common);
        }
        if (c_stats->parsed()) {
            return run_stats(stats, common);
        }
    } catch (const ValueError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const ShapeError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const IoError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitIo;
    } catch (const FormatError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailed;
    }
    return kExitUsage;
}
