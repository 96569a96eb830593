#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "harmonic/datasets.hpp"
#include "harmonic/harmonic_block.hpp"
#include "harmonic/model.hpp"

namespace harmonic {

enum class ModelVariant : std::uint8_t { conv, separable, harmonic };

ModelVariant parse_variant(const std::string& name);
std::string variant_name(ModelVariant v);

// Three 3x3 stages of 32, 64 and 128 channels with overlapping 3x3/2 average pooling between
// them, then dense(512) + BN + ReLU + dense(10). Each stage is spatial layer + BN + ReLU.
// Harmonic and separable stages normalize their responses in the first block.
template <typename T>
ModelGraph<T> build_mnist_model(ModelVariant variant, HarmonicAlgorithm alg, std::uint64_t seed);

enum class ShallowMode : std::uint8_t { replicate, balanced };

ShallowMode parse_shallow_mode(const std::string& name);
std::string shallow_mode_name(ShallowMode m);

// Output feature count that keeps the classifier input roughly constant across strides.
std::size_t balanced_features(std::size_t kernel, std::size_t stride);

// One normalized harmonic block (3 input channels, 32x32 input, padding 0) keeping the first
// `truncate` zigzag coefficients, ReLU, optional nearest upsampling back to the stride-1 extent
// (replicate mode), flatten and dense(10). stride must be 1, K/2 or K.
template <typename T>
ModelGraph<T> build_shallow_model(std::size_t kernel, std::size_t stride, std::size_t features,
                                  int truncate, ShallowMode mode, std::uint64_t seed);

// Rebuilds a graph from the description stored in ModelGraph::arch().
template <typename T>
ModelGraph<T> build_from_arch(const std::string& arch, std::uint64_t seed = 0);

// Log-linear weight decay between 0.0005 at 300 samples and 0.05 at 60000.
double mnist_weight_decay(std::size_t train_size);

struct TrainConfig {
    // optimization
    int epochs = 30;
    std::size_t batch_size = 128;
    double lr = 0.1;
    // epoch -> multiplicative factor applied from that epoch on (0-based, cumulative)
    std::map<int, double> lr_schedule{{10, 0.1}, {20, 0.1}};
    double momentum = 0.9;
    bool nesterov = true;
    // negative: derive from train_size for MNIST runs
    double weight_decay = -1.0;
    std::uint64_t seed = 0;
    DType dtype = DType::f32;

    // what to train
    std::string dataset = "mnist";     // mnist | cifar10
    std::string model = "harmonic";    // conv | separable | harmonic | shallow
    int alg = 1;
    std::size_t train_size = 300;      // balanced subset size; 0 = full training set
    std::size_t test_size = 0;         // first n test samples; 0 = all
    std::size_t kernel = 4;            // shallow model
    std::size_t stride = 1;
    std::size_t features = 0;          // 0 = mode default
    int truncate = 0;                  // 0 = full spectrum
    std::string mode = "replicate";

    // bookkeeping
    std::string run_id;
    std::string data_dir;              // empty = HARM_DATA_DIR
    std::string metrics_path;          // empty = no CSV
    std::string checkpoint_path;       // empty = no checkpoint
    int eval_every = 1;                // the final epoch is always evaluated
    bool log_wall_time = false;
    std::size_t eval_batch = 256;

    // key=value assignment; throws ValueError on unknown keys or unparsable values
    void set(const std::string& key, const std::string& value);
    // "key=value"
    void apply_override(const std::string& assignment);
    static TrainConfig from_file(const std::filesystem::path& path);
    void validate() const;

    double lr_at(int epoch) const;
    double effective_weight_decay() const;
    std::string effective_run_id() const;
    // Canonical key=value listing of every field.
    std::string to_text() const;
};

struct MetricsRecord {
    std::string run_id;
    std::uint64_t seed = 0;
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;                // percent
    std::optional<double> test_err;        // percent
    std::optional<double> wall_time_s;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows);

struct EvalResult {
    double loss = 0.0;
    double error = 0.0;  // percent
    std::size_t correct = 0;
    std::size_t total = 0;
};

template <typename T>
EvalResult evaluate(ModelGraph<T>& model, const LabeledDataset& ds, std::size_t batch_size = 256);

struct TrainResult {
    std::vector<MetricsRecord> records;
    double final_test_err = 0.0;
    double final_train_acc = 0.0;
};

// Deterministic SGD training. Writes cfg.metrics_path and cfg.checkpoint_path when set.
// lr = 0 leaves the model untouched and only measures it.
template <typename T>
TrainResult train(ModelGraph<T>& model, const LabeledDataset& train_ds,
                  const LabeledDataset& test_ds, const TrainConfig& cfg);

// Builds the model and datasets described by cfg and trains.
template <typename T>
ModelGraph<T> build_model(const TrainConfig& cfg);
std::pair<LabeledDataset, LabeledDataset> load_datasets(const TrainConfig& cfg);
TrainResult run_training(const TrainConfig& cfg);

// "HARMCKPT1\n" followed by one entry per tensor:
//   <name>\n<dtype> <rank> <dims...>\n<raw little-endian payload>
// The first entry, "__arch__" (u8), holds the architecture description; BN running
// statistics carry the suffixes .running_mean / .running_var.
template <typename T>
void save_checkpoint(ModelGraph<T>& model, const std::filesystem::path& path);
template <typename T>
ModelGraph<T> load_checkpoint(const std::filesystem::path& path);
// Element type of the stored parameters.
DType checkpoint_dtype(const std::filesystem::path& path);

struct Table2Row {
    std::size_t size = 0;
    ModelVariant variant = ModelVariant::harmonic;
    std::vector<double> errors;  // one per seed, in seed order
    double median = 0.0;
};

double median(std::vector<double> values);

struct Table2Options {
    std::vector<std::size_t> sizes{300, 1000};
    std::vector<ModelVariant> variants{ModelVariant::conv, ModelVariant::separable,
                                       ModelVariant::harmonic};
    int seeds = 5;
    std::uint64_t first_seed = 0;
    TrainConfig base;            // epochs, lr, schedule, alg, data_dir
    std::string runs_csv;        // per-run final errors; empty = skip
    std::string summary_csv;     // per-cell medians; empty = skip
    bool verbose = false;
};

std::vector<Table2Row> run_table2(const Table2Options& options);

struct SweepCell {
    std::size_t stride = 1;
    int truncate = 0;
    std::size_t features = 0;
    std::vector<double> accuracies;  // percent, one per seed
    double mean = 0.0;
};

struct StrideSweepOptions {
    std::size_t kernel = 4;
    ShallowMode mode = ShallowMode::replicate;
    std::vector<std::size_t> strides;  // empty = {1, K/2, K}
    std::vector<int> truncations;      // empty = zigzag diagonal boundaries
    int seeds = 5;
    std::uint64_t first_seed = 0;
    TrainConfig base;
    std::string summary_csv;
    bool verbose = false;
};

std::vector<int> default_truncations(std::size_t kernel);
std::vector<SweepCell> run_stride_sweep(const StrideSweepOptions& options);

} // namespace harmonic
