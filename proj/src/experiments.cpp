#include "harmonic/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "harmonic/errors.hpp"
#include "harmonic/layers.hpp"
#include "harmonic/optimizer.hpp"
#include "harmonic/rng.hpp"

namespace harmonic {

namespace {

// Stream ids for mix_seed so every random consumer of a run draws independently.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kSubsetStream = 2;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    N out{};
    in >> out;
    if (in.fail() || !in.eof()) {
        throw ValueError("invalid value '" + value + "' for " + key);
    }
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    if (!value.empty() && value[0] == '-') {
        throw ValueError("invalid value '" + value + "' for " + key);
    }
    return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    throw ValueError("invalid boolean '" + value + "' for " + key);
}

std::map<int, double> parse_schedule(const std::string& value) {
    std::map<int, double> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ValueError("lr_schedule entries are epoch:factor, got '" + item + "'");
        }
        const int epoch = parse_number<int>("lr_schedule", trim(item.substr(0, colon)));
        const double factor = parse_number<double>("lr_schedule", trim(item.substr(colon + 1)));
        if (epoch < 0 || factor <= 0.0) {
            throw ValueError("lr_schedule entry '" + item + "' out of range");
        }
        out[epoch] = factor;
    }
    return out;
}

std::map<std::string, std::string> parse_arch_fields(const std::string& arch, std::string& head) {
    std::istringstream in(arch);
    in >> head;
    std::map<std::string, std::string> fields;
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw FormatError("malformed architecture token '" + token + "'");
        }
        fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return fields;
}

const std::string& field(const std::map<std::string, std::string>& fields, const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) {
        throw FormatError("architecture description lacks '" + key + "'");
    }
    return it->second;
}

template <typename T>
void add_spatial_stage(ModelGraph<T>& g, ModelVariant variant, HarmonicAlgorithm alg,
                       std::size_t in, std::size_t out, bool first, Rng& rng) {
    if (variant == ModelVariant::conv) {
        g.template emplace<Conv2d<T>>(in, out, 3, 1, 1, rng);
    } else {
        HarmonicBlockSpec spec;
        spec.in_channels = in;
        spec.out_channels = out;
        spec.kernel = 3;
        spec.stride = 1;
        spec.padding = 1;
        spec.normalize = first;
        const BasisKind basis =
            variant == ModelVariant::harmonic ? BasisKind::dct : BasisKind::learned;
        g.template emplace<HarmonicBlock<T>>(spec, alg, rng, basis);
    }
    g.template emplace<BatchNorm<T>>(out, true);
    g.template emplace<ReLU<T>>();
}

template <typename T>
Tensor<T> gather_images(const LabeledDataset& ds, std::span<const std::size_t> idx,
                        std::vector<int>& labels) {
    Shape dims = ds.images.dims();
    const std::size_t per = ds.images.size() / dims[0];
    dims[0] = idx.size();
    Tensor<T> x(dims);
    labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const float* src = ds.images.data() + idx[i] * per;
        std::transform(src, src + per, x.data() + i * per,
                       [](float v) { return static_cast<T>(v); });
        labels[i] = ds.labels[idx[i]];
    }
    return x;
}

std::size_t count_correct(const std::vector<int>& predicted, const std::vector<int>& labels) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        c += predicted[i] == labels[i] ? 1 : 0;
    }
    return c;
}

LabeledDataset head(const LabeledDataset& ds, std::size_t n) {
    if (n == 0 || n >= ds.size()) {
        return ds;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return ds.select(idx);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot create " + path);
    }
    out << text;
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

} // namespace

ModelVariant parse_variant(const std::string& name) {
    if (name == "conv") {
        return ModelVariant::conv;
    }
    if (name == "separable") {
        return ModelVariant::separable;
    }
    if (name == "harmonic") {
        return ModelVariant::harmonic;
    }
    throw ValueError("unknown model variant '" + name + "' (conv, separable, harmonic)");
}

std::string variant_name(ModelVariant v) {
    switch (v) {
    case ModelVariant::conv:
        return "conv";
    case ModelVariant::separable:
        return "separable";
    case ModelVariant::harmonic:
        break;
    }
    return "harmonic";
}

ShallowMode parse_shallow_mode(const std::string& name) {
    if (name == "replicate") {
        return ShallowMode::replicate;
    }
    if (name == "balanced") {
        return ShallowMode::balanced;
    }
    throw ValueError("unknown shallow mode '" + name + "' (replicate, balanced)");
}

std::string shallow_mode_name(ShallowMode m) {
    return m == ShallowMode::replicate ? "replicate" : "balanced";
}

template <typename T>
ModelGraph<T> build_mnist_model(ModelVariant variant, HarmonicAlgorithm alg, std::uint64_t seed) {
    Rng rng(mix_seed(seed, kInitStream));
    ModelGraph<T> g;
    const PoolGeometry pool{3, 2, 1};
    add_spatial_stage(g, variant, alg, 1, 32, true, rng);
    g.template emplace<AvgPool2d<T>>(pool);
    add_spatial_stage(g, variant, alg, 32, 64, false, rng);
    g.template emplace<AvgPool2d<T>>(pool);
    add_spatial_stage(g, variant, alg, 64, 128, false, rng);
    g.template emplace<Flatten<T>>();
    g.template emplace<Dense<T>>(128 * 7 * 7, 512, rng);
    g.template emplace<BatchNorm<T>>(512, true);
    g.template emplace<ReLU<T>>();
    g.template emplace<Dense<T>>(512, 10, rng);
    g.set_arch(fmt::format("mnist variant={} alg={}", variant_name(variant), static_cast<int>(alg)));
    return g;
}

std::size_t balanced_features(std::size_t kernel, std::size_t stride) {
    if (kernel == 4) {
        switch (stride) {
        case 1:
            return 16;
        case 2:
            return 50;
        case 4:
            return 200;
        default:
            break;
        }
    } else if (kernel == 8) {
        switch (stride) {
        case 1:
            return 16;
        case 4:
            return 200;
        case 8:
            return 625;
        default:
            break;
        }
    }
    throw ValueError(fmt::format("no balanced feature count for K={} stride={}", kernel, stride));
}

template <typename T>
ModelGraph<T> build_shallow_model(std::size_t kernel, std::size_t stride, std::size_t features,
                                  int truncate, ShallowMode mode, std::uint64_t seed) {
    constexpr std::size_t side = 32;
    if (kernel < 2 || kernel % 2 != 0) {
        throw ValueError("shallow model needs an even kernel, got " + std::to_string(kernel));
    }
    if (stride != 1 && stride != kernel / 2 && stride != kernel) {
        throw ValueError(fmt::format("stride {} is not 1, K/2 or K for K={}", stride, kernel));
    }
    if ((side - kernel) % stride != 0) {
        throw ValueError(fmt::format("stride {} does not tile a {}-pixel input with K={}", stride,
                                     side, kernel));
    }
    const int coeffs = truncate == 0 ? static_cast<int>(kernel * kernel) : truncate;
    Rng rng(mix_seed(seed, kInitStream));
    HarmonicBlockSpec spec;
    spec.in_channels = 3;
    spec.out_channels = features;
    spec.kernel = kernel;
    spec.stride = stride;
    spec.padding = 0;
    spec.normalize = true;
    spec.selection = FilterSelection::truncate(coeffs);

    ModelGraph<T> g;
    g.template emplace<HarmonicBlock<T>>(spec, HarmonicAlgorithm::expanded, rng);
    g.template emplace<ReLU<T>>();
    const std::size_t full = side - kernel + 1;
    const std::size_t out = (side - kernel) / stride + 1;
    std::size_t extent = out;
    if (mode == ShallowMode::replicate && stride != 1) {
        g.template emplace<UpsampleNearest<T>>(full, full);
        extent = full;
    }
    g.template emplace<Flatten<T>>();
    g.template emplace<Dense<T>>(features * extent * extent, 10, rng);
    g.set_arch(fmt::format("shallow k={} stride={} features={} truncate={} mode={}", kernel, stride,
                           features, coeffs, shallow_mode_name(mode)));
    return g;
}

template <typename T>
ModelGraph<T> build_from_arch(const std::string& arch, std::uint64_t seed) {
    std::string kind;
    const auto f = parse_arch_fields(arch, kind);
    try {
        if (kind == "mnist") {
            return build_mnist_model<T>(parse_variant(field(f, "variant")),
                                        parse_algorithm(std::stoi(field(f, "alg"))), seed);
        }
        if (kind == "shallow") {
            return build_shallow_model<T>(std::stoul(field(f, "k")), std::stoul(field(f, "stride")),
                                          std::stoul(field(f, "features")),
                                          std::stoi(field(f, "truncate")),
                                          parse_shallow_mode(field(f, "mode")), seed);
        }
    } catch (const std::logic_error&) {
        throw FormatError("malformed architecture description '" + arch + "'");
    }
    throw FormatError("unknown architecture '" + kind + "'");
}

double mnist_weight_decay(std::size_t train_size) {
    if (train_size == 0) {
        throw ValueError("weight decay needs a positive training size");
    }
    const double n = static_cast<double>(train_size);
    return 0.0005 * std::pow(100.0, std::log(n / 300.0) / std::log(200.0));
}

// --- TrainConfig ------------------------------------------------------------------------

void TrainConfig::set(const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "epochs") {
        epochs = parse_number<int>(key, value);
    } else if (key == "batch_size") {
        batch_size = parse_size(key, value);
    } else if (key == "lr") {
        lr = parse_number<double>(key, value);
    } else if (key == "lr_schedule") {
        lr_schedule = parse_schedule(value);
    } else if (key == "momentum") {
        momentum = parse_number<double>(key, value);
    } else if (key == "nesterov") {
        nesterov = parse_bool(key, value);
    } else if (key == "weight_decay") {
        weight_decay = value == "auto" ? -1.0 : parse_number<double>(key, value);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "dtype") {
        dtype = parse_dtype(value);
    } else if (key == "dataset") {
        if (value != "mnist" && value != "cifar10") {
            throw ValueError("dataset must be mnist or cifar10, got '" + value + "'");
        }
        dataset = value;
    } else if (key == "model") {
        if (value != "shallow") {
            parse_variant(value);
        }
        model = value;
    } else if (key == "alg") {
        alg = static_cast<int>(parse_algorithm(parse_number<int>(key, value)));
    } else if (key == "train_size") {
        train_size = parse_size(key, value);
    } else if (key == "test_size") {
        test_size = parse_size(key, value);
    } else if (key == "kernel") {
        kernel = parse_size(key, value);
    } else if (key == "stride") {
        stride = parse_size(key, value);
    } else if (key == "features") {
        features = parse_size(key, value);
    } else if (key == "truncate") {
        truncate = parse_number<int>(key, value);
    } else if (key == "mode") {
        parse_shallow_mode(value);
        mode = value;
    } else if (key == "run_id") {
        run_id = value;
    } else if (key == "data_dir") {
        data_dir = value;
    } else if (key == "metrics_path") {
        metrics_path = value;
    } else if (key == "checkpoint_path") {
        checkpoint_path = value;
    } else if (key == "eval_every") {
        eval_every = parse_number<int>(key, value);
    } else if (key == "log_wall_time") {
        log_wall_time = parse_bool(key, value);
    } else if (key == "eval_batch") {
        eval_batch = parse_size(key, value);
    } else {
        throw ValueError("unknown config key '" + key + "'");
    }
}

void TrainConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ValueError("override must be key=value, got '" + assignment + "'");
    }
    set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    TrainConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(fmt::format("{}:{}: expected key=value", path.string(), number));
        }
        try {
            cfg.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const ValueError& e) {
            throw FormatError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
        }
    }
    return cfg;
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ValueError("epochs must be >= 1");
    }
    if (batch_size < 2) {
        throw ValueError("batch_size must be >= 2 (batch normalization needs two samples)");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ValueError("lr must be a finite value >= 0");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ValueError("momentum must lie in [0, 1)");
    }
    if (eval_every < 1) {
        throw ValueError("eval_every must be >= 1");
    }
    if (eval_batch < 1) {
        throw ValueError("eval_batch must be >= 1");
    }
    if (model == "shallow" && dataset != "cifar10") {
        throw ValueError("the shallow model expects dataset=cifar10");
    }
    if (model != "shallow" && dataset != "mnist") {
        throw ValueError("model " + model + " expects dataset=mnist");
    }
}

double TrainConfig::lr_at(int epoch) const {
    double rate = lr;
    for (const auto& [at, factor] : lr_schedule) {
        if (epoch >= at) {
            rate *= factor;
        }
    }
    return rate;
}

double TrainConfig::effective_weight_decay() const {
    if (weight_decay >= 0.0) {
        return weight_decay;
    }
    if (dataset == "mnist") {
        return mnist_weight_decay(train_size == 0 ? 60000 : train_size);
    }
    return 0.0005;
}

std::string TrainConfig::effective_run_id() const {
    if (!run_id.empty()) {
        return run_id;
    }
    if (model == "shallow") {
        return fmt::format("shallow-k{}-s{}-t{}-{}", kernel, stride, truncate, mode);
    }
    return fmt::format("{}-n{}", model, train_size);
}

std::string TrainConfig::to_text() const {
    std::string schedule;
    for (const auto& [at, factor] : lr_schedule) {
        schedule += (schedule.empty() ? "" : ",") + fmt::format("{}:{}", at, factor);
    }
    std::string out;
    const auto put = [&out](const char* key, const std::string& value) {
        out += fmt::format("{}={}\n", key, value);
    };
    put("epochs", std::to_string(epochs));
    put("batch_size", std::to_string(batch_size));
    put("lr", fmt::format("{}", lr));
    put("lr_schedule", schedule);
    put("momentum", fmt::format("{}", momentum));
    put("nesterov", nesterov ? "true" : "false");
    put("weight_decay", weight_decay < 0.0 ? std::string("auto") : fmt::format("{}", weight_decay));
    put("seed", std::to_string(seed));
    put("dtype", std::string(dtype_name(dtype)));
    put("dataset", dataset);
    put("model", model);
    put("alg", std::to_string(alg));
    put("train_size", std::to_string(train_size));
    put("test_size", std::to_string(test_size));
    put("kernel", std::to_string(kernel));
    put("stride", std::to_string(stride));
    put("features", std::to_string(features));
    put("truncate", std::to_string(truncate));
    put("mode", mode);
    put("run_id", run_id);
    put("data_dir", data_dir);
    put("metrics_path", metrics_path);
    put("checkpoint_path", checkpoint_path);
    put("eval_every", std::to_string(eval_every));
    put("log_wall_time", log_wall_time ? "true" : "false");
    put("eval_batch", std::to_string(eval_batch));
    return out;
}

// --- metrics ----------------------------------------------------------------------------

std::string metrics_csv_header() {
    return "run_id,seed,epoch,train_loss,train_acc,test_err,wall_time_s";
}

std::string metrics_csv_row(const MetricsRecord& r) {
    return fmt::format("{},{},{},{:.6f},{:.4f},{},{}", r.run_id, r.seed, r.epoch, r.train_loss,
                       r.train_acc, r.test_err ? fmt::format("{:.4f}", *r.test_err) : "",
                       r.wall_time_s ? fmt::format("{:.3f}", *r.wall_time_s) : "");
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows) {
    std::string text = metrics_csv_header() + "\n";
    for (const auto& r : rows) {
        text += metrics_csv_row(r) + "\n";
    }
    write_text(path.string(), text);
}

// --- training ---------------------------------------------------------------------------

template <typename T>
EvalResult evaluate(ModelGraph<T>& model, const LabeledDataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) {
        throw ValueError("evaluation on an empty dataset");
    }
    EvalResult r;
    std::vector<std::size_t> idx;
    std::vector<int> labels;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t end = std::min(ds.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor<T> x = gather_images<T>(ds, idx, labels);
        loss_sum += model.forward_loss(x, labels, Mode::eval) * static_cast<double>(idx.size());
        r.correct += count_correct(argmax_rows(model.probabilities()), labels);
    }
    r.total = ds.size();
    r.loss = loss_sum / static_cast<double>(r.total);
    r.error = 100.0 * static_cast<double>(r.total - r.correct) / static_cast<double>(r.total);
    return r;
}

template <typename T>
TrainResult train(ModelGraph<T>& model, const LabeledDataset& train_ds,
                  const LabeledDataset& test_ds, const TrainConfig& cfg) {
    cfg.validate();
    if (train_ds.size() < 2) {
        throw ValueError("training needs at least two samples");
    }
    model.trace_shapes(train_ds.images.dims());
    model.trace_shapes(test_ds.images.dims());

    const bool frozen = cfg.lr == 0.0;
    const std::string run_id = cfg.effective_run_id();
    const double wd = cfg.effective_weight_decay();
    const auto params = model.parameters();
    Rng order_rng(mix_seed(cfg.seed, kShuffleStream));
    std::vector<std::size_t> order(train_ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<int> labels;
    const auto started = std::chrono::steady_clock::now();

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(std::span<std::size_t>(order));
        SgdOptions sgd;
        sgd.lr = cfg.lr_at(epoch);
        sgd.momentum = cfg.momentum;
        sgd.nesterov = cfg.nesterov;
        sgd.weight_decay = wd;

        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            if (end - start < 2) {
                break;  // a single leftover sample cannot be batch-normalized
            }
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Tensor<T> x = gather_images<T>(train_ds, idx, labels);
            double loss = 0.0;
            if (frozen) {
                loss = model.forward_loss(x, labels, Mode::eval);
            } else {
                model.zero_grad();
                loss = model.forward_loss(x, labels, Mode::train);
            }
            if (!std::isfinite(loss)) {
                throw NumericError(fmt::format("{}: loss is {} at epoch {} batch {}", run_id, loss,
                                               epoch + 1, start / cfg.batch_size));
            }
            correct += count_correct(argmax_rows(model.probabilities()), labels);
            if (!frozen) {
                model.backward();
                sgd_step<T>(params, sgd);
            }
            loss_sum += loss * static_cast<double>(idx.size());
            seen += idx.size();
        }

        MetricsRecord rec;
        rec.run_id = run_id;
        rec.seed = cfg.seed;
        rec.epoch = epoch + 1;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
        const bool last = epoch + 1 == cfg.epochs;
        if (last || (epoch + 1) % cfg.eval_every == 0) {
            rec.test_err = evaluate(model, test_ds, cfg.eval_batch).error;
        }
        if (cfg.log_wall_time) {
            rec.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        result.records.push_back(rec);
    }
    result.final_test_err = result.records.back().test_err.value_or(0.0);
    result.final_train_acc = result.records.back().train_acc;
    if (!cfg.metrics_path.empty()) {
        write_metrics_csv(cfg.metrics_path, result.records);
    }
    if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(model, cfg.checkpoint_path);
    }
    return result;
}

template <typename T>
ModelGraph<T> build_model(const TrainConfig& cfg) {
    if (cfg.model == "shallow") {
        const ShallowMode mode = parse_shallow_mode(cfg.mode);
        std::size_t features = cfg.features;
        if (features == 0) {
            features = mode == ShallowMode::balanced ? balanced_features(cfg.kernel, cfg.stride)
                                                     : balanced_features(cfg.kernel, 1);
        }
        return build_shallow_model<T>(cfg.kernel, cfg.stride, features, cfg.truncate, mode,
                                      cfg.seed);
    }
    return build_mnist_model<T>(parse_variant(cfg.model), parse_algorithm(cfg.alg), cfg.seed);
}

std::pair<LabeledDataset, LabeledDataset> load_datasets(const TrainConfig& cfg) {
    const std::filesystem::path root =
        cfg.data_dir.empty() ? default_data_root() : std::filesystem::path(cfg.data_dir);
    if (cfg.dataset == "cifar10") {
        return {load_cifar10(root, true), load_cifar10(root, false)};
    }
    return {load_mnist(root, true), load_mnist(root, false)};
}

namespace {

template <typename T>
TrainResult train_typed(const TrainConfig& cfg, const LabeledDataset& full_train,
                        const LabeledDataset& test) {
    ModelGraph<T> model = build_model<T>(cfg);
    if (cfg.train_size == 0 || cfg.train_size == full_train.size()) {
        return train(model, full_train, head(test, cfg.test_size), cfg);
    }
    const SubsetSpec spec{cfg.train_size, mix_seed(cfg.seed, kSubsetStream)};
    return train(model, balanced_subset(full_train, spec), head(test, cfg.test_size), cfg);
}

TrainResult run_loaded(const TrainConfig& cfg, const LabeledDataset& full_train,
                       const LabeledDataset& test) {
    cfg.validate();
    if (cfg.dtype == DType::f64) {
        return train_typed<double>(cfg, full_train, test);
    }
    return train_typed<float>(cfg, full_train, test);
}

} // namespace

TrainResult run_training(const TrainConfig& cfg) {
    cfg.validate();
    const auto [full_train, test] = load_datasets(cfg);
    return run_loaded(cfg, full_train, test);
}

// --- experiment drivers -----------------------------------------------------------------

double median(std::vector<double> values) {
    if (values.empty()) {
        throw ValueError("median of an empty list");
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[mid];
    }
    return 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<Table2Row> run_table2(const Table2Options& options) {
    if (options.seeds < 1) {
        throw ValueError("table2 needs at least one seed");
    }
    TrainConfig base = options.base;
    base.dataset = "mnist";
    base.metrics_path.clear();
    base.checkpoint_path.clear();
    base.run_id.clear();
    const auto [full_train, test] = load_datasets(base);

    std::vector<Table2Row> rows;
    std::string runs = "size,variant,seed,test_err,train_acc\n";
    for (std::size_t size : options.sizes) {
        for (ModelVariant variant : options.variants) {
            Table2Row row;
            row.size = size;
            row.variant = variant;
            for (int s = 0; s < options.seeds; ++s) {
                TrainConfig cfg = base;
                cfg.model = variant_name(variant);
                cfg.train_size = size;
                cfg.seed = options.first_seed + static_cast<std::uint64_t>(s);
                const TrainResult r = run_loaded(cfg, full_train, test);
                row.errors.push_back(r.final_test_err);
                runs += fmt::format("{},{},{},{:.4f},{:.4f}\n", size, cfg.model, cfg.seed,
                                    r.final_test_err, r.final_train_acc);
                if (options.verbose) {
                    fmt::print(stderr, "table2 size={} variant={} seed={} test_err={:.2f}%\n", size,
                               cfg.model, cfg.seed, r.final_test_err);
                }
            }
            row.median = median(row.errors);
            rows.push_back(std::move(row));
        }
    }
    if (!options.runs_csv.empty()) {
        write_text(options.runs_csv, runs);
    }
    if (!options.summary_csv.empty()) {
        std::string text = "size,variant,seeds,median_test_err\n";
        for (const auto& row : rows) {
            text += fmt::format("{},{},{},{:.4f}\n", row.size, variant_name(row.variant),
                                row.errors.size(), row.median);
        }
        write_text(options.summary_csv, text);
    }
    return rows;
}

std::vector<int> default_truncations(std::size_t kernel) {
    // counts of the complete anti-diagonals u + v < lambda
    std::vector<int> out;
    int total = 0;
    const int k = static_cast<int>(kernel);
    for (int s = 0; s <= 2 * k - 2; ++s) {
        total += std::min(s, 2 * k - 2 - s) + 1;
        out.push_back(total);
    }
    return out;
}

std::vector<SweepCell> run_stride_sweep(const StrideSweepOptions& options) {
    if (options.seeds < 1) {
        throw ValueError("stride sweep needs at least one seed");
    }
    const std::size_t k = options.kernel;
    const std::vector<std::size_t> strides =
        options.strides.empty() ? std::vector<std::size_t>{1, k / 2, k} : options.strides;
    const std::vector<int> truncations =
        options.truncations.empty() ? default_truncations(k) : options.truncations;

    TrainConfig base = options.base;
    base.dataset = "cifar10";
    base.model = "shallow";
    base.kernel = k;
    base.mode = shallow_mode_name(options.mode);
    base.metrics_path.clear();
    base.checkpoint_path.clear();
    base.run_id.clear();
    const auto [full_train, test] = load_datasets(base);

    std::vector<SweepCell> cells;
    for (std::size_t stride : strides) {
        for (int t : truncations) {
            SweepCell cell;
            cell.stride = stride;
            cell.truncate = t;
            cell.features = base.features != 0 ? base.features
                            : options.mode == ShallowMode::balanced ? balanced_features(k, stride)
                                                                    : balanced_features(k, 1);
            for (int s = 0; s < options.seeds; ++s) {
                TrainConfig cfg = base;
                cfg.stride = stride;
                cfg.truncate = t;
                cfg.features = cell.features;
                cfg.seed = options.first_seed + static_cast<std::uint64_t>(s);
                const TrainResult r = run_loaded(cfg, full_train, test);
                cell.accuracies.push_back(100.0 - r.final_test_err);
                if (options.verbose) {
                    fmt::print(stderr, "stridesweep stride={} T={} seed={} acc={:.2f}%\n", stride,
                               t, cfg.seed, cell.accuracies.back());
                }
            }
            cell.mean = std::accumulate(cell.accuracies.begin(), cell.accuracies.end(), 0.0) /
                        static_cast<double>(cell.accuracies.size());
            cells.push_back(std::move(cell));
        }
    }
    if (!options.summary_csv.empty()) {
        std::string text = "kernel,mode,stride,features,truncate,seeds,mean_acc\n";
        for (const auto& c : cells) {
            text += fmt::format("{},{},{},{},{},{},{:.4f}\n", k, shallow_mode_name(options.mode),
                                c.stride, c.features, c.truncate, c.accuracies.size(), c.mean);
        }
        write_text(options.summary_csv, text);
    }
    return cells;
}

#define HARMONIC_INSTANTIATE_EXPERIMENTS(T)                                                   \
    template ModelGraph<T> build_mnist_model<T>(ModelVariant, HarmonicAlgorithm, std::uint64_t); \
    template ModelGraph<T> build_shallow_model<T>(std::size_t, std::size_t, std::size_t, int,  \
                                                  ShallowMode, std::uint64_t);                \
    template ModelGraph<T> build_from_arch<T>(const std::string&, std::uint64_t);             \
    template ModelGraph<T> build_model<T>(const TrainConfig&);                                \
    template EvalResult evaluate<T>(ModelGraph<T>&, const LabeledDataset&, std::size_t);      \
    template TrainResult train<T>(ModelGraph<T>&, const LabeledDataset&,                      \
                                  const LabeledDataset&, const TrainConfig&);

HARMONIC_INSTANTIATE_EXPERIMENTS(float)
HARMONIC_INSTANTIATE_EXPERIMENTS(double)

#undef HARMONIC_INSTANTIATE_EXPERIMENTS

} // namespace harmonic
