#include "harmonic/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "harmonic/errors.hpp"
#include "harmonic/rng.hpp"

namespace harmonic {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed: " + path.string());
    }
    return bytes;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const fs::path& path) {
    if (at + 4 > b.size()) {
        throw FormatError(path.string() + ": truncated IDX header");
    }
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) {
        s += digits[(v >> shift) & 0xF];
    }
    return s;
}

} // namespace

void LabeledDataset::validate() const {
    if (labels.empty()) {
        throw FormatError(name + ": empty dataset");
    }
    if (images.rank() != 4 || images.dim(0) != labels.size()) {
        throw FormatError(name + ": images " + shape_str(images.dims()) + " vs " +
                          std::to_string(labels.size()) + " labels");
    }
    for (int l : labels) {
        if (l < 0 || l >= class_count) {
            throw FormatError(name + ": label " + std::to_string(l) + " outside [0, " +
                              std::to_string(class_count) + ")");
        }
    }
    if (!images.all_finite()) {
        throw FormatError(name + ": non-finite pixel values");
    }
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
    Shape dims = images.dims();
    const std::size_t per = dims.empty() || dims[0] == 0 ? 0 : images.size() / dims[0];
    dims[0] = indices.size();
    LabeledDataset out;
    out.images = Tensor<float>(dims);
    out.labels.reserve(indices.size());
    out.class_count = class_count;
    out.name = name;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= labels.size()) {
            throw ValueError("sample index " + std::to_string(src) + " out of range");
        }
        std::copy_n(images.data() + src * per, per, out.images.data() + i * per);
        out.labels.push_back(labels[src]);
    }
    return out;
}

std::vector<std::size_t> LabeledDataset::class_histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(class_count), 0);
    for (int l : labels) {
        ++h.at(static_cast<std::size_t>(l));
    }
    return h;
}

std::size_t SubsetSpec::per_class(int class_count) const {
    if (class_count <= 0) {
        throw ValueError("class count must be positive");
    }
    const auto c = static_cast<std::size_t>(class_count);
    if (size == 0 || size % c != 0) {
        throw ValueError("subset size " + std::to_string(size) + " is not a positive multiple of " +
                         std::to_string(class_count) + " classes");
    }
    return size / c;
}

RawImages read_mnist_idx(const fs::path& images, const fs::path& labels) {
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    const std::uint32_t im = be32(ib, 0, images);
    if (im != kIdxImages) {
        throw FormatError(images.string() + ": images magic " + hex(im) + ", expected " +
                          hex(kIdxImages));
    }
    const std::uint32_t lm = be32(lb, 0, labels);
    if (lm != kIdxLabels) {
        throw FormatError(labels.string() + ": labels magic " + hex(lm) + ", expected " +
                          hex(kIdxLabels));
    }
    const std::size_t count = be32(ib, 4, images);
    RawImages raw;
    raw.rows = be32(ib, 8, images);
    raw.cols = be32(ib, 12, images);
    const std::size_t label_count = be32(lb, 4, labels);
    if (count != label_count) {
        throw FormatError("image count " + std::to_string(count) + " != label count " +
                          std::to_string(label_count));
    }
    const std::size_t pixel_bytes = count * raw.rows * raw.cols;
    if (ib.size() != 16 + pixel_bytes) {
        throw FormatError(images.string() + ": expected " + std::to_string(16 + pixel_bytes) +
                          " bytes, found " + std::to_string(ib.size()));
    }
    if (lb.size() != 8 + count) {
        throw FormatError(labels.string() + ": expected " + std::to_string(8 + count) +
                          " bytes, found " + std::to_string(lb.size()));
    }
    raw.pixels.assign(ib.begin() + 16, ib.end());
    raw.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int l = lb[8 + i];
        if (l > 9) {
            throw FormatError(labels.string() + ": label " + std::to_string(l) + " > 9");
        }
        raw.labels.push_back(l);
    }
    return raw;
}

RawImages read_cifar10_bin(std::span<const fs::path> batches) {
    RawImages raw;
    raw.channels = 3;
    raw.rows = kCifarSide;
    raw.cols = kCifarSide;
    for (const fs::path& path : batches) {
        const auto bytes = read_file(path);
        if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
            throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                              " is not a positive multiple of " + std::to_string(kCifarRecord));
        }
        for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
            const int l = bytes[off];
            if (l > 9) {
                throw FormatError(path.string() + ": label " + std::to_string(l) + " > 9");
            }
            raw.labels.push_back(l);
            raw.pixels.insert(raw.pixels.end(), bytes.begin() + static_cast<std::ptrdiff_t>(off + 1),
                              bytes.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecord));
        }
    }
    return raw;
}

LabeledDataset normalize_images(const RawImages& raw, const ChannelStats& stats, std::string name,
                                int class_count) {
    if (stats.mean.size() != raw.channels || stats.std.size() != raw.channels) {
        throw ValueError("normalization stats do not match " + std::to_string(raw.channels) +
                         " channels");
    }
    LabeledDataset ds;
    ds.name = std::move(name);
    ds.class_count = class_count;
    ds.labels = raw.labels;
    ds.images = Tensor<float>({raw.count(), raw.channels, raw.rows, raw.cols});
    const std::size_t plane = raw.rows * raw.cols;
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        const std::size_t c = (i / plane) % raw.channels;
        ds.images[i] = static_cast<float>((raw.pixels[i] / 255.0 - stats.mean[c]) / stats.std[c]);
    }
    ds.validate();
    return ds;
}

LabeledDataset load_mnist_idx(const fs::path& images, const fs::path& labels) {
    return normalize_images(read_mnist_idx(images, labels), mnist_stats(), "mnist");
}

LabeledDataset load_cifar10_bin(std::span<const fs::path> batches) {
    return normalize_images(read_cifar10_bin(batches), cifar10_stats(), "cifar10");
}

ChannelStats compute_stats(const RawImages& raw) {
    if (raw.count() == 0) {
        throw ValueError("statistics of an empty dataset");
    }
    std::vector<double> sum(raw.channels, 0.0);
    std::vector<double> sq(raw.channels, 0.0);
    const std::size_t plane = raw.rows * raw.cols;
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        const std::size_t c = (i / plane) % raw.channels;
        const double x = raw.pixels[i] / 255.0;
        sum[c] += x;
        sq[c] += x * x;
    }
    const double n = static_cast<double>(raw.count() * plane);
    ChannelStats s;
    for (std::size_t c = 0; c < raw.channels; ++c) {
        const double mean = sum[c] / n;
        s.mean.push_back(mean);
        s.std.push_back(std::sqrt(std::max(0.0, sq[c] / n - mean * mean)));
    }
    return s;
}

std::vector<std::size_t> balanced_indices(std::span<const int> labels, int class_count,
                                          const SubsetSpec& spec) {
    const std::size_t per = spec.per_class(class_count);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
    }
    Rng rng(spec.seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(spec.size);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& pool = by_class[c];
        if (pool.size() < per) {
            throw ValueError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                             " samples, subset needs " + std::to_string(per));
        }
        // partial Fisher-Yates: the first `per` slots become a uniform draw without replacement
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per));
    }
    rng.shuffle(std::span<std::size_t>(chosen));
    return chosen;
}

LabeledDataset balanced_subset(const LabeledDataset& ds, const SubsetSpec& spec) {
    const auto idx = balanced_indices(ds.labels, ds.class_count, spec);
    return ds.select(idx);
}

void write_mnist_idx(const RawImages& raw, const fs::path& images, const fs::path& labels) {
    if (raw.channels != 1 || raw.pixels.size() != raw.count() * raw.image_size()) {
        throw ValueError("IDX images must be single-channel with matching pixel count");
    }
    std::vector<std::uint8_t> ib;
    put_be32(ib, kIdxImages);
    put_be32(ib, static_cast<std::uint32_t>(raw.count()));
    put_be32(ib, static_cast<std::uint32_t>(raw.rows));
    put_be32(ib, static_cast<std::uint32_t>(raw.cols));
    ib.insert(ib.end(), raw.pixels.begin(), raw.pixels.end());
    std::vector<std::uint8_t> lb;
    put_be32(lb, kIdxLabels);
    put_be32(lb, static_cast<std::uint32_t>(raw.count()));
    for (int l : raw.labels) {
        lb.push_back(static_cast<std::uint8_t>(l));
    }
    write_file(images, ib);
    write_file(labels, lb);
}

void write_cifar10_bin(const RawImages& raw, const fs::path& path) {
    if (raw.channels != 3 || raw.rows != kCifarSide || raw.cols != kCifarSide ||
        raw.pixels.size() != raw.count() * raw.image_size()) {
        throw ValueError("CIFAR-10 records must be 3x32x32");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(raw.count() * kCifarRecord);
    for (std::size_t i = 0; i < raw.count(); ++i) {
        bytes.push_back(static_cast<std::uint8_t>(raw.labels[i]));
        const auto first = raw.pixels.begin() + static_cast<std::ptrdiff_t>(i * raw.image_size());
        bytes.insert(bytes.end(), first, first + static_cast<std::ptrdiff_t>(raw.image_size()));
    }
    write_file(path, bytes);
}

fs::path default_data_root() {
    if (const char* env = std::getenv("HARM_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data";
}

MnistFiles mnist_files(const fs::path& root, bool train) {
    const std::string prefix = train ? "train" : "t10k";
    for (const fs::path& dir : {root / "mnist", root}) {
        MnistFiles f{dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte")};
        if (fs::exists(f.images) && fs::exists(f.labels)) {
            return f;
        }
    }
    throw IoError("MNIST " + prefix + " files not found under " + root.string() +
                  " (expected " + prefix + "-images-idx3-ubyte and " + prefix +
                  "-labels-idx1-ubyte)");
}

std::vector<fs::path> cifar10_files(const fs::path& root, bool train) {
    for (const fs::path& dir : {root / "cifar-10-batches-bin", root}) {
        std::vector<fs::path> files;
        if (train) {
            for (int i = 1; i <= 5; ++i) {
                files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
            }
        } else {
            files.push_back(dir / "test_batch.bin");
        }
        if (std::all_of(files.begin(), files.end(), [](const fs::path& p) { return fs::exists(p); })) {
            return files;
        }
    }
    throw IoError("CIFAR-10 binary batches not found under " + root.string() +
                  " (expected cifar-10-batches-bin/data_batch_1.bin ... test_batch.bin)");
}

LabeledDataset load_mnist(const fs::path& root, bool train) {
    const MnistFiles f = mnist_files(root, train);
    LabeledDataset ds = load_mnist_idx(f.images, f.labels);
    ds.name = train ? "mnist-train" : "mnist-test";
    return ds;
}

LabeledDataset load_cifar10(const fs::path& root, bool train) {
    const auto files = cifar10_files(root, train);
    LabeledDataset ds = load_cifar10_bin(files);
    ds.name = train ? "cifar10-train" : "cifar10-test";
    return ds;
}

} // namespace harmonic
