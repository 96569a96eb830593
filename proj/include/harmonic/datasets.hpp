#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "harmonic/tensor.hpp"

namespace harmonic {

// Undecoded 8-bit images with labels, channel-major per image.
struct RawImages {
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;
    std::size_t channels = 1;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t count() const noexcept { return labels.size(); }
    std::size_t image_size() const noexcept { return channels * rows * cols; }
};

// Per-channel statistics of x/255.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std;
};

inline const ChannelStats& mnist_stats() {
    static const ChannelStats s{{0.1307}, {0.3081}};
    return s;
}

inline const ChannelStats& cifar10_stats() {
    static const ChannelStats s{{0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}};
    return s;
}

struct LabeledDataset {
    Tensor<float> images;  // [B,C,H,W], normalized
    std::vector<int> labels;
    int class_count = 10;
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
    // Throws FormatError if labels, shapes or values break the dataset contract.
    void validate() const;
    // Samples at the given indices, in that order.
    LabeledDataset select(std::span<const std::size_t> indices) const;
    std::vector<std::size_t> class_histogram() const;
};

struct SubsetSpec {
    std::size_t size = 0;
    std::uint64_t seed = 0;

    // Throws ValueError unless size divides evenly into classes.
    std::size_t per_class(int class_count) const;
};

// Big-endian IDX files: images magic 0x00000803, labels magic 0x00000801.
RawImages read_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// Concatenation of CIFAR-10 binary batches, 3073-byte records.
RawImages read_cifar10_bin(std::span<const std::filesystem::path> batches);

// (x/255 - mean[c]) / std[c]
LabeledDataset normalize_images(const RawImages& raw, const ChannelStats& stats, std::string name,
                                int class_count = 10);

LabeledDataset load_mnist_idx(const std::filesystem::path& images,
                              const std::filesystem::path& labels);
LabeledDataset load_cifar10_bin(std::span<const std::filesystem::path> batches);

// Mean and population standard deviation of x/255 per channel.
ChannelStats compute_stats(const RawImages& raw);

// Exactly size/class_count samples of every class drawn without replacement, then shuffled.
LabeledDataset balanced_subset(const LabeledDataset& ds, const SubsetSpec& spec);
std::vector<std::size_t> balanced_indices(std::span<const int> labels, int class_count,
                                          const SubsetSpec& spec);

void write_mnist_idx(const RawImages& raw, const std::filesystem::path& images,
                     const std::filesystem::path& labels);
void write_cifar10_bin(const RawImages& raw, const std::filesystem::path& path);

// HARM_DATA_DIR if set, otherwise "data".
std::filesystem::path default_data_root();

struct MnistFiles {
    std::filesystem::path images;
    std::filesystem::path labels;
};

// Looks in <root>/mnist and then <root> for the canonical file names.
MnistFiles mnist_files(const std::filesystem::path& root, bool train);
// <root>/cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin, also accepting <root> itself.
std::vector<std::filesystem::path> cifar10_files(const std::filesystem::path& root, bool train);

LabeledDataset load_mnist(const std::filesystem::path& root, bool train);
LabeledDataset load_cifar10(const std::filesystem::path& root, bool train);

} // namespace harmonic
