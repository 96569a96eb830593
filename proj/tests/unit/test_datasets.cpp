#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "harmonic/datasets.hpp"
#include "oracles.hpp"

using namespace harmonic;
using harmonic::testing::TempDir;

namespace {

RawImages synthetic(std::size_t count, std::size_t channels, std::size_t rows, std::size_t cols,
                    std::uint64_t seed) {
    Rng rng(seed);
    RawImages raw;
    raw.channels = channels;
    raw.rows = rows;
    raw.cols = cols;
    raw.pixels.resize(count * channels * rows * cols);
    for (auto& p : raw.pixels) {
        p = static_cast<std::uint8_t>(rng.below(256));
    }
    for (std::size_t i = 0; i < count; ++i) {
        raw.labels.push_back(static_cast<int>(i % 10));
    }
    return raw;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> s));
    }
}

// Hand-assembled IDX pair, independent of the library writer.
void write_idx_by_hand(const RawImages& raw, const std::filesystem::path& images,
                       const std::filesystem::path& labels) {
    std::vector<std::uint8_t> img;
    put_be32(img, 0x00000803);
    put_be32(img, static_cast<std::uint32_t>(raw.count()));
    put_be32(img, static_cast<std::uint32_t>(raw.rows));
    put_be32(img, static_cast<std::uint32_t>(raw.cols));
    img.insert(img.end(), raw.pixels.begin(), raw.pixels.end());
    write_bytes(images, img);
    std::vector<std::uint8_t> lab;
    put_be32(lab, 0x00000801);
    put_be32(lab, static_cast<std::uint32_t>(raw.count()));
    for (int l : raw.labels) {
        lab.push_back(static_cast<std::uint8_t>(l));
    }
    write_bytes(labels, lab);
}

} // namespace

TEST(Mnist, HandWrittenIdxRoundTrip) {
    TempDir dir("idx");
    const auto raw = synthetic(20, 1, 5, 4, 1);
    write_idx_by_hand(raw, dir / "img", dir / "lab");
    const auto back = read_mnist_idx(dir / "img", dir / "lab");
    EXPECT_EQ(back.pixels, raw.pixels);
    EXPECT_EQ(back.labels, raw.labels);
    EXPECT_EQ(back.rows, 5u);
    EXPECT_EQ(back.cols, 4u);
    // library writer produces the same bytes
    write_mnist_idx(raw, dir / "img2", dir / "lab2");
    EXPECT_EQ(read_bytes(dir / "img2"), read_bytes(dir / "img"));
    EXPECT_EQ(read_bytes(dir / "lab2"), read_bytes(dir / "lab"));
}

TEST(Mnist, PixelNormalization) {
    TempDir dir("norm");
    auto raw = synthetic(10, 1, 2, 2, 2);
    raw.pixels[0] = 0;
    raw.pixels[1] = 255;
    write_mnist_idx(raw, dir / "img", dir / "lab");
    const auto ds = load_mnist_idx(dir / "img", dir / "lab");
    EXPECT_EQ(ds.images.dims(), (Shape{10, 1, 2, 2}));
    EXPECT_FLOAT_EQ(ds.images[0], static_cast<float>((0.0 - 0.1307) / 0.3081));
    EXPECT_FLOAT_EQ(ds.images[1], static_cast<float>((1.0 - 0.1307) / 0.3081));
    const double x = raw.pixels[7] / 255.0;
    EXPECT_FLOAT_EQ(ds.images[7], static_cast<float>((x - 0.1307) / 0.3081));
}

TEST(Mnist, RejectsWrongMagic) {
    TempDir dir("magic");
    const auto raw = synthetic(10, 1, 3, 3, 3);
    write_mnist_idx(raw, dir / "img", dir / "lab");
    // labels file passed as images
    EXPECT_THROW(read_mnist_idx(dir / "lab", dir / "lab"), FormatError);
    EXPECT_THROW(read_mnist_idx(dir / "img", dir / "img"), FormatError);
}

TEST(Mnist, RejectsTruncationAndMismatch) {
    TempDir dir("trunc");
    const auto raw = synthetic(10, 1, 3, 3, 4);
    write_mnist_idx(raw, dir / "img", dir / "lab");
    auto bytes = read_bytes(dir / "img");
    bytes.pop_back();
    write_bytes(dir / "short", bytes);
    EXPECT_THROW(read_mnist_idx(dir / "short", dir / "lab"), FormatError);
    const auto fewer = synthetic(9, 1, 3, 3, 5);
    write_mnist_idx(fewer, dir / "img9", dir / "lab9");
    EXPECT_THROW(read_mnist_idx(dir / "img", dir / "lab9"), FormatError);
    EXPECT_THROW(read_mnist_idx(dir / "missing", dir / "lab"), IoError);
}

TEST(Cifar, RecordLayout) {
    TempDir dir("cifar");
    const auto raw = synthetic(3, 3, 32, 32, 6);
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i < 3; ++i) {
        bytes.push_back(static_cast<std::uint8_t>(raw.labels[i]));
        bytes.insert(bytes.end(), raw.pixels.begin() + static_cast<long>(i * 3072),
                     raw.pixels.begin() + static_cast<long>((i + 1) * 3072));
    }
    write_bytes(dir / "b.bin", bytes);
    const std::vector<std::filesystem::path> files{dir / "b.bin"};
    const auto back = read_cifar10_bin(files);
    ASSERT_EQ(back.count(), 3u);
    // pixel (c,y,x) of record i is byte 1 + c*1024 + y*32 + x of that record
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y : {0u, 13u, 31u}) {
                for (std::size_t x : {0u, 7u, 31u}) {
                    EXPECT_EQ(back.pixels[i * 3072 + c * 1024 + y * 32 + x],
                              bytes[i * 3073 + 1 + c * 1024 + y * 32 + x]);
                }
            }
        }
    }
    write_cifar10_bin(raw, dir / "c.bin");
    EXPECT_EQ(read_bytes(dir / "c.bin"), bytes);
    const auto ds = load_cifar10_bin(files);
    EXPECT_EQ(ds.images.dims(), (Shape{3, 3, 32, 32}));
    const double v = bytes[1 + 2 * 1024 + 5] / 255.0;
    EXPECT_FLOAT_EQ(ds.images(0, 2, 0, 5), static_cast<float>((v - 0.4465) / 0.2616));
}

TEST(Cifar, SingleRecordAndBadLengths) {
    TempDir dir("cifar1");
    std::vector<std::uint8_t> one(3073, 17);
    one[0] = 4;
    write_bytes(dir / "one.bin", one);
    std::vector<std::filesystem::path> files{dir / "one.bin"};
    EXPECT_EQ(read_cifar10_bin(files).count(), 1u);
    one.push_back(0);
    write_bytes(dir / "bad.bin", one);
    files = {dir / "bad.bin"};
    EXPECT_THROW(read_cifar10_bin(files), FormatError);
    std::vector<std::uint8_t> label(3073, 0);
    label[0] = 10;
    write_bytes(dir / "label.bin", label);
    files = {dir / "label.bin"};
    EXPECT_THROW(read_cifar10_bin(files), FormatError);
}

TEST(Stats, ComputedFromPixels) {
    RawImages raw;
    raw.channels = 1;
    raw.rows = 1;
    raw.cols = 2;
    raw.pixels = {0, 255, 255, 255};
    raw.labels = {0, 1};
    const auto s = compute_stats(raw);
    EXPECT_NEAR(s.mean[0], 0.75, 1e-12);
    EXPECT_NEAR(s.std[0], std::sqrt(0.75 * 0.25), 1e-12);
}

TEST(Subset, BalancedHistogramAndDeterminism) {
    const auto raw = synthetic(1000, 1, 2, 2, 7);
    const auto ds = normalize_images(raw, mnist_stats(), "synthetic");
    const auto a = balanced_subset(ds, SubsetSpec{300, 42});
    EXPECT_EQ(a.size(), 300u);
    for (std::size_t c : a.class_histogram()) {
        EXPECT_EQ(c, 30u);
    }
    const auto ia = balanced_indices(ds.labels, 10, SubsetSpec{300, 42});
    const auto ib = balanced_indices(ds.labels, 10, SubsetSpec{300, 42});
    EXPECT_EQ(ia, ib);
    EXPECT_EQ(std::set<std::size_t>(ia.begin(), ia.end()).size(), 300u);
    const auto ic = balanced_indices(ds.labels, 10, SubsetSpec{300, 43});
    EXPECT_NE(ia, ic);
    EXPECT_EQ(balanced_subset(ds, SubsetSpec{300, 42}).images, a.images);
}

TEST(Subset, FullSizeIsPermutation) {
    const auto raw = synthetic(100, 1, 1, 1, 8);
    const auto ds = normalize_images(raw, mnist_stats(), "synthetic");
    const auto idx = balanced_indices(ds.labels, 10, SubsetSpec{100, 1});
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 100; ++i) {
        EXPECT_EQ(sorted[i], i);
    }
}

TEST(Subset, Errors) {
    const auto raw = synthetic(100, 1, 1, 1, 9);
    const auto ds = normalize_images(raw, mnist_stats(), "synthetic");
    EXPECT_THROW(balanced_subset(ds, SubsetSpec{105, 1}), ValueError);
    EXPECT_THROW(balanced_subset(ds, SubsetSpec{110, 1}), ValueError);
}

TEST(Paths, EnvironmentRoot) {
    ::setenv("HARM_DATA_DIR", "/some/where", 1);
    EXPECT_EQ(default_data_root(), std::filesystem::path("/some/where"));
    ::unsetenv("HARM_DATA_DIR");
    EXPECT_EQ(default_data_root(), std::filesystem::path("data"));
}

// Runs only when the canonical files are present.
TEST(Mnist, CanonicalFiles) {
    const char* env = std::getenv("HARM_DATA_DIR");
    const std::filesystem::path root = env ? env : "/root/data";
    try {
        const auto train = load_mnist(root, true);
        EXPECT_EQ(train.images.dims(), (Shape{60000, 1, 28, 28}));
        for (int l : train.labels) {
            ASSERT_TRUE(l >= 0 && l < 10);
        }
        const auto sub = balanced_subset(train, SubsetSpec{300, 0});
        for (std::size_t c : sub.class_histogram()) {
            EXPECT_EQ(c, 30u);
        }
    } catch (const IoError&) {
        GTEST_SKIP() << "MNIST not found under " << root;
    }
}
