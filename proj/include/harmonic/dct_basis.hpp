#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace harmonic {

// Frequency indices of one basis filter; u is the vertical (row) frequency, v the horizontal.
struct FrequencyPair {
    int u = 0;
    int v = 0;

    friend auto operator<=>(const FrequencyPair&, const FrequencyPair&) = default;
};

// The K x K two-dimensional DCT-II filter bank:
//   phi[u,v](x,y) = cos(pi/K (x + 1/2) u) * cos(pi/K (y + 1/2) v)
//   psi[u,v]      = phi[u,v] / ||phi[u,v]||_1
// x indexes rows and y columns. Filters are stored row-major, filter index u*K + v.
// Immutable after construction.
class FilterBank {
public:
    explicit FilterBank(std::size_t kernel);

    std::size_t kernel() const noexcept { return kernel_; }
    std::size_t filter_count() const noexcept { return kernel_ * kernel_; }

    std::span<const double> phi(FrequencyPair f) const;
    std::span<const double> psi(FrequencyPair f) const;
    double phi(FrequencyPair f, std::size_t x, std::size_t y) const;
    double psi(FrequencyPair f, std::size_t x, std::size_t y) const;

    // Every pair by ascending u+v, ties by ascending u.
    const std::vector<FrequencyPair>& zigzag() const noexcept { return zigzag_; }

    std::size_t index(FrequencyPair f) const;

private:
    std::size_t kernel_;
    std::vector<double> phi_;
    std::vector<double> psi_;
    std::vector<FrequencyPair> zigzag_;
};

FilterBank build_basis(int kernel);

// 1-D DCT-II vector cos(pi/K (x + 1/2) u), x = 0..K-1.
std::vector<double> cosine_vector(std::size_t kernel, int u);

// Pairs with u + v < lambda, in zigzag order.
std::vector<FrequencyPair> lambda_subset(const FilterBank& bank, int lambda);

// The first T pairs of the zigzag order.
std::vector<FrequencyPair> truncation_prefix(const FilterBank& bank, int count);

struct FilterExport {
    std::vector<std::filesystem::path> images;
    std::filesystem::path csv;
};

// Writes one binary PGM (P5, 8-bit) per selected filter, named psi_u<u>_v<v>.pgm, and psi.csv
// with header "u,v,x,y,value". Each image is rescaled min->0, max->255; constant filters
// are written as all 255.
FilterExport export_filters(const FilterBank& bank, std::span<const FrequencyPair> subset,
                            const std::filesystem::path& directory);

struct FilterSample {
    FrequencyPair pair;
    std::size_t x = 0;
    std::size_t y = 0;
    double value = 0.0;
};

std::vector<FilterSample> read_filter_csv(const std::filesystem::path& csv);

// Rescaled 8-bit pixels for one filter, as written to its PGM.
std::vector<unsigned char> filter_to_pixels(std::span<const double> filter);

} // namespace harmonic
