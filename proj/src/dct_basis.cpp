#include "harmonic/dct_basis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "harmonic/errors.hpp"

namespace harmonic {

std::vector<double> cosine_vector(std::size_t kernel, int u) {
    std::vector<double> out(kernel);
    const double k = static_cast<double>(kernel);
    for (std::size_t x = 0; x < kernel; ++x) {
        out[x] = std::cos(std::numbers::pi / k * (static_cast<double>(x) + 0.5) * u);
    }
    return out;
}

FilterBank::FilterBank(std::size_t kernel) : kernel_(kernel) {
    if (kernel == 0) {
        throw ValueError("filter bank size must be >= 1");
    }
    const std::size_t area = kernel * kernel;
    phi_.resize(area * area);
    psi_.resize(area * area);
    for (std::size_t u = 0; u < kernel; ++u) {
        const auto rows = cosine_vector(kernel, static_cast<int>(u));
        for (std::size_t v = 0; v < kernel; ++v) {
            const auto cols = cosine_vector(kernel, static_cast<int>(v));
            double* phi = phi_.data() + (u * kernel + v) * area;
            double* psi = psi_.data() + (u * kernel + v) * area;
            double l1 = 0.0;
            for (std::size_t x = 0; x < kernel; ++x) {
                for (std::size_t y = 0; y < kernel; ++y) {
                    phi[x * kernel + y] = rows[x] * cols[y];
                    l1 += std::abs(phi[x * kernel + y]);
                }
            }
            for (std::size_t i = 0; i < area; ++i) {
                psi[i] = phi[i] / l1;
            }
        }
    }
    for (int s = 0; s <= 2 * static_cast<int>(kernel) - 2; ++s) {
        for (int u = 0; u < static_cast<int>(kernel); ++u) {
            const int v = s - u;
            if (v >= 0 && v < static_cast<int>(kernel)) {
                zigzag_.push_back({u, v});
            }
        }
    }
}

std::size_t FilterBank::index(FrequencyPair f) const {
    if (f.u < 0 || f.v < 0 || static_cast<std::size_t>(f.u) >= kernel_ ||
        static_cast<std::size_t>(f.v) >= kernel_) {
        throw ValueError("frequency pair (" + std::to_string(f.u) + "," + std::to_string(f.v) +
                         ") outside a " + std::to_string(kernel_) + "x" +
                         std::to_string(kernel_) + " bank");
    }
    return static_cast<std::size_t>(f.u) * kernel_ + static_cast<std::size_t>(f.v);
}

std::span<const double> FilterBank::phi(FrequencyPair f) const {
    const std::size_t area = kernel_ * kernel_;
    return {phi_.data() + index(f) * area, area};
}

std::span<const double> FilterBank::psi(FrequencyPair f) const {
    const std::size_t area = kernel_ * kernel_;
    return {psi_.data() + index(f) * area, area};
}

double FilterBank::phi(FrequencyPair f, std::size_t x, std::size_t y) const {
    return phi(f)[x * kernel_ + y];
}

double FilterBank::psi(FrequencyPair f, std::size_t x, std::size_t y) const {
    return psi(f)[x * kernel_ + y];
}

FilterBank build_basis(int kernel) {
    if (kernel < 1) {
        throw ValueError("filter bank size must be >= 1, got " + std::to_string(kernel));
    }
    return FilterBank(static_cast<std::size_t>(kernel));
}

std::vector<FrequencyPair> lambda_subset(const FilterBank& bank, int lambda) {
    if (lambda < 1) {
        throw ValueError("lambda must be >= 1, got " + std::to_string(lambda));
    }
    std::vector<FrequencyPair> out;
    for (const FrequencyPair& f : bank.zigzag()) {
        if (f.u + f.v < lambda) {
            out.push_back(f);
        }
    }
    return out;
}

std::vector<FrequencyPair> truncation_prefix(const FilterBank& bank, int count) {
    if (count < 1 || static_cast<std::size_t>(count) > bank.filter_count()) {
        throw ValueError("truncation count " + std::to_string(count) + " outside [1, " +
                         std::to_string(bank.filter_count()) + "]");
    }
    const auto& order = bank.zigzag();
    return {order.begin(), order.begin() + count};
}

std::vector<unsigned char> filter_to_pixels(std::span<const double> filter) {
    const auto [lo_it, hi_it] = std::minmax_element(filter.begin(), filter.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<unsigned char> pixels(filter.size(), 255);
    if (hi > lo) {
        for (std::size_t i = 0; i < filter.size(); ++i) {
            pixels[i] = static_cast<unsigned char>(std::lround((filter[i] - lo) / (hi - lo) * 255.0));
        }
    }
    return pixels;
}

FilterExport export_filters(const FilterBank& bank, std::span<const FrequencyPair> subset,
                            const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) {
        throw IoError("cannot create " + directory.string() + ": " + ec.message());
    }
    FilterExport result;
    result.csv = directory / "psi.csv";
    std::ofstream csv(result.csv);
    if (!csv) {
        throw IoError("cannot write " + result.csv.string());
    }
    csv << "u,v,x,y,value\n";
    csv.precision(17);
    const std::size_t k = bank.kernel();
    for (const FrequencyPair& f : subset) {
        const auto psi = bank.psi(f);
        const auto path =
            directory / ("psi_u" + std::to_string(f.u) + "_v" + std::to_string(f.v) + ".pgm");
        std::ofstream pgm(path, std::ios::binary);
        if (!pgm) {
            throw IoError("cannot write " + path.string());
        }
        pgm << "P5\n" << k << " " << k << "\n255\n";
        const auto pixels = filter_to_pixels(psi);
        pgm.write(reinterpret_cast<const char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size()));
        if (!pgm) {
            throw IoError("short write on " + path.string());
        }
        result.images.push_back(path);
        for (std::size_t x = 0; x < k; ++x) {
            for (std::size_t y = 0; y < k; ++y) {
                csv << f.u << ',' << f.v << ',' << x << ',' << y << ',' << psi[x * k + y] << '\n';
            }
        }
    }
    if (!csv) {
        throw IoError("short write on " + result.csv.string());
    }
    return result;
}

std::vector<FilterSample> read_filter_csv(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) {
        throw IoError("cannot read " + csv.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "u,v,x,y,value") {
        throw FormatError(csv.string() + ": missing header u,v,x,y,value");
    }
    std::vector<FilterSample> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        FilterSample s;
        char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
        if (!(row >> s.pair.u >> c1 >> s.pair.v >> c2 >> s.x >> c3 >> s.y >> c4 >> s.value) ||
            c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
            throw FormatError(csv.string() + ": bad row '" + line + "'");
        }
        out.push_back(s);
    }
    return out;
}

} // namespace harmonic
