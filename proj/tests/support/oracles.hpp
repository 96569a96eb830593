#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>

#include "harmonic/rng.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic::testing {

template <typename T>
Tensor<T> random_tensor(Shape dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(dims));
    for (auto& v : t.values()) {
        v = static_cast<T>(rng.uniform(lo, hi));
    }
    return t;
}

// Direct summation over the receptive field, zero padding, no kernel flip.
inline Tensor<double> direct_conv(const Tensor<double>& x, const Tensor<double>& k,
                                  std::size_t stride, std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t o = k.dim(0), kk = k.dim(2);
    const std::size_t oh = (h + 2 * pad - kk) / stride + 1;
    const std::size_t ow = (w + 2 * pad - kk) / stride + 1;
    Tensor<double> out({n, o, oh, ow});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t f = 0; f < o; ++f) {
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j) {
                    double s = 0.0;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        for (std::size_t p = 0; p < kk; ++p) {
                            for (std::size_t q = 0; q < kk; ++q) {
                                const auto r = static_cast<long>(i * stride + p) - static_cast<long>(pad);
                                const auto s2 = static_cast<long>(j * stride + q) - static_cast<long>(pad);
                                if (r < 0 || s2 < 0 || r >= static_cast<long>(h) ||
                                    s2 >= static_cast<long>(w)) {
                                    continue;
                                }
                                s += x(b, ch, static_cast<std::size_t>(r), static_cast<std::size_t>(s2)) *
                                     k(f, ch, p, q);
                            }
                        }
                    }
                    out(b, f, i, j) = s;
                }
            }
        }
    }
    return out;
}

// Central difference of a scalar function of one tensor, coordinate by coordinate.
inline Tensor<double> numeric_gradient(Tensor<double>& theta,
                                       const std::function<double()>& objective,
                                       double step_scale = 1e-5) {
    Tensor<double> g(theta.dims());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        const double h = step_scale * std::max(1.0, std::abs(orig));
        theta[i] = orig + h;
        const double up = objective();
        theta[i] = orig - h;
        const double down = objective();
        theta[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// max over i of |a - b| / max(1, |a|, |b|)
inline double max_relative_error(const Tensor<double>& a, const Tensor<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                                       std::filesystem::file_time_type::clock::now()
                                                           .time_since_epoch()
                                                           .count()));
        path_ = std::filesystem::temp_directory_path() /
                ("harmonic_" + tag + "_" + std::to_string(rng.next_u64()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace harmonic::testing
