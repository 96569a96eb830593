#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "harmonic/errors.hpp"

namespace harmonic {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

enum class DType : std::uint8_t { f32, f64 };

// Train mode uses batch statistics and records caches for backward; eval mode uses running
// statistics.
enum class Mode : std::uint8_t { train, eval };

std::size_t shape_size(const Shape& dims);
std::string shape_str(const Shape& dims);
std::string_view dtype_name(DType dtype);
DType parse_dtype(std::string_view name);

template <typename T>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "tensors hold float or double");
    if constexpr (std::is_same_v<T, float>) {
        return DType::f32;
    } else {
        return DType::f64;
    }
}

// Dense row-major array of rank <= 4. Feature maps are laid out (batch, channel, height, width).
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)) {
        check_rank();
        elems_.assign(shape_size(dims_), fill);
    }

    Tensor(Shape dims, std::vector<T> values) : dims_(std::move(dims)), elems_(std::move(values)) {
        check_rank();
        if (shape_size(dims_) != elems_.size()) {
            throw ShapeError("tensor of shape " + shape_str(dims_) + " cannot hold " +
                             std::to_string(elems_.size()) + " values");
        }
    }

    static constexpr DType dtype() { return dtype_of<T>(); }

    const Shape& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= dims_.size()) {
            throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(dims_));
        }
        return dims_[axis];
    }
    std::size_t size() const noexcept { return elems_.size(); }
    bool empty() const noexcept { return elems_.empty(); }

    T* data() noexcept { return elems_.data(); }
    const T* data() const noexcept { return elems_.data(); }
    std::span<T> values() noexcept { return elems_; }
    std::span<const T> values() const noexcept { return elems_; }

    T& operator[](std::size_t i) noexcept { return elems_[i]; }
    const T& operator[](std::size_t i) const noexcept { return elems_[i]; }

    T& operator()(std::size_t i, std::size_t j) noexcept { return elems_[i * dims_[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept {
        return elems_[i * dims_[1] + j];
    }
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return elems_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return elems_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }

    // Same buffer, new extents; the element count must match.
    Tensor reshaped(Shape dims) const& {
        Tensor out(*this);
        out.reshape(std::move(dims));
        return out;
    }
    Tensor reshaped(Shape dims) && {
        reshape(std::move(dims));
        return std::move(*this);
    }
    void reshape(Shape dims) {
        if (shape_size(dims) != elems_.size()) {
            throw ShapeError("cannot reshape " + shape_str(dims_) + " to " + shape_str(dims));
        }
        dims_ = std::move(dims);
        check_rank();
    }

    void fill(T value) { std::fill(elems_.begin(), elems_.end(), value); }

    bool all_finite() const noexcept {
        for (T v : elems_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(elems_.begin(), elems_.end());
        return Tensor<U>(dims_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.dims_ == b.dims_ && a.elems_ == b.elems_;
    }

private:
    void check_rank() const {
        if (dims_.size() > kMaxRank) {
            throw ShapeError("rank " + std::to_string(dims_.size()) + " exceeds 4");
        }
    }

    Shape dims_;
    std::vector<T> elems_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.dims());
}

// Throws NumericError naming `what` when any element is NaN or Inf.
template <typename T>
void require_finite(const Tensor<T>& t, std::string_view what) {
    if (!t.all_finite()) {
        throw NumericError("non-finite value in " + std::string(what));
    }
}

// Largest |a - b| over all elements; shapes must match.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError("max_abs_diff: " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return worst;
}

// max|a - b| / max(1e-30, max|b|): the scale-aware comparison used by the equivalence suites.
template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double scale = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        scale = std::max(scale, std::abs(static_cast<double>(b[i])));
    }
    const double diff = max_abs_diff(a, b);
    if (scale == 0.0) {
        return diff;
    }
    return diff / scale;
}

} // namespace harmonic
