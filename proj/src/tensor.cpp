#include "harmonic/tensor.hpp"

namespace harmonic {

std::size_t shape_size(const Shape& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& dims) {
    std::string out = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(dims[i]);
    }
    return out + "]";
}

std::string_view dtype_name(DType dtype) {
    return dtype == DType::f32 ? "f32" : "f64";
}

DType parse_dtype(std::string_view name) {
    if (name == "f32" || name == "float32") {
        return DType::f32;
    }
    if (name == "f64" || name == "float64") {
        return DType::f64;
    }
    throw ValueError("unknown dtype '" + std::string(name) + "' (expected f32 or f64)");
}

} // namespace harmonic
