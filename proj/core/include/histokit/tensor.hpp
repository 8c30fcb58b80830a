#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "histokit/error.hpp"

namespace histokit {

inline std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_to_string(const std::vector<int>& shape);

// Dense n-dimensional array, row-major. Float for the pipeline, double for
// the 64-bit gradient-check path.
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> shp, S fill = S(0))
        : shape(std::move(shp)), data(shape_size(shape), fill) {
        for (const int d : shape) {
            if (d <= 0) throw DimensionError("tensor dimension must be positive, got " + shape_to_string(shape));
        }
    }

    static TensorT from(std::vector<int> shp, std::vector<S> values) {
        TensorT t(std::move(shp));
        if (values.size() != t.data.size()) {
            throw DimensionError("tensor data length " + std::to_string(values.size()) +
                                 " does not match shape " + shape_to_string(t.shape));
        }
        t.data = std::move(values);
        return t;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t size() const { return data.size(); }

    S& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    S operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

    S& operator()(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    S operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }

    S& operator()(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    S operator()(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    S& operator()(int i, int j, int k, int l) {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    S operator()(int i, int j, int k, int l) const {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class To, class From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out;
    out.shape = t.shape;
    out.data.reserve(t.data.size());
    for (const From v : t.data) out.data.push_back(static_cast<To>(v));
    return out;
}

inline void require_shape(const std::vector<int>& got, const std::vector<int>& want,
                          const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected shape " + shape_to_string(want) +
                             ", got " + shape_to_string(got));
    }
}

}  // namespace histokit
