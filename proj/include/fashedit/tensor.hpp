#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "fashedit/common.hpp"

namespace fashedit {

// Dense row-major tensor. Most of the compute path works on rank-2 views
// (token matrices); latents are rank-3 [C, h, w] and move through
// patchify/unpatchify.
template <typename S>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shp, S fill = S(0))
        : shape(std::move(shp)), data((size_t)numel_of(shape), fill) {}

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }
    int64_t numel() const { return (int64_t)data.size(); }

    int64_t rows() const {
        if (shape.size() != 2) fail(ErrorKind::Shape, "rows(): tensor is not rank 2");
        return shape[0];
    }
    int64_t cols() const {
        if (shape.size() != 2) fail(ErrorKind::Shape, "cols(): tensor is not rank 2");
        return shape[1];
    }

    S& operator[](int64_t i) { return data[(size_t)i]; }
    S operator[](int64_t i) const { return data[(size_t)i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); i++) out.data[i] = (T)data[i];
        return out;
    }
};

template <typename S>
Tensor<S> randn_tensor(const std::vector<int64_t>& shape, Rng& rng) {
    Tensor<S> t(shape);
    for (auto& v : t.data) v = (S)rng.normal();
    return t;
}

}  // namespace fashedit
