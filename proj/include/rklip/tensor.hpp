#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rklip/rng.hpp"

namespace rklip {

template <typename S>
struct TensorT {
    std::vector<int64_t> shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(std::vector<int64_t> shp)
        : shape(std::move(shp)), data(size_t(numel(shape)), S(0)) {}

    static int64_t numel(const std::vector<int64_t>& shp) {
        int64_t n = 1;
        for (int64_t d : shp) n *= d;
        return n;
    }

    int64_t size() const { return int64_t(data.size()); }
    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    S& operator[](size_t i) { return data[i]; }
    const S& operator[](size_t i) const { return data[i]; }

    // 2-d accessors (row-major)
    S& at(int64_t i, int64_t j) { return data[size_t(i * shape[1] + j)]; }
    const S& at(int64_t i, int64_t j) const { return data[size_t(i * shape[1] + j)]; }

    void zero() { std::fill(data.begin(), data.end(), S(0)); }
    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    void fill_normal(Rng& rng, double stddev) {
        for (S& v : data) v = S(rng.normal() * stddev);
    }
};

// A named trainable tensor with its gradient buffer.
template <typename S>
struct ParamT {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;

    void init(std::string n, std::vector<int64_t> shape) {
        name = std::move(n);
        value = TensorT<S>(shape);
        grad = TensorT<S>(std::move(shape));
    }

    void zero_grad() { grad.zero(); }
};

}  // namespace rklip
