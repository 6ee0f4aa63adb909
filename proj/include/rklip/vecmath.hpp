#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rklip/errors.hpp"

namespace rklip {

template <typename S>
double dot(std::span<const S> a, std::span<const S> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

template <typename S>
double l2_norm(std::span<const S> v) {
    return std::sqrt(dot(v, v));
}

// unit-norm copy; zero vectors are not representable on the unit sphere
template <typename S>
std::vector<S> normalized(std::span<const S> v) {
    double n = l2_norm(v);
    if (n == 0.0) throw degenerate_input_error("cannot normalize a zero-norm vector");
    std::vector<S> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = S(double(v[i]) / n);
    return out;
}

template <typename S>
std::vector<S> normalized(const std::vector<S>& v) {
    return normalized(std::span<const S>(v.data(), v.size()));
}

}  // namespace rklip
