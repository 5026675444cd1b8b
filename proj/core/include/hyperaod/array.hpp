#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperaod {

// Dense row-major n-d array. Deliberately minimal: shape + flat storage +
// bounds-unchecked indexing helpers for the 2-4d cases used in this project.
template <typename T>
struct Array {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Array() = default;
    explicit Array(std::vector<std::size_t> s)
        : shape(std::move(s)), data(count(shape), T{}) {}
    Array(std::vector<std::size_t> s, T fill)
        : shape(std::move(s)), data(count(shape), fill) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    template <typename U>
    bool same_shape(const Array<U>& o) const { return shape == o.shape; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    T& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using ArrayF = Array<float>;
using ArrayD = Array<double>;
using MaskGrid = Array<std::uint8_t>;

inline ArrayD to_f64(const ArrayF& a) {
    ArrayD out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i]);
    return out;
}

inline ArrayF to_f32(const ArrayD& a) {
    ArrayF out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(a[i]);
    return out;
}

}  // namespace hyperaod
