#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace amp {

using Real = double;
using Vector = std::vector<Real>;

struct ZeroVectorError : std::runtime_error {
    ZeroVectorError() : std::runtime_error("l2_normalize: vector norm below epsilon") {}
};

struct EmptyMaskError : std::runtime_error {
    EmptyMaskError() : std::runtime_error("nmap: mask has zero total weight") {}
};

// Dense (channels, height, width) array, channel-major, row-major within a
// channel.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<Real> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, Real fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {
        if (c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("Tensor3: dimensions must be positive");
    }

    Real& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    Real at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t size() const { return data.size(); }
    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<Real> data;

    Matrix() = default;
    Matrix(int r, int c, Real fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r <= 0 || c <= 0)
            throw std::invalid_argument("Matrix: dimensions must be positive");
    }

    Real& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    Real at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    void append_row(const Vector& row) {
        if (static_cast<int>(row.size()) != cols)
            throw std::invalid_argument("Matrix::append_row: width mismatch");
        data.insert(data.end(), row.begin(), row.end());
        ++rows;
    }
};

// 4-index convolution kernel bank [cout, cin, kh, kw].
struct Kernel4 {
    int cout = 0, cin = 0, kh = 0, kw = 0;
    std::vector<Real> data;

    Kernel4() = default;
    Kernel4(int o, int c, int h, int w)
        : cout(o), cin(c), kh(h), kw(w),
          data(static_cast<size_t>(o) * c * h * w, 0.0) {
        if (o <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("Kernel4: dimensions must be positive");
    }

    Real& at(int o, int c, int y, int x) {
        return data[((static_cast<size_t>(o) * cin + c) * kh + y) * kw + x];
    }
    Real at(int o, int c, int y, int x) const {
        return data[((static_cast<size_t>(o) * cin + c) * kh + y) * kw + x];
    }
};

}  // namespace amp
