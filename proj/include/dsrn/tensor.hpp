#pragma once

#include "dsrn/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dsrn {

/// Dense height x width x channels array stored channels-last (HWC), row-major.
///
/// Used for images (3 channels, unit range) and for network feature maps.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(int height, int width, int channels, T fill = T(0))
        : h_(height), w_(width), c_(channels), data_(checked_size(height, width, channels), fill) {}

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels() const noexcept { return c_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t pixels() const noexcept { return std::size_t(h_) * std::size_t(w_); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(int y, int x, int ch) noexcept { return data_[index(y, x, ch)]; }
    const T& at(int y, int x, int ch) const noexcept { return data_[index(y, x, ch)]; }

    std::size_t index(int y, int x, int ch) const noexcept {
        return (std::size_t(y) * std::size_t(w_) + std::size_t(x)) * std::size_t(c_) + std::size_t(ch);
    }

    bool same_shape(const Tensor& o) const noexcept { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_string() const {
        return std::to_string(h_) + "x" + std::to_string(w_) + "x" + std::to_string(c_);
    }

    Tensor& operator+=(const Tensor& o) {
        if (!same_shape(o)) fail(ErrorCode::dimension, "tensor add: " + shape_string() + " vs " + o.shape_string());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(h_, w_, c_);
        std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    bool operator==(const Tensor& o) const = default;

private:
    static std::size_t checked_size(int h, int w, int c) {
        require(h >= 0 && w >= 0 && c >= 0, ErrorCode::dimension, "negative tensor extent");
        return std::size_t(h) * std::size_t(w) * std::size_t(c);
    }

    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<T> data_;
};

/// H x W x 3 image with values in [0,1].
using Image = Tensor<float>;

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
    a += b;
    return a;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), ErrorCode::dimension, "max_abs_diff: shape mismatch");
    T m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max<T>(m, a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]);
    return m;
}

}  // namespace dsrn
