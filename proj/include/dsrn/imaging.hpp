#pragma once

#include "dsrn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dsrn {

/// Interleaved 8-bit image as decoded from disk.
struct Raw8Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> bytes;
};

/// Ordered multi-resolution stack; levels[0] is full resolution, each next level half the size.
template <typename T>
using Pyramid = std::vector<Tensor<T>>;

Image to_unit_range(const Raw8Image& raw);
Raw8Image to_raw8(const Image& img);  // clips to [0,1] and rounds

Raw8Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raw8Image& raw);
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& img);

/// 2x2 average pooling. Requires even height and width.
template <typename T>
Tensor<T> downsample2x(const Tensor<T>& img);

/// Adjoint of downsample2x: spreads each gradient value over its 2x2 source block.
template <typename T>
Tensor<T> downsample2x_adjoint(const Tensor<T>& grad);

/// Bilinear 2x upsampling with half-pixel centres (corners not aligned), edge-clamped.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& img);

template <typename T>
Tensor<T> upsample2x_adjoint(const Tensor<T>& grad);

template <typename T>
Pyramid<T> build_pyramid(const Tensor<T>& img, int levels = 3);

/// Collapses per-level gradients of a pyramid back onto the full-resolution input.
template <typename T>
Tensor<T> build_pyramid_adjoint(const Pyramid<T>& level_grads);

}  // namespace dsrn
