#include "dsrn/imaging.hpp"

#include <png.h>

#include <cmath>

namespace dsrn {

Image to_unit_range(const Raw8Image& raw) {
    require(raw.channels == 3, ErrorCode::format,
            "expected 3 channels, got " + std::to_string(raw.channels));
    require(raw.bytes.size() == std::size_t(raw.height) * raw.width * 3, ErrorCode::format,
            "pixel buffer size does not match image extents");
    Image img(raw.height, raw.width, 3);
    for (std::size_t i = 0; i < raw.bytes.size(); ++i) img[i] = float(raw.bytes[i]) / 255.0f;
    return img;
}

Raw8Image to_raw8(const Image& img) {
    require(img.channels() == 3, ErrorCode::format, "to_raw8 expects 3 channels");
    Raw8Image raw{img.height(), img.width(), 3, std::vector<std::uint8_t>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img[i];
        v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
        raw.bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return raw;
}

Raw8Image read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        std::string msg = image.message;
        png_image_free(&image);
        if (!std::filesystem::exists(path)) fail(ErrorCode::io, "cannot open " + path.string());
        fail(ErrorCode::format, "cannot decode " + path.string() + ": " + msg);
    }
    image.format = PNG_FORMAT_RGB;
    Raw8Image raw{int(image.height), int(image.width), 3, {}};
    raw.bytes.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.bytes.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::format, "cannot decode " + path.string() + ": " + msg);
    }
    return raw;
}

void write_png(const std::filesystem::path& path, const Raw8Image& raw) {
    require(raw.channels == 3, ErrorCode::format, "write_png expects RGB");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(raw.width);
    image.height = png_uint_32(raw.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, raw.bytes.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::io, "cannot write " + path.string() + ": " + msg);
    }
}

Image load_image(const std::filesystem::path& path) { return to_unit_range(read_png(path)); }

void save_image(const std::filesystem::path& path, const Image& img) { write_png(path, to_raw8(img)); }

template <typename T>
Tensor<T> downsample2x(const Tensor<T>& img) {
    require(img.height() % 2 == 0 && img.width() % 2 == 0, ErrorCode::dimension,
            "downsample2x needs even dimensions, got " + img.shape_string());
    const int h = img.height() / 2, w = img.width() / 2, c = img.channels();
    Tensor<T> out(h, w, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = T(0.25) * (img.at(2 * y, 2 * x, ch) + img.at(2 * y, 2 * x + 1, ch) +
                                              img.at(2 * y + 1, 2 * x, ch) + img.at(2 * y + 1, 2 * x + 1, ch));
    return out;
}

template <typename T>
Tensor<T> downsample2x_adjoint(const Tensor<T>& grad) {
    Tensor<T> out(grad.height() * 2, grad.width() * 2, grad.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int ch = 0; ch < out.channels(); ++ch) out.at(y, x, ch) = T(0.25) * grad.at(y / 2, x / 2, ch);
    return out;
}

namespace {

struct Tap {
    int lo, hi;
    double w_lo, w_hi;
};

// Source taps for each output index of a 2x bilinear upsample, half-pixel convention.
std::vector<Tap> upsample_taps(int n) {
    std::vector<Tap> taps(std::size_t(2 * n));
    for (int o = 0; o < 2 * n; ++o) {
        double src = std::max((o + 0.5) / 2.0 - 0.5, 0.0);
        int lo = std::min(int(src), n - 1);
        int hi = std::min(lo + 1, n - 1);
        double frac = src - lo;
        taps[std::size_t(o)] = {lo, hi, 1.0 - frac, frac};
    }
    return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& img) {
    const int c = img.channels();
    Tensor<T> out(img.height() * 2, img.width() * 2, c);
    const auto ty = upsample_taps(img.height());
    const auto tx = upsample_taps(img.width());
    for (int y = 0; y < out.height(); ++y) {
        const Tap& a = ty[std::size_t(y)];
        for (int x = 0; x < out.width(); ++x) {
            const Tap& b = tx[std::size_t(x)];
            const T w00 = T(a.w_lo * b.w_lo), w01 = T(a.w_lo * b.w_hi);
            const T w10 = T(a.w_hi * b.w_lo), w11 = T(a.w_hi * b.w_hi);
            const T* p00 = &img.at(a.lo, b.lo, 0);
            const T* p01 = &img.at(a.lo, b.hi, 0);
            const T* p10 = &img.at(a.hi, b.lo, 0);
            const T* p11 = &img.at(a.hi, b.hi, 0);
            T* dst = &out.at(y, x, 0);
            for (int ch = 0; ch < c; ++ch) dst[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
        }
    }
    return out;
}

template <typename T>
Tensor<T> upsample2x_adjoint(const Tensor<T>& grad) {
    require(grad.height() % 2 == 0 && grad.width() % 2 == 0, ErrorCode::dimension,
            "upsample2x_adjoint needs even dimensions");
    const int c = grad.channels();
    Tensor<T> out(grad.height() / 2, grad.width() / 2, c);
    const auto ty = upsample_taps(out.height());
    const auto tx = upsample_taps(out.width());
    for (int y = 0; y < grad.height(); ++y) {
        const Tap& a = ty[std::size_t(y)];
        for (int x = 0; x < grad.width(); ++x) {
            const Tap& b = tx[std::size_t(x)];
            const T w00 = T(a.w_lo * b.w_lo), w01 = T(a.w_lo * b.w_hi);
            const T w10 = T(a.w_hi * b.w_lo), w11 = T(a.w_hi * b.w_hi);
            const T* g = &grad.at(y, x, 0);
            T* p00 = &out.at(a.lo, b.lo, 0);
            T* p01 = &out.at(a.lo, b.hi, 0);
            T* p10 = &out.at(a.hi, b.lo, 0);
            T* p11 = &out.at(a.hi, b.hi, 0);
            for (int ch = 0; ch < c; ++ch) {
                p00[ch] += w00 * g[ch];
                p01[ch] += w01 * g[ch];
                p10[ch] += w10 * g[ch];
                p11[ch] += w11 * g[ch];
            }
        }
    }
    return out;
}

template <typename T>
Pyramid<T> build_pyramid(const Tensor<T>& img, int levels) {
    require(levels >= 1, ErrorCode::config, "pyramid needs at least one level");
    const int div = 1 << (levels - 1);
    require(img.height() % div == 0 && img.width() % div == 0, ErrorCode::dimension,
            "image " + img.shape_string() + " not divisible by " + std::to_string(div) + " for a " +
                std::to_string(levels) + "-level pyramid");
    Pyramid<T> pyr;
    pyr.reserve(std::size_t(levels));
    pyr.push_back(img);
    for (int i = 1; i < levels; ++i) pyr.push_back(downsample2x(pyr.back()));
    return pyr;
}

template <typename T>
Tensor<T> build_pyramid_adjoint(const Pyramid<T>& level_grads) {
    require(!level_grads.empty(), ErrorCode::config, "empty pyramid gradient");
    Tensor<T> g = level_grads.back();
    for (std::size_t i = level_grads.size() - 1; i-- > 0;) {
        Tensor<T> up = downsample2x_adjoint(g);
        up += level_grads[i];
        g = std::move(up);
    }
    return g;
}

#define DSRN_INSTANTIATE_IMAGING(T)                                  \
    template Tensor<T> downsample2x(const Tensor<T>&);               \
    template Tensor<T> downsample2x_adjoint(const Tensor<T>&);       \
    template Tensor<T> upsample2x(const Tensor<T>&);                 \
    template Tensor<T> upsample2x_adjoint(const Tensor<T>&);         \
    template Pyramid<T> build_pyramid(const Tensor<T>&, int);        \
    template Tensor<T> build_pyramid_adjoint(const Pyramid<T>&);

DSRN_INSTANTIATE_IMAGING(float)
DSRN_INSTANTIATE_IMAGING(double)

}  // namespace dsrn
