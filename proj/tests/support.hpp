#pragma once

// Shared helpers for the unit and acceptance tests: seeded generators, finite
// differences and brute-force reference implementations that deliberately share no
// code with the library.

#include "dsrn/errors.hpp"
#include "dsrn/log.hpp"
#include "dsrn/rng.hpp"
#include "dsrn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dsrn::test {

/// Error code raised by `f`, or nothing if it returned normally.
inline std::optional<ErrorCode> error_code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

template <typename T = float>
Tensor<T> random_tensor(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
    Tensor<T> t(h, w, c);
    for (auto& v : t.values()) v = T(rng.uniform(lo, hi));
    return t;
}

template <typename T = float>
Tensor<T> constant_tensor(int h, int w, int c, double v) {
    Tensor<T> t(h, w, c);
    t.fill(T(v));
    return t;
}

/// Collects warnings while alive instead of printing them.
class LogCapture {
public:
    LogCapture() {
        previous_ = set_log_sink([this](LogLevel level, std::string_view msg) {
            if (level >= LogLevel::warn) warnings.emplace_back(msg);
        });
    }
    ~LogCapture() { set_log_sink(previous_); }
    LogCapture(const LogCapture&) = delete;
    LogCapture& operator=(const LogCapture&) = delete;

    bool contains(std::string_view needle) const {
        for (const auto& w : warnings)
            if (w.find(needle) != std::string::npos) return true;
        return false;
    }

    std::vector<std::string> warnings;

private:
    LogSink previous_;
};

struct FdStats {
    int checked = 0;
    int passed = 0;
    double worst_rel = 0;
    double pass_rate() const { return checked ? double(passed) / checked : 1.0; }
};

/// Central differences of `f` at `n` random coordinates of `x`, compared with `grad`.
/// A coordinate passes when the relative error is below `rel_tol` or both values are
/// below `abs_floor` in magnitude.
inline FdStats fd_check(Tensor<double>& x, const Tensor<double>& grad, const std::function<double()>& f, Rng& rng,
                        int n, double h = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-9) {
    FdStats s;
    for (int k = 0; k < n; ++k) {
        const std::size_t i = std::size_t(rng.below(x.size()));
        const double old = x[i];
        x[i] = old + h;
        const double fp = f();
        x[i] = old - h;
        const double fm = f();
        x[i] = old;
        const double fd = (fp - fm) / (2 * h);
        const double an = grad[i];
        const double denom = std::max(std::abs(fd), std::abs(an));
        const double rel = denom > 0 ? std::abs(fd - an) / denom : 0.0;
        ++s.checked;
        if (rel < rel_tol || (std::abs(fd) < abs_floor && std::abs(an) < abs_floor)) ++s.passed;
        s.worst_rel = std::max(s.worst_rel, rel);
    }
    return s;
}

// ---- brute-force references ----

inline double ref_mse(const Tensor<float>& a, const Tensor<float>& b) {
    long double s = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            for (int c = 0; c < a.channels(); ++c) {
                const long double d = (long double)a.at(y, x, c) - (long double)b.at(y, x, c);
                s += d * d;
            }
    return double(s / ((long double)a.height() * a.width() * a.channels()));
}

inline double ref_psnr(const Tensor<float>& a, const Tensor<float>& b) {
    const double mse = ref_mse(a, b);
    return mse == 0 ? 100.0 : 10.0 * std::log10(1.0 / mse);
}

/// Textbook SSIM: full 2-D Gaussian window evaluated at every valid position, per channel,
/// averaged over positions and channels.
template <typename T>
double ref_ssim(const Tensor<T>& a, const Tensor<T>& b, int win = 11, double sigma = 1.5) {
    std::vector<double> w2(std::size_t(win * win));
    double total = 0;
    const double c0 = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double v = std::exp(-((i - c0) * (i - c0) + (j - c0) * (j - c0)) / (2 * sigma * sigma));
            w2[std::size_t(i * win + j)] = v;
            total += v;
        }
    for (auto& v : w2) v /= total;
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double acc = 0;
    long count = 0;
    for (int c = 0; c < a.channels(); ++c)
        for (int y = 0; y + win <= a.height(); ++y)
            for (int x = 0; x + win <= a.width(); ++x) {
                double ma = 0, mb = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wv = w2[std::size_t(i * win + j)];
                        ma += wv * double(a.at(y + i, x + j, c));
                        mb += wv * double(b.at(y + i, x + j, c));
                    }
                double va = 0, vb = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wv = w2[std::size_t(i * win + j)];
                        const double da = double(a.at(y + i, x + j, c)) - ma;
                        const double db = double(b.at(y + i, x + j, c)) - mb;
                        va += wv * da * da;
                        vb += wv * db * db;
                        cov += wv * da * db;
                    }
                acc += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                ++count;
            }
    return acc / double(count);
}

/// Bilinear 2x upsampling written from the sampling definition: output pixel centre
/// (o + 0.5) / 2 - 0.5 in input coordinates, edges clamped.
template <typename T>
Tensor<T> ref_upsample(const Tensor<T>& in) {
    Tensor<T> out(in.height() * 2, in.width() * 2, in.channels());
    auto sample = [&](int y, int x, int c) {
        y = std::clamp(y, 0, in.height() - 1);
        x = std::clamp(x, 0, in.width() - 1);
        return double(in.at(y, x, c));
    };
    for (int oy = 0; oy < out.height(); ++oy)
        for (int ox = 0; ox < out.width(); ++ox) {
            const double sy = (oy + 0.5) / 2.0 - 0.5, sx = (ox + 0.5) / 2.0 - 0.5;
            const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
            const double fy = sy - y0, fx = sx - x0;
            for (int c = 0; c < in.channels(); ++c) {
                const double top = (1 - fx) * sample(y0, x0, c) + fx * sample(y0, x0 + 1, c);
                const double bot = (1 - fx) * sample(y0 + 1, x0, c) + fx * sample(y0 + 1, x0 + 1, c);
                out.at(oy, ox, c) = T((1 - fy) * top + fy * bot);
            }
        }
    return out;
}

template <typename T>
Tensor<T> ref_downsample(const Tensor<T>& in) {
    Tensor<T> out(in.height() / 2, in.width() / 2, in.channels());
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < in.channels(); ++c)
                out.at(y, x, c) = T((double(in.at(2 * y, 2 * x, c)) + double(in.at(2 * y, 2 * x + 1, c)) +
                                     double(in.at(2 * y + 1, 2 * x, c)) + double(in.at(2 * y + 1, 2 * x + 1, c))) /
                                    4.0);
    return out;
}

/// Direct (loop) correlation with zero padding; weight layout [ky][kx][cin][cout].
template <typename T>
Tensor<T> ref_conv(const Tensor<T>& x, const std::vector<T>& w, const std::vector<T>& b, int k, int stride, int pad,
                   int cout) {
    const int ho = (x.height() + 2 * pad - k) / stride + 1, wo = (x.width() + 2 * pad - k) / stride + 1;
    Tensor<T> y(ho, wo, cout);
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
            for (int co = 0; co < cout; ++co) {
                double s = b.empty() ? 0.0 : double(b[std::size_t(co)]);
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                        if (iy < 0 || ix < 0 || iy >= x.height() || ix >= x.width()) continue;
                        for (int ci = 0; ci < x.channels(); ++ci)
                            s += double(x.at(iy, ix, ci)) *
                                 double(w[std::size_t(((ky * k + kx) * x.channels() + ci) * cout + co)]);
                    }
                y.at(oy, ox, co) = T(s);
            }
    return y;
}

/// Features of a stride-2 3x3 conv stack with leaky rectifiers, recomputed by loops.
template <typename T>
std::vector<Tensor<T>> ref_conv_stack_features(const Tensor<T>& img, const std::vector<std::vector<T>>& weights,
                                               const std::vector<std::vector<T>>& biases, double slope) {
    std::vector<Tensor<T>> feats;
    Tensor<T> x = img;
    for (std::size_t s = 0; s < weights.size(); ++s) {
        Tensor<T> y = ref_conv(x, weights[s], biases[s], 3, 2, 1, int(biases[s].size()));
        for (auto& v : y.values())
            if (v < 0) v = T(double(v) * slope);
        feats.push_back(y);
        x = y;
    }
    return feats;
}

}  // namespace dsrn::test
