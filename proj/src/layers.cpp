#include "dsrn/layers.hpp"

#include "dsrn/blas.hpp"

#include <cmath>
#include <cstring>

namespace dsrn {

using blas::Op;

namespace {

// im2col bands are sized to stay cache resident while keeping GEMMs reasonably tall.
constexpr std::size_t kBandBudget = std::size_t(1) << 16;
constexpr std::size_t kMinBandPixels = 256;

int rows_per_band(int width, int patch) {
    const std::size_t w = std::max(width, 1);
    const std::size_t by_budget = kBandBudget / (w * std::max<std::size_t>(std::size_t(patch), 1));
    const std::size_t by_height = (kMinBandPixels + w - 1) / w;
    return int(std::max<std::size_t>({1, by_budget, by_height}));
}

// Gathers k x k patches of `src` (hs x ws x c) for output rows [oy0, oy1).
// Column layout per output pixel: [ky][kx][c]; a kernel row is contiguous in HWC input.
template <typename T>
void im2col(const T* src, int hs, int ws, int c, int k, int s, int p, int oy0, int oy1, int wo, T* col) {
    const std::size_t patch = std::size_t(k) * k * c;
    const std::size_t krow = std::size_t(k) * c;
    for (int oy = oy0; oy < oy1; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            T* row = col + (std::size_t(oy - oy0) * wo + ox) * patch;
            const int ix0 = ox * s - p;
            const bool inside_x = ix0 >= 0 && ix0 + k <= ws;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * s - p + ky;
                T* dst = row + std::size_t(ky) * krow;
                if (iy < 0 || iy >= hs) {
                    std::fill(dst, dst + krow, T(0));
                    continue;
                }
                const T* line = src + std::size_t(iy) * ws * c;
                if (inside_x) {
                    std::copy(line + std::size_t(ix0) * c, line + std::size_t(ix0) * c + krow, dst);
                    continue;
                }
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ix0 + kx;
                    T* d = dst + std::size_t(kx) * c;
                    if (ix < 0 || ix >= ws)
                        std::fill(d, d + c, T(0));
                    else
                        std::copy(line + std::size_t(ix) * c, line + std::size_t(ix + 1) * c, d);
                }
            }
        }
    }
}

// Scatter-add adjoint of im2col.
template <typename T>
void col2im_add(const T* col, int hs, int ws, int c, int k, int s, int p, int oy0, int oy1, int wo, T* dst) {
    const std::size_t patch = std::size_t(k) * k * c;
    const std::size_t krow = std::size_t(k) * c;
    for (int oy = oy0; oy < oy1; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const T* row = col + (std::size_t(oy - oy0) * wo + ox) * patch;
            const int ix0 = ox * s - p;
            const bool inside_x = ix0 >= 0 && ix0 + k <= ws;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * s - p + ky;
                if (iy < 0 || iy >= hs) continue;
                const T* from = row + std::size_t(ky) * krow;
                T* line = dst + std::size_t(iy) * ws * c;
                if (inside_x) {
                    T* to = line + std::size_t(ix0) * c;
                    for (std::size_t j = 0; j < krow; ++j) to[j] += from[j];
                    continue;
                }
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ix0 + kx;
                    if (ix < 0 || ix >= ws) continue;
                    const T* f = from + std::size_t(kx) * c;
                    T* to = line + std::size_t(ix) * c;
                    for (int ch = 0; ch < c; ++ch) to[ch] += f[ch];
                }
            }
        }
    }
}

template <typename T>
void add_bias(Tensor<T>& y, const std::vector<T>& bias) {
    const std::size_t c = bias.size();
    T* d = y.data();
    for (std::size_t i = 0; i < y.pixels(); ++i, d += c)
        for (std::size_t ch = 0; ch < c; ++ch) d[ch] += bias[ch];
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& dy, std::vector<T>& grad) {
    const std::size_t c = grad.size();
    const T* d = dy.data();
    for (std::size_t i = 0; i < dy.pixels(); ++i, d += c)
        for (std::size_t ch = 0; ch < c; ++ch) grad[ch] += d[ch];
}

void check_geometry(int cin, int cout, int k, int s, int p) {
    require(cin > 0 && cout > 0 && k > 0 && s > 0 && p >= 0, ErrorCode::config, "invalid convolution geometry");
}

}  // namespace

template <typename T>
Parameter<T>::Parameter(std::vector<int> dims) : shape(std::move(dims)) {
    std::size_t n = 1;
    for (int d : shape) n *= std::size_t(d);
    value.assign(n, T(0));
    grad.assign(n, T(0));
}

template <typename T>
void init_uniform(Parameter<T>& p, double fan_in, double gain, Rng& rng) {
    const double bound = gain * std::sqrt(3.0 / fan_in);
    for (auto& v : p.value) v = T(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight({kernel, kernel, in_channels, out_channels}),
      bias({out_channels}),
      cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      s_(stride),
      p_(pad) {
    check_geometry(cin_, cout_, k_, s_, p_);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
    if (x.channels() != cin_)
        fail(ErrorCode::config,
             "conv expects " + std::to_string(cin_) + " channels, got " + std::to_string(x.channels()));
    const int ho = output_extent(x.height()), wo = output_extent(x.width());
    if (ho <= 0 || wo <= 0) fail(ErrorCode::dimension, "conv input too small: " + x.shape_string());
    Tensor<T> y(ho, wo, cout_);
    const int patch = k_ * k_ * cin_;
    const int band = rows_per_band(wo, patch);
    std::vector<T> col(std::size_t(std::min(band, ho)) * wo * patch);
    for (int r0 = 0; r0 < ho; r0 += band) {
        const int r1 = std::min(ho, r0 + band);
        const int rows = (r1 - r0) * wo;
        im2col(x.data(), x.height(), x.width(), cin_, k_, s_, p_, r0, r1, wo, col.data());
        blas::gemm(Op::none, Op::none, rows, cout_, patch, T(1), col.data(), patch, weight.value.data(), cout_, T(0),
                   y.data() + std::size_t(r0) * wo * cout_, cout_);
    }
    add_bias(y, bias.value);
    return y;
}

template <typename T>
void Conv2d<T>::check_grad_shape(const Tensor<T>& x, const Tensor<T>& dy) const {
    if (dy.channels() != cout_ || dy.height() != output_extent(x.height()) || dy.width() != output_extent(x.width()))
        fail(ErrorCode::config, "conv backward: gradient shape " + dy.shape_string() + " does not match");
}

template <typename T>
void Conv2d<T>::accumulate_grads(const Tensor<T>& x, const Tensor<T>& dy) {
    check_grad_shape(x, dy);
    const int ho = dy.height(), wo = dy.width();
    const int patch = k_ * k_ * cin_;
    const int band = rows_per_band(wo, patch);
    std::vector<T> col(std::size_t(std::min(band, ho)) * wo * patch);
    for (int r0 = 0; r0 < ho; r0 += band) {
        const int r1 = std::min(ho, r0 + band);
        const int rows = (r1 - r0) * wo;
        im2col(x.data(), x.height(), x.width(), cin_, k_, s_, p_, r0, r1, wo, col.data());
        blas::gemm(Op::trans, Op::none, patch, cout_, rows, T(1), col.data(), patch,
                   dy.data() + std::size_t(r0) * wo * cout_, cout_, T(1), weight.grad.data(), cout_);
    }
    accumulate_bias_grad(dy, bias.grad);
}

template <typename T>
Tensor<T> Conv2d<T>::backward_input(const Tensor<T>& x, const Tensor<T>& dy) const {
    check_grad_shape(x, dy);
    const int ho = dy.height(), wo = dy.width();
    Tensor<T> dx(x.height(), x.width(), cin_);
    if (s_ == 1 && 2 * p_ == k_ - 1) {
        // Stride-1 "same" convolution: dx is dy convolved with the spatially flipped,
        // channel-transposed kernel, which avoids the scatter in col2im.
        std::vector<T> flipped(weight.value.size());
        for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx)
                for (int ci = 0; ci < cin_; ++ci)
                    for (int co = 0; co < cout_; ++co)
                        flipped[((std::size_t(k_ - 1 - ky) * k_ + (k_ - 1 - kx)) * cout_ + co) * cin_ + ci] =
                            weight.value[((std::size_t(ky) * k_ + kx) * cin_ + ci) * cout_ + co];
        const int patch = k_ * k_ * cout_;
        const int band = rows_per_band(x.width(), patch);
        std::vector<T> col(std::size_t(std::min(band, x.height())) * x.width() * patch);
        for (int r0 = 0; r0 < x.height(); r0 += band) {
            const int r1 = std::min(x.height(), r0 + band);
            const int rows = (r1 - r0) * x.width();
            im2col(dy.data(), ho, wo, cout_, k_, 1, k_ - 1 - p_, r0, r1, x.width(), col.data());
            blas::gemm(Op::none, Op::none, rows, cin_, patch, T(1), col.data(), patch, flipped.data(), cin_, T(0),
                       dx.data() + std::size_t(r0) * x.width() * cin_, cin_);
        }
        return dx;
    }
    const int patch = k_ * k_ * cin_;
    const int band = rows_per_band(wo, patch);
    std::vector<T> col(std::size_t(std::min(band, ho)) * wo * patch);
    for (int r0 = 0; r0 < ho; r0 += band) {
        const int r1 = std::min(ho, r0 + band);
        const int rows = (r1 - r0) * wo;
        blas::gemm(Op::none, Op::trans, rows, patch, cout_, T(1), dy.data() + std::size_t(r0) * wo * cout_, cout_,
                   weight.value.data(), cout_, T(0), col.data(), patch);
        col2im_add(col.data(), x.height(), x.width(), cin_, k_, s_, p_, r0, r1, wo, dx.data());
    }
    return dx;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx) {
    accumulate_grads(x, dy);
    return need_dx ? backward_input(x, dy) : Tensor<T>();
}

template <typename T>
void Conv2d<T>::init(Rng& rng, double gain) {
    init_uniform(weight, double(k_) * k_ * cin_, gain, rng);
    std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
void Conv2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
}

template <typename T>
void Conv2d<T>::visit(const std::string& prefix, const ConstParamVisitor<T>& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
}

// ---------------------------------------------------------------------------- TransposedConv2d

template <typename T>
TransposedConv2d<T>::TransposedConv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight({in_channels, kernel, kernel, out_channels}),
      bias({out_channels}),
      cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      s_(stride),
      p_(pad) {
    check_geometry(cin_, cout_, k_, s_, p_);
}

template <typename T>
Tensor<T> TransposedConv2d<T>::forward(const Tensor<T>& x) const {
    if (x.channels() != cin_)
        fail(ErrorCode::config,
             "transposed conv expects " + std::to_string(cin_) + " channels, got " + std::to_string(x.channels()));
    const int h = x.height(), w = x.width();
    const int ho = output_extent(h), wo = output_extent(w);
    require(ho > 0 && wo > 0, ErrorCode::dimension, "transposed conv input too small");
    Tensor<T> y(ho, wo, cout_);
    const int patch = k_ * k_ * cout_;
    const int band = rows_per_band(w, patch);
    std::vector<T> col(std::size_t(std::min(band, h)) * w * patch);
    for (int r0 = 0; r0 < h; r0 += band) {
        const int r1 = std::min(h, r0 + band);
        const int rows = (r1 - r0) * w;
        blas::gemm(Op::none, Op::none, rows, patch, cin_, T(1), x.data() + std::size_t(r0) * w * cin_, cin_,
                   weight.value.data(), patch, T(0), col.data(), patch);
        col2im_add(col.data(), ho, wo, cout_, k_, s_, p_, r0, r1, w, y.data());
    }
    add_bias(y, bias.value);
    return y;
}

template <typename T>
Tensor<T> TransposedConv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx) {
    const int h = x.height(), w = x.width();
    if (dy.channels() != cout_ || dy.height() != output_extent(h) || dy.width() != output_extent(w))
        fail(ErrorCode::config, "transposed conv backward: gradient shape " + dy.shape_string() + " does not match");
    const int patch = k_ * k_ * cout_;
    const int band = rows_per_band(w, patch);
    std::vector<T> col(std::size_t(std::min(band, h)) * w * patch);
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(h, w, cin_);
    for (int r0 = 0; r0 < h; r0 += band) {
        const int r1 = std::min(h, r0 + band);
        const int rows = (r1 - r0) * w;
        im2col(dy.data(), dy.height(), dy.width(), cout_, k_, s_, p_, r0, r1, w, col.data());
        const T* x_band = x.data() + std::size_t(r0) * w * cin_;
        blas::gemm(Op::trans, Op::none, cin_, patch, rows, T(1), x_band, cin_, col.data(), patch, T(1),
                   weight.grad.data(), patch);
        if (need_dx)
            blas::gemm(Op::none, Op::trans, rows, cin_, patch, T(1), col.data(), patch, weight.value.data(), patch,
                       T(0), dx.data() + std::size_t(r0) * w * cin_, cin_);
    }
    accumulate_bias_grad(dy, bias.grad);
    return dx;
}

template <typename T>
void TransposedConv2d<T>::init(Rng& rng, double gain) {
    // Each output pixel receives in_channels * (kernel / stride)^2 contributions.
    const double fan_in = double(cin_) * k_ * k_ / (double(s_) * s_);
    init_uniform(weight, fan_in, gain, rng);
    std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
void TransposedConv2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
}

template <typename T>
void TransposedConv2d<T>::visit(const std::string& prefix, const ConstParamVisitor<T>& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
}

// ---------------------------------------------------------------------------- LeakyRelu

template <typename T>
Tensor<T> LeakyRelu<T>::forward(Tensor<T> x) const {
    const T a = T(slope);
    T* p = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = p[i] > T(0) ? p[i] : a * p[i];
    return x;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& y, Tensor<T> dy) const {
    const T a = T(slope);
    const T* py = y.data();
    T* pd = dy.data();
    for (std::size_t i = 0; i < dy.size(); ++i) pd[i] *= py[i] > T(0) ? T(1) : a;
    return dy;
}

// ---------------------------------------------------------------------------- ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(int channels, double slope)
    : conv1(channels, channels, 3, 1, 1), conv2(channels, channels, 3, 1, 1), act{slope} {}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, Tensor<T>* hidden) const {
    Tensor<T> h = act.forward(conv1.forward(x));
    Tensor<T> y = conv2.forward(h);
    y += x;
    if (hidden) *hidden = std::move(h);
    return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& x, const Tensor<T>& hidden, const Tensor<T>& dy) {
    Tensor<T> dh = act.backward(hidden, conv2.backward(hidden, dy));
    Tensor<T> dx = conv1.backward(x, dh);
    dx += dy;
    return dx;
}

template <typename T>
void ResidualBlock<T>::init(Rng& rng, double gain) {
    conv1.init(rng, gain);
    // Second conv starts small so a fresh block is close to the identity.
    conv2.init(rng, 0.1 * gain);
}

template <typename T>
void ResidualBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
    conv1.visit(prefix + ".conv1", f);
    conv2.visit(prefix + ".conv2", f);
}

template <typename T>
void ResidualBlock<T>::visit(const std::string& prefix, const ConstParamVisitor<T>& f) const {
    conv1.visit(prefix + ".conv1", f);
    conv2.visit(prefix + ".conv2", f);
}

// ---------------------------------------------------------------------------- Sequential

template <typename T>
void Sequential<T>::add(std::string name, Layer<T> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
}

template <typename T>
int Sequential<T>::out_channels(int in_channels) const {
    int c = in_channels;
    for (const auto& l : layers_) {
        if (const auto* conv = std::get_if<Conv2d<T>>(&l)) c = conv->out_channels();
        if (const auto* tconv = std::get_if<TransposedConv2d<T>>(&l)) c = tconv->out_channels();
    }
    return c;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, SequentialCache<T>* cache) const {
    if (cache) {
        cache->inputs.clear();
        cache->hidden.clear();
        cache->inputs.reserve(layers_.size());
        cache->hidden.resize(layers_.size());
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Tensor<T> next = std::visit(
            [&](const auto& l) -> Tensor<T> {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, ResidualBlock<T>>)
                    return l.forward(cur, cache ? &cache->hidden[i] : nullptr);
                else
                    return l.forward(cur);
            },
            layers_[i]);
        if (cache)
            cache->inputs.push_back(std::move(cur));
        cur = std::move(next);
    }
    if (cache) cache->output = cur;
    return cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const SequentialCache<T>& cache, const Tensor<T>& dy, bool need_dx) {
    require(cache.inputs.size() == layers_.size(), ErrorCode::config, "sequential backward without forward cache");
    Tensor<T> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Tensor<T>& in = cache.inputs[i];
        const Tensor<T>& out = i + 1 < layers_.size() ? cache.inputs[i + 1] : cache.output;
        const bool want_dx = need_dx || i > 0;
        g = std::visit(
            [&](auto& l) -> Tensor<T> {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, ResidualBlock<T>>)
                    return l.backward(in, cache.hidden[i], g);
                else if constexpr (std::is_same_v<L, LeakyRelu<T>>)
                    return l.backward(out, std::move(g));
                else
                    return l.backward(in, g, want_dx);
            },
            layers_[i]);
    }
    return g;
}

template <typename T>
void Sequential<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        std::visit(
            [&](auto& l) {
                if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, LeakyRelu<T>>)
                    l.visit(prefix + "." + names_[i], f);
            },
            layers_[i]);
}

template <typename T>
void Sequential<T>::visit(const std::string& prefix, const ConstParamVisitor<T>& f) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        std::visit(
            [&](const auto& l) {
                if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, LeakyRelu<T>>)
                    l.visit(prefix + "." + names_[i], f);
            },
            layers_[i]);
}

template struct Parameter<float>;
template struct Parameter<double>;
template void init_uniform(Parameter<float>&, double, double, Rng&);
template void init_uniform(Parameter<double>&, double, double, Rng&);
template class Conv2d<float>;
template class Conv2d<double>;
template class TransposedConv2d<float>;
template class TransposedConv2d<double>;
template struct LeakyRelu<float>;
template struct LeakyRelu<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class Sequential<float>;
template class Sequential<double>;

}  // namespace dsrn
