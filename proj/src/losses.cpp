#include "dsrn/losses.hpp"

#include <cmath>

namespace dsrn {

namespace {

template <typename T>
void check_pair(const Tensor<T>& pred, const Tensor<T>& target, const char* what) {
    if (!pred.same_shape(target))
        fail(ErrorCode::dimension,
             std::string(what) + ": shape mismatch " + pred.shape_string() + " vs " + target.shape_string());
    if (pred.empty()) fail(ErrorCode::dimension, std::string(what) + ": empty input");
}

template <typename T>
void prepare_grad(Tensor<T>* grad, const Tensor<T>& like) {
    if (grad) *grad = Tensor<T>(like.height(), like.width(), like.channels());
}

// Single-channel plane stored row-major, used by the SSIM filters.
struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int hh, int ww) : h(hh), w(ww), v(std::size_t(hh) * std::size_t(ww), 0.0) {}
    double& at(int y, int x) { return v[std::size_t(y) * w + x]; }
    double at(int y, int x) const { return v[std::size_t(y) * w + x]; }
};

// Separable "valid" correlation with a symmetric 1-D kernel.
Plane filter_valid(const Plane& in, const std::vector<double>& k) {
    const int n = int(k.size());
    Plane tmp(in.h, in.w - n + 1);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += k[std::size_t(i)] * in.at(y, x + i);
            tmp.at(y, x) = acc;
        }
    Plane out(in.h - n + 1, tmp.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += k[std::size_t(i)] * tmp.at(y + i, x);
            out.at(y, x) = acc;
        }
    return out;
}

// Adjoint of filter_valid: maps a valid-sized plane back to the full input size.
Plane filter_valid_adjoint(const Plane& g, const std::vector<double>& k, int h, int w) {
    const int n = int(k.size());
    Plane tmp(h, g.w);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            for (int i = 0; i < n; ++i) tmp.at(y + i, x) += k[std::size_t(i)] * g.at(y, x);
    Plane out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < g.w; ++x)
            for (int i = 0; i < n; ++i) out.at(y, x + i) += k[std::size_t(i)] * tmp.at(y, x);
    return out;
}

template <typename T>
Plane channel_plane(const Tensor<T>& t, int ch) {
    Plane p(t.height(), t.width());
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) p.at(y, x) = double(t.at(y, x, ch));
    return p;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.h, a.w);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
    return p;
}

}  // namespace

void LossWeights::validate() const {
    for (double v : {l1, ssim, perceptual, tv})
        require(std::isfinite(v) && v >= 0.0, ErrorCode::config, "loss weights must be finite and non-negative");
}

std::vector<double> gaussian_window(int size, double sigma) {
    require(size >= 1 && sigma > 0.0, ErrorCode::config, "invalid SSIM window");
    std::vector<double> g(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        g[std::size_t(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += g[std::size_t(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad) {
    check_pair(pred, target, "l1_loss");
    prepare_grad(grad, pred);
    const double inv_n = 1.0 / double(pred.size());
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred[i]) - double(target[i]);
        sum += std::abs(d);
        if (grad) (*grad)[i] = T(d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0));
    }
    return T(sum * inv_n);
}

template <typename T>
T l2_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad) {
    check_pair(pred, target, "l2_loss");
    prepare_grad(grad, pred);
    const double inv_n = 1.0 / double(pred.size());
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred[i]) - double(target[i]);
        sum += d * d;
        if (grad) (*grad)[i] = T(2.0 * d * inv_n);
    }
    return T(sum * inv_n);
}

template <typename T>
T ssim_index(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& opt, Tensor<T>* grad_a) {
    check_pair(a, b, "ssim");
    if (a.height() < opt.window || a.width() < opt.window)
        fail(ErrorCode::dimension,
             "ssim: image " + a.shape_string() + " smaller than the " + std::to_string(opt.window) + "px window");
    const auto k = gaussian_window(opt.window, opt.sigma);
    const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
    const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
    const int vh = a.height() - opt.window + 1, vw = a.width() - opt.window + 1;
    const double scale = 1.0 / (double(vh) * vw * a.channels());
    prepare_grad(grad_a, a);

    double total = 0;
    for (int ch = 0; ch < a.channels(); ++ch) {
        const Plane x = channel_plane(a, ch), y = channel_plane(b, ch);
        const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
        const Plane exx = filter_valid(product(x, x), k);
        const Plane eyy = filter_valid(product(y, y), k);
        const Plane exy = filter_valid(product(x, y), k);
        Plane d_mx(vh, vw), d_exx(vh, vw), d_exy(vh, vw);
        for (std::size_t i = 0; i < mx.v.size(); ++i) {
            const double ux = mx.v[i], uy = my.v[i];
            const double a1 = 2 * ux * uy + c1;
            const double a2 = 2 * (exy.v[i] - ux * uy) + c2;
            const double b1 = ux * ux + uy * uy + c1;
            const double b2 = (exx.v[i] - ux * ux) + (eyy.v[i] - uy * uy) + c2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad_a) {
                d_mx.v[i] = scale * s * (2 * uy / a1 - 2 * uy / a2 - 2 * ux / b1 + 2 * ux / b2);
                d_exx.v[i] = -scale * s / b2;
                d_exy.v[i] = scale * 2 * s / a2;
            }
        }
        if (grad_a) {
            const Plane g_mx = filter_valid_adjoint(d_mx, k, a.height(), a.width());
            const Plane g_exx = filter_valid_adjoint(d_exx, k, a.height(), a.width());
            const Plane g_exy = filter_valid_adjoint(d_exy, k, a.height(), a.width());
            for (int yy = 0; yy < a.height(); ++yy)
                for (int xx = 0; xx < a.width(); ++xx)
                    grad_a->at(yy, xx, ch) =
                        T(g_mx.at(yy, xx) + 2 * x.at(yy, xx) * g_exx.at(yy, xx) + y.at(yy, xx) * g_exy.at(yy, xx));
        }
    }
    return T(total * scale);
}

template <typename T>
T ssim_loss(const Tensor<T>& pred, const Tensor<T>& target, const SsimOptions& opt, Tensor<T>* grad) {
    const T s = ssim_index(pred, target, opt, grad);
    if (grad)
        for (auto& v : grad->values()) v = -v;
    return T(1) - s;
}

template <typename T>
T perceptual_loss(const Tensor<T>& pred, const Tensor<T>& target, const FeatureExtractor<T>& features,
                  Tensor<T>* grad) {
    check_pair(pred, target, "perceptual_loss");
    const auto fp = features.extract(pred);
    const auto ft = features.extract(target);
    if (fp.size() != ft.size()) fail(ErrorCode::config, "perceptual_loss: extractor produced mismatched layers");
    double total = 0;
    std::vector<Tensor<T>> fgrads;
    for (std::size_t l = 0; l < fp.size(); ++l) {
        if (!fp[l].same_shape(ft[l]) || fp[l].empty())
            fail(ErrorCode::config, "perceptual_loss: feature layer shape mismatch");
        const double inv_n = 1.0 / double(fp[l].size());
        Tensor<T> g(fp[l].height(), fp[l].width(), fp[l].channels());
        double sum = 0;
        for (std::size_t i = 0; i < fp[l].size(); ++i) {
            const double d = double(fp[l][i]) - double(ft[l][i]);
            sum += d * d;
            g[i] = T(2.0 * d * inv_n);
        }
        total += sum * inv_n;
        fgrads.push_back(std::move(g));
    }
    if (grad) {
        *grad = features.vjp(pred, fgrads);
        if (!grad->same_shape(pred)) fail(ErrorCode::config, "perceptual_loss: extractor vjp has wrong shape");
    }
    return T(total);
}

template <typename T>
T tv_loss(const Tensor<T>& pred, Tensor<T>* grad) {
    const int h = pred.height(), w = pred.width(), c = pred.channels();
    const std::size_t terms = std::size_t(c) * (std::size_t(h) * std::max(w - 1, 0) + std::size_t(std::max(h - 1, 0)) * w);
    if (terms == 0) fail(ErrorCode::dimension, "tv_loss: image " + pred.shape_string() + " has no neighbouring pixels");
    prepare_grad(grad, pred);
    const double inv_n = 1.0 / double(terms);
    double sum = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                const double p = double(pred.at(y, x, ch));
                if (x + 1 < w) {
                    const double d = double(pred.at(y, x + 1, ch)) - p;
                    sum += d * d;
                    if (grad) {
                        grad->at(y, x + 1, ch) += T(2 * d * inv_n);
                        grad->at(y, x, ch) -= T(2 * d * inv_n);
                    }
                }
                if (y + 1 < h) {
                    const double d = double(pred.at(y + 1, x, ch)) - p;
                    sum += d * d;
                    if (grad) {
                        grad->at(y + 1, x, ch) += T(2 * d * inv_n);
                        grad->at(y, x, ch) -= T(2 * d * inv_n);
                    }
                }
            }
    return T(sum * inv_n);
}

template <typename T>
LossTerms combined_loss_terms(const Tensor<T>& pred, const Tensor<T>& target, const LossWeights& w,
                              const FeatureExtractor<T>& features, const SsimOptions& opt, Tensor<T>* grad) {
    w.validate();
    Tensor<T> g1, g2, g3, g4;
    LossTerms t;
    t.l1 = double(l1_loss(pred, target, grad ? &g1 : nullptr));
    t.ssim = double(ssim_loss(pred, target, opt, grad ? &g2 : nullptr));
    t.perceptual = double(perceptual_loss(pred, target, features, grad ? &g3 : nullptr));
    t.tv = double(tv_loss(pred, grad ? &g4 : nullptr));
    t.total = w.l1 * t.l1 + w.ssim * t.ssim + w.perceptual * t.perceptual + w.tv * t.tv;
    if (grad) {
        *grad = Tensor<T>(pred.height(), pred.width(), pred.channels());
        for (std::size_t i = 0; i < pred.size(); ++i)
            (*grad)[i] = T(w.l1 * double(g1[i]) + w.ssim * double(g2[i]) + w.perceptual * double(g3[i]) +
                           w.tv * double(g4[i]));
    }
    return t;
}

// ---------------------------------------------------------------------------- RandomConvExtractor

template <typename T>
RandomConvExtractor<T>::RandomConvExtractor(std::uint64_t seed, std::vector<int> channels, int in_channels) {
    require(!channels.empty(), ErrorCode::config, "extractor needs at least one stage");
    Rng rng(seed);
    int c = in_channels;
    for (int co : channels) {
        convs_.emplace_back(c, co, 3, 2, 1);
        convs_.back().init(rng, std::sqrt(2.0 / (1.0 + 0.04)));
        c = co;
    }
}

template <typename T>
std::vector<Tensor<T>> RandomConvExtractor<T>::extract(const Tensor<T>& img) const {
    std::vector<Tensor<T>> feats;
    const Tensor<T>* x = &img;
    for (const auto& conv : convs_) {
        feats.push_back(act_.forward(conv.forward(*x)));
        x = &feats.back();
    }
    return feats;
}

template <typename T>
Tensor<T> RandomConvExtractor<T>::vjp(const Tensor<T>& img, const std::vector<Tensor<T>>& feature_grads) const {
    require(feature_grads.size() == convs_.size(), ErrorCode::config, "extractor vjp: one gradient per stage needed");
    const auto feats = extract(img);
    Tensor<T> g;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        if (g.empty())
            g = feature_grads[i];
        else
            g += feature_grads[i];
        g = act_.backward(feats[i], std::move(g));
        g = convs_[i].backward_input(i == 0 ? img : feats[i - 1], g);
    }
    return g;
}

#define DSRN_INSTANTIATE_LOSSES(T)                                                                              \
    template T l1_loss(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);                                         \
    template T l2_loss(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);                                         \
    template T ssim_index(const Tensor<T>&, const Tensor<T>&, const SsimOptions&, Tensor<T>*);                  \
    template T ssim_loss(const Tensor<T>&, const Tensor<T>&, const SsimOptions&, Tensor<T>*);                   \
    template T perceptual_loss(const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&, Tensor<T>*);    \
    template T tv_loss(const Tensor<T>&, Tensor<T>*);                                                           \
    template LossTerms combined_loss_terms(const Tensor<T>&, const Tensor<T>&, const LossWeights&,              \
                                           const FeatureExtractor<T>&, const SsimOptions&, Tensor<T>*);         \
    template class RandomConvExtractor<T>;

DSRN_INSTANTIATE_LOSSES(float)
DSRN_INSTANTIATE_LOSSES(double)

}  // namespace dsrn
