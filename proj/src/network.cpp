#include "dsrn/network.hpp"

#include <cmath>

namespace dsrn {

namespace {

double act_gain(double slope) { return std::sqrt(2.0 / (1.0 + slope * slope)); }

std::string stage_name(int s) { return "stage" + std::to_string(s); }

}  // namespace

void ArchConfig::validate() const {
    require(pyramid_levels >= 1, ErrorCode::config, "pyramid_levels must be >= 1");
    require(enc_hierarchy_depth >= 1, ErrorCode::config, "enc_hierarchy_depth must be >= 1");
    require(res_blocks_per_stage >= 0, ErrorCode::config, "res_blocks_per_stage must be >= 0");
    require(base_channels >= 1, ErrorCode::config, "base_channels must be >= 1");
    require(stacks >= 1, ErrorCode::config, "stacks must be >= 1");
    require(int(channel_multipliers.size()) == enc_hierarchy_depth, ErrorCode::config,
            "channel_multipliers needs one entry per hierarchy stage");
    for (int m : channel_multipliers) require(m >= 1, ErrorCode::config, "channel multipliers must be >= 1");
    require(leaky_slope >= 0.0 && leaky_slope < 1.0, ErrorCode::config, "leaky_slope must lie in [0,1)");
}

int ArchConfig::required_divisor() const { return (1 << (pyramid_levels - 1)) * (1 << (enc_hierarchy_depth - 1)); }

// ---------------------------------------------------------------------------- Encoder

template <typename T>
Encoder<T>::Encoder(const ArchConfig& arch, int in_channels) : divisor_(1 << (arch.enc_hierarchy_depth - 1)) {
    arch.validate();
    int c = in_channels;
    for (int s = 0; s < arch.enc_hierarchy_depth; ++s) {
        const int cs = arch.channels_at(s);
        const std::string st = stage_name(s);
        if (s == 0)
            body_.add(st + ".conv", Conv2d<T>(c, cs, 3, 1, 1));
        else
            body_.add(st + ".down", Conv2d<T>(c, cs, 3, 2, 1));
        body_.add(st + ".act", LeakyRelu<T>{arch.leaky_slope});
        for (int r = 0; r < arch.res_blocks_per_stage; ++r)
            body_.add(st + ".res" + std::to_string(r), ResidualBlock<T>(cs, arch.leaky_slope));
        c = cs;
    }
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, SequentialCache<T>* cache) const {
    if (x.height() % divisor_ != 0 || x.width() % divisor_ != 0)
        fail(ErrorCode::dimension,
             "encoder input " + x.shape_string() + " not divisible by " + std::to_string(divisor_));
    return body_.forward(x, cache);
}

template <typename T>
Tensor<T> Encoder<T>::backward(const SequentialCache<T>& cache, const Tensor<T>& dy, bool need_dx) {
    return body_.backward(cache, dy, need_dx);
}

template <typename T>
void Encoder<T>::init(Rng& rng, double slope) {
    const double g = act_gain(slope);
    for (std::size_t i = 0; i < body_.size(); ++i)
        std::visit(
            [&](auto& l) {
                if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, LeakyRelu<T>>) l.init(rng, g);
            },
            body_.layer(i));
}

// ---------------------------------------------------------------------------- Decoder

template <typename T>
Decoder<T>::Decoder(const ArchConfig& arch, int out_channels) : in_channels_(arch.feature_channels()) {
    arch.validate();
    for (int s = arch.enc_hierarchy_depth - 1; s >= 0; --s) {
        const int cs = arch.channels_at(s);
        const std::string st = stage_name(s);
        for (int r = 0; r < arch.res_blocks_per_stage; ++r)
            body_.add(st + ".res" + std::to_string(r), ResidualBlock<T>(cs, arch.leaky_slope));
        if (s > 0) {
            body_.add(st + ".up", TransposedConv2d<T>(cs, arch.channels_at(s - 1), 4, 2, 1));
            body_.add(st + ".act", LeakyRelu<T>{arch.leaky_slope});
        }
    }
    body_.add("project", Conv2d<T>(arch.channels_at(0), out_channels, 3, 1, 1));
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& g, SequentialCache<T>* cache) const {
    if (g.channels() != in_channels_)
        fail(ErrorCode::config,
             "decoder expects " + std::to_string(in_channels_) + " channels, got " + std::to_string(g.channels()));
    return body_.forward(g, cache);
}

template <typename T>
Tensor<T> Decoder<T>::backward(const SequentialCache<T>& cache, const Tensor<T>& dy) {
    return body_.backward(cache, dy, true);
}

template <typename T>
void Decoder<T>::init(Rng& rng, double slope) {
    const double g = act_gain(slope);
    for (std::size_t i = 0; i < body_.size(); ++i) {
        const bool last = i + 1 == body_.size();
        std::visit(
            [&](auto& l) {
                if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, LeakyRelu<T>>) l.init(rng, last ? 1.0 : g);
            },
            body_.layer(i));
    }
}

// ---------------------------------------------------------------------------- BaseNetwork

template <typename T>
BaseNetwork<T>::BaseNetwork(const ArchConfig& arch) {
    arch.validate();
    for (int i = 0; i < arch.pyramid_levels; ++i) {
        encoders_.emplace_back(arch);
        decoders_.emplace_back(arch);
    }
}

template <typename T>
Tensor<T> BaseNetwork<T>::forward(const Pyramid<T>& pyr, BaseCache<T>* cache) const {
    const int L = levels();
    require(int(pyr.size()) == L, ErrorCode::config,
            "pyramid has " + std::to_string(pyr.size()) + " levels, network expects " + std::to_string(L));
    LevelTrace<T> local;
    LevelTrace<T>& tr = cache ? cache->trace : local;
    tr.in.assign(std::size_t(L), {});
    tr.features.assign(std::size_t(L), {});
    tr.fused.assign(std::size_t(L), {});
    tr.out.assign(std::size_t(L), {});
    if (cache) {
        cache->enc.assign(std::size_t(L), {});
        cache->dec.assign(std::size_t(L), {});
    }
    for (int i = L - 1; i >= 0; --i) {
        const auto u = std::size_t(i);
        tr.in[u] = pyr[u];
        if (i < L - 1) tr.in[u] += upsample2x(tr.out[u + 1]);
        tr.features[u] = encoders_[u].forward(tr.in[u], cache ? &cache->enc[u] : nullptr);
        tr.fused[u] = tr.features[u];
        if (i < L - 1) tr.fused[u] += upsample2x(tr.fused[u + 1]);
        tr.out[u] = decoders_[u].forward(tr.fused[u], cache ? &cache->dec[u] : nullptr);
        // Coarser intermediates are only needed for the backward pass.
        if (!cache && i + 1 < L) {
            tr.out[u + 1] = {};
            tr.fused[u + 1] = {};
        }
    }
    return tr.out[0];
}

template <typename T>
Tensor<T> BaseNetwork<T>::forward(const Pyramid<T>& pyr, LevelTrace<T>& trace) const {
    BaseCache<T> cache;
    Tensor<T> out = forward(pyr, &cache);
    trace = std::move(cache.trace);
    return out;
}

template <typename T>
Pyramid<T> BaseNetwork<T>::backward(const BaseCache<T>& cache, const Tensor<T>& d_out) {
    const int L = levels();
    require(int(cache.enc.size()) == L && int(cache.dec.size()) == L, ErrorCode::config,
            "base backward without forward cache");
    Pyramid<T> d_image(static_cast<std::size_t>(L));
    Tensor<T> d_out_i = d_out;  // dL/d out_i
    Tensor<T> d_fused_up;       // gradient reaching G_i through up() at level i-1
    for (int i = 0; i < L; ++i) {
        const auto u = std::size_t(i);
        Tensor<T> d_fused = decoders_[u].backward(cache.dec[u], d_out_i);
        if (i > 0) d_fused += d_fused_up;
        Tensor<T> d_in = encoders_[u].backward(cache.enc[u], d_fused, true);
        if (i + 1 < L) {
            d_out_i = upsample2x_adjoint(d_in);
            d_fused_up = upsample2x_adjoint(d_fused);
        }
        d_image[u] = std::move(d_in);
    }
    return d_image;
}

template <typename T>
void BaseNetwork<T>::init(Rng& rng, double slope) {
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
        encoders_[i].init(rng, slope);
        decoders_[i].init(rng, slope);
    }
}

template <typename T>
void BaseNetwork<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
        const std::string lv = prefix + ".level" + std::to_string(i + 1);
        encoders_[i].body().visit(lv + ".enc", f);
        decoders_[i].body().visit(lv + ".dec", f);
    }
}

template <typename T>
void BaseNetwork<T>::visit(const std::string& prefix, const ConstParamVisitor<T>& f) const {
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
        const std::string lv = prefix + ".level" + std::to_string(i + 1);
        encoders_[i].body().visit(lv + ".enc", f);
        decoders_[i].body().visit(lv + ".dec", f);
    }
}

// ---------------------------------------------------------------------------- Dsrn

template <typename T>
Dsrn<T>::Dsrn(const ArchConfig& arch, std::uint64_t seed) : arch_(arch) {
    arch_.validate();
    const int n = arch_.shared_stacks ? 1 : arch_.stacks;
    for (int s = 0; s < n; ++s) {
        nets_.emplace_back(arch_);
        Rng rng(mix_seed(seed, std::uint64_t(s)));
        nets_.back().init(rng, arch_.leaky_slope);
    }
}

template <typename T>
void Dsrn<T>::check_input(const Tensor<T>& img) const {
    const int d = arch_.required_divisor();
    require(img.channels() == 3, ErrorCode::format, "network input must have 3 channels");
    require(img.height() >= d && img.width() >= d && img.height() % d == 0 && img.width() % d == 0,
            ErrorCode::dimension, "input " + img.shape_string() + " must be a positive multiple of " + std::to_string(d));
}

template <typename T>
std::vector<Tensor<T>> Dsrn<T>::forward_stacks(const Tensor<T>& img, DsrnCache<T>* cache) const {
    check_input(img);
    std::vector<Tensor<T>> outputs;
    outputs.reserve(std::size_t(arch_.stacks));
    if (cache) cache->stacks.assign(std::size_t(arch_.stacks), {});
    const Tensor<T>* x = &img;
    for (int s = 0; s < arch_.stacks; ++s) {
        Pyramid<T> pyr = build_pyramid(*x, arch_.pyramid_levels);
        outputs.push_back(stack(s).forward(pyr, cache ? &cache->stacks[std::size_t(s)] : nullptr));
        x = &outputs.back();
    }
    if (cache) cache->outputs = outputs;
    return outputs;
}

template <typename T>
Tensor<T> Dsrn<T>::forward(const Tensor<T>& img) const {
    check_input(img);
    Tensor<T> x = stack(0).forward(build_pyramid(img, arch_.pyramid_levels));
    for (int s = 1; s < arch_.stacks; ++s) x = stack(s).forward(build_pyramid(x, arch_.pyramid_levels));
    return x;
}

template <typename T>
Tensor<T> clamp_unit(Tensor<T> img) {
    for (auto& v : img.values()) v = std::clamp(v, T(0), T(1));
    return img;
}

template <typename T>
Tensor<T> Dsrn<T>::relight(const Tensor<T>& img) const {
    return clamp_unit(forward(img));
}

template <typename T>
void Dsrn<T>::backward(const DsrnCache<T>& cache, const std::vector<Tensor<T>>& d_outputs) {
    require(int(cache.stacks.size()) == arch_.stacks && int(d_outputs.size()) == arch_.stacks, ErrorCode::config,
            "dsrn backward: expected one gradient per stack");
    Tensor<T> carry;  // gradient flowing into stack s's output from stack s+1
    for (int s = arch_.stacks - 1; s >= 0; --s) {
        Tensor<T> g = d_outputs[std::size_t(s)];
        if (!carry.empty()) {
            if (g.empty())
                g = std::move(carry);
            else
                g += carry;
        }
        carry = {};
        if (g.empty()) continue;
        Pyramid<T> d_pyr = stack(s).backward(cache.stacks[std::size_t(s)], g);
        if (s > 0) carry = build_pyramid_adjoint(d_pyr);
    }
}

template <typename T>
void Dsrn<T>::zero_grad() {
    visit(ParamVisitor<T>([](const std::string&, Parameter<T>& p) { p.zero_grad(); }));
}

template <typename T>
void Dsrn<T>::visit(const ParamVisitor<T>& f) {
    for (std::size_t s = 0; s < nets_.size(); ++s) nets_[s].visit("stack" + std::to_string(s + 1), f);
}

template <typename T>
void Dsrn<T>::visit(const ConstParamVisitor<T>& f) const {
    for (std::size_t s = 0; s < nets_.size(); ++s) nets_[s].visit("stack" + std::to_string(s + 1), f);
}

template <typename T>
ParamStats Dsrn<T>::stats() const {
    ParamStats st;
    visit(ConstParamVisitor<T>([&](const std::string&, const Parameter<T>& p) { st.count += p.size(); }));
    st.fp32_bytes = st.count * 4;
    return st;
}

template <typename T, typename U>
void copy_params(const Dsrn<T>& from, Dsrn<U>& to) {
    require(from.arch() == to.arch(), ErrorCode::config, "copy_params: architecture mismatch");
    std::vector<const Parameter<T>*> src;
    from.visit(ConstParamVisitor<T>([&](const std::string&, const Parameter<T>& p) { src.push_back(&p); }));
    std::size_t i = 0;
    to.visit(ParamVisitor<U>([&](const std::string&, Parameter<U>& p) {
        const auto& s = *src[i++];
        std::transform(s.value.begin(), s.value.end(), p.value.begin(), [](T v) { return static_cast<U>(v); });
    }));
}

template <typename T>
template <typename U>
Dsrn<U> Dsrn<T>::cast() const {
    Dsrn<U> out(arch_, 0);
    copy_params(*this, out);
    return out;
}

template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class BaseNetwork<float>;
template class BaseNetwork<double>;
template class Dsrn<float>;
template class Dsrn<double>;
template Dsrn<double> Dsrn<float>::cast<double>() const;
template Dsrn<float> Dsrn<double>::cast<float>() const;
template Dsrn<float> Dsrn<float>::cast<float>() const;
template void copy_params(const Dsrn<float>&, Dsrn<float>&);
template void copy_params(const Dsrn<float>&, Dsrn<double>&);
template void copy_params(const Dsrn<double>&, Dsrn<float>&);
template void copy_params(const Dsrn<double>&, Dsrn<double>&);
template Tensor<float> clamp_unit(Tensor<float>);
template Tensor<double> clamp_unit(Tensor<double>);

}  // namespace dsrn
