#pragma once

#include "dsrn/imaging.hpp"
#include "dsrn/layers.hpp"

#include <cstdint>
#include <vector>

namespace dsrn {

struct ArchConfig {
    int pyramid_levels = 3;
    int enc_hierarchy_depth = 3;
    int res_blocks_per_stage = 2;
    int base_channels = 32;
    std::vector<int> channel_multipliers{1, 2, 4};
    int stacks = 2;
    bool shared_stacks = false;  // reuse one base network for every stack
    double leaky_slope = 0.2;

    void validate() const;
    /// Spatial divisibility the network needs from its input.
    int required_divisor() const;
    int channels_at(int stage) const { return base_channels * channel_multipliers.at(std::size_t(stage)); }
    int feature_channels() const { return channels_at(enc_hierarchy_depth - 1); }

    bool operator==(const ArchConfig&) const = default;
};

/// Per-level intermediates of one base-network pass; index 0 is the full-resolution level.
template <typename T>
struct LevelTrace {
    std::vector<Tensor<T>> in;        // encoder input: image level plus upscaled coarser estimate
    std::vector<Tensor<T>> features;  // encoder output
    std::vector<Tensor<T>> fused;     // features plus upscaled coarser fused features
    std::vector<Tensor<T>> out;       // decoder output, an image estimate at that level
};

/// Strided-convolution encoder: one hierarchy stage per channel multiplier, the first at
/// full resolution and every further stage halving the resolution, each followed by
/// residual blocks.
template <typename T>
class Encoder {
public:
    Encoder(const ArchConfig& arch, int in_channels = 3);

    Tensor<T> forward(const Tensor<T>& x, SequentialCache<T>* cache = nullptr) const;
    Tensor<T> backward(const SequentialCache<T>& cache, const Tensor<T>& dy, bool need_dx = true);

    void init(Rng& rng, double slope);
    Sequential<T>& body() { return body_; }
    const Sequential<T>& body() const { return body_; }

private:
    Sequential<T> body_;
    int divisor_;
};

/// Mirror of Encoder built from transposed convolutions, ending in a 3-channel projection.
template <typename T>
class Decoder {
public:
    explicit Decoder(const ArchConfig& arch, int out_channels = 3);

    Tensor<T> forward(const Tensor<T>& g, SequentialCache<T>* cache = nullptr) const;
    Tensor<T> backward(const SequentialCache<T>& cache, const Tensor<T>& dy);

    void init(Rng& rng, double slope);
    Sequential<T>& body() { return body_; }
    const Sequential<T>& body() const { return body_; }

private:
    Sequential<T> body_;
    int in_channels_;
};

template <typename T>
struct BaseCache {
    LevelTrace<T> trace;
    std::vector<SequentialCache<T>> enc;
    std::vector<SequentialCache<T>> dec;
};

/// One multi-scale pass over an image pyramid, coarse to fine:
///   in_i = I_i + up(out_{i+1}),  F_i = Enc_i(in_i),  G_i = F_i + up(G_{i+1}),  out_i = Dec_i(G_i),
/// with the up() terms absent at the coarsest level.
template <typename T>
class BaseNetwork {
public:
    explicit BaseNetwork(const ArchConfig& arch);

    int levels() const noexcept { return int(encoders_.size()); }
    Encoder<T>& encoder(int level) { return encoders_.at(std::size_t(level)); }
    const Encoder<T>& encoder(int level) const { return encoders_.at(std::size_t(level)); }
    Decoder<T>& decoder(int level) { return decoders_.at(std::size_t(level)); }
    const Decoder<T>& decoder(int level) const { return decoders_.at(std::size_t(level)); }

    /// Returns the raw (unclamped) full-resolution output.
    Tensor<T> forward(const Pyramid<T>& pyr, BaseCache<T>* cache = nullptr) const;
    Tensor<T> forward(const Pyramid<T>& pyr, LevelTrace<T>& trace) const;

    /// Backpropagates dL/d(out_1); returns per-level gradients of the input pyramid.
    Pyramid<T> backward(const BaseCache<T>& cache, const Tensor<T>& d_out);

    void init(Rng& rng, double slope);
    void visit(const std::string& prefix, const ParamVisitor<T>& f);
    void visit(const std::string& prefix, const ConstParamVisitor<T>& f) const;

private:
    std::vector<Encoder<T>> encoders_;
    std::vector<Decoder<T>> decoders_;
};

template <typename T>
struct DsrnCache {
    std::vector<BaseCache<T>> stacks;
    std::vector<Tensor<T>> outputs;
};

struct ParamStats {
    std::uint64_t count = 0;
    std::uint64_t fp32_bytes = 0;
};

/// Stacked relighting network: base networks cascaded, each stack consuming the
/// pyramid of the previous stack's raw output. Holds all learnable weights.
template <typename T>
class Dsrn {
public:
    explicit Dsrn(const ArchConfig& arch = {}, std::uint64_t seed = 0);

    const ArchConfig& arch() const noexcept { return arch_; }
    int stacks() const noexcept { return arch_.stacks; }
    BaseNetwork<T>& stack(int i) { return nets_.at(arch_.shared_stacks ? 0 : std::size_t(i)); }
    const BaseNetwork<T>& stack(int i) const { return nets_.at(arch_.shared_stacks ? 0 : std::size_t(i)); }

    void check_input(const Tensor<T>& img) const;

    /// Raw output of every stack, in cascade order.
    std::vector<Tensor<T>> forward_stacks(const Tensor<T>& img, DsrnCache<T>* cache = nullptr) const;
    /// Raw output of the last stack (what the losses see).
    Tensor<T> forward(const Tensor<T>& img) const;
    /// Inference output: last stack clamped to [0,1].
    Tensor<T> relight(const Tensor<T>& img) const;

    /// Accumulates parameter gradients given dL/d(output) for each stack (empty tensors allowed).
    void backward(const DsrnCache<T>& cache, const std::vector<Tensor<T>>& d_outputs);

    void zero_grad();
    void visit(const ParamVisitor<T>& f);
    void visit(const ConstParamVisitor<T>& f) const;
    ParamStats stats() const;

    template <typename U>
    Dsrn<U> cast() const;

private:
    ArchConfig arch_;
    std::vector<BaseNetwork<T>> nets_;
};

template <typename T>
ParamStats param_stats(const Dsrn<T>& model) {
    return model.stats();
}

/// Copies all parameter values between models of identical architecture.
template <typename T, typename U>
void copy_params(const Dsrn<T>& from, Dsrn<U>& to);

template <typename T>
Tensor<T> clamp_unit(Tensor<T> img);

}  // namespace dsrn
