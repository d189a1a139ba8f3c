#pragma once

#include "dsrn/rng.hpp"
#include "dsrn/tensor.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace dsrn {

/// Learnable array plus its gradient accumulator.
template <typename T>
struct Parameter {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;

    Parameter() = default;
    explicit Parameter(std::vector<int> dims);
    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using ParamVisitor = std::function<void(const std::string& name, Parameter<T>& param)>;
template <typename T>
using ConstParamVisitor = std::function<void(const std::string& name, const Parameter<T>& param)>;

/// Fan-in-scaled uniform initialisation: U(-b, b) with b = gain * sqrt(3 / fan_in).
template <typename T>
void init_uniform(Parameter<T>& p, double fan_in, double gain, Rng& rng);

/// 2-D convolution over HWC tensors, zero padded.
/// Weight layout: [kernel][kernel][in_channels][out_channels].
template <typename T>
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

    int in_channels() const noexcept { return cin_; }
    int out_channels() const noexcept { return cout_; }
    int kernel() const noexcept { return k_; }
    int stride() const noexcept { return s_; }
    int pad() const noexcept { return p_; }
    int output_extent(int n) const noexcept { return (n + 2 * p_ - k_) / s_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) const;
    /// Accumulates weight/bias gradients; returns dL/dx when need_dx is set (empty otherwise).
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx = true);
    /// dL/dx only; parameters untouched.
    Tensor<T> backward_input(const Tensor<T>& x, const Tensor<T>& dy) const;
    void accumulate_grads(const Tensor<T>& x, const Tensor<T>& dy);

    void init(Rng& rng, double gain);
    void visit(const std::string& prefix, const ParamVisitor<T>& f);
    void visit(const std::string& prefix, const ConstParamVisitor<T>& f) const;

    Parameter<T> weight;
    Parameter<T> bias;

private:
    void check_grad_shape(const Tensor<T>& x, const Tensor<T>& dy) const;

    int cin_, cout_, k_, s_, p_;
};

/// Transposed 2-D convolution (fractionally strided), the adjoint geometry of Conv2d.
/// Weight layout: [in_channels][kernel][kernel][out_channels].
template <typename T>
class TransposedConv2d {
public:
    TransposedConv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

    int in_channels() const noexcept { return cin_; }
    int out_channels() const noexcept { return cout_; }
    int output_extent(int n) const noexcept { return (n - 1) * s_ - 2 * p_ + k_; }

    Tensor<T> forward(const Tensor<T>& x) const;
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx = true);

    void init(Rng& rng, double gain);
    void visit(const std::string& prefix, const ParamVisitor<T>& f);
    void visit(const std::string& prefix, const ConstParamVisitor<T>& f) const;

    Parameter<T> weight;
    Parameter<T> bias;

private:
    int cin_, cout_, k_, s_, p_;
};

template <typename T>
struct LeakyRelu {
    double slope = 0.2;

    Tensor<T> forward(Tensor<T> x) const;
    /// Uses the forward output; its sign equals the input's sign.
    Tensor<T> backward(const Tensor<T>& y, Tensor<T> dy) const;
};

/// y = x + conv2(lrelu(conv1(x))), shape preserving.
template <typename T>
class ResidualBlock {
public:
    ResidualBlock(int channels, double slope);

    int channels() const noexcept { return conv1.in_channels(); }

    Tensor<T> forward(const Tensor<T>& x, Tensor<T>* hidden = nullptr) const;
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& hidden, const Tensor<T>& dy);

    void init(Rng& rng, double gain);
    void visit(const std::string& prefix, const ParamVisitor<T>& f);
    void visit(const std::string& prefix, const ConstParamVisitor<T>& f) const;

    Conv2d<T> conv1;
    Conv2d<T> conv2;
    LeakyRelu<T> act;
};

template <typename T>
using Layer = std::variant<Conv2d<T>, TransposedConv2d<T>, LeakyRelu<T>, ResidualBlock<T>>;

/// Activations retained by Sequential::forward for the backward pass.
template <typename T>
struct SequentialCache {
    std::vector<Tensor<T>> inputs;  // input of each layer
    std::vector<Tensor<T>> hidden;  // residual-block inner activations (empty for other layers)
    Tensor<T> output;
};

template <typename T>
class Sequential {
public:
    void add(std::string name, Layer<T> layer);

    std::size_t size() const noexcept { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return layers_[i]; }
    const Layer<T>& layer(std::size_t i) const { return layers_[i]; }
    const std::string& name(std::size_t i) const { return names_[i]; }

    /// Output channel count, following the last channel-changing layer.
    int out_channels(int in_channels) const;

    Tensor<T> forward(const Tensor<T>& x, SequentialCache<T>* cache = nullptr) const;
    Tensor<T> backward(const SequentialCache<T>& cache, const Tensor<T>& dy, bool need_dx = true);

    void visit(const std::string& prefix, const ParamVisitor<T>& f);
    void visit(const std::string& prefix, const ConstParamVisitor<T>& f) const;

private:
    std::vector<std::string> names_;
    std::vector<Layer<T>> layers_;
};

}  // namespace dsrn
