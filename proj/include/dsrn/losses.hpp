#pragma once

#include "dsrn/layers.hpp"
#include "dsrn/tensor.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace dsrn {

/// Weights of the combined objective  l1*L1 + ssim*Lssim + perceptual*Lp + tv*Ltv.
struct LossWeights {
    double l1 = 1.0;
    double ssim = 5e-3;
    double perceptual = 6e-3;
    double tv = 2e-8;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Maps an image to a list of feature maps. Implementations must be deterministic and
/// supply the vector-Jacobian product so losses built on them are trainable.
template <typename T>
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<Tensor<T>> extract(const Tensor<T>& img) const = 0;
    /// Returns d<feature_grads, extract(img)>/d img.
    virtual Tensor<T> vjp(const Tensor<T>& img, const std::vector<Tensor<T>>& feature_grads) const = 0;
};

/// Returns the image itself as its single feature map.
template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
public:
    std::vector<Tensor<T>> extract(const Tensor<T>& img) const override { return {img}; }
    Tensor<T> vjp(const Tensor<T>&, const std::vector<Tensor<T>>& g) const override { return g.at(0); }
};

/// Frozen convolutional stack with seeded random weights: stride-2 3x3 conv + leaky
/// rectifier per stage, features taken after every stage.
template <typename T>
class RandomConvExtractor final : public FeatureExtractor<T> {
public:
    explicit RandomConvExtractor(std::uint64_t seed = 1234, std::vector<int> channels = {16, 32, 64},
                                 int in_channels = 3);

    std::vector<Tensor<T>> extract(const Tensor<T>& img) const override;
    Tensor<T> vjp(const Tensor<T>& img, const std::vector<Tensor<T>>& feature_grads) const override;

    std::size_t stages() const noexcept { return convs_.size(); }
    const Conv2d<T>& conv(std::size_t i) const { return convs_.at(i); }

private:
    std::vector<Conv2d<T>> convs_;
    LeakyRelu<T> act_{0.2};
};

// Every loss returns its value and, when `grad` is non-null, writes dLoss/dpred into it.

template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr);

template <typename T>
T l2_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr);

/// Mean SSIM over valid window positions and channels (Gaussian window, no padding).
template <typename T>
T ssim_index(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& opt = {}, Tensor<T>* grad_a = nullptr);

/// 1 - mean SSIM.
template <typename T>
T ssim_loss(const Tensor<T>& pred, const Tensor<T>& target, const SsimOptions& opt = {}, Tensor<T>* grad = nullptr);

/// Sum over extractor layers of the mean squared feature difference.
template <typename T>
T perceptual_loss(const Tensor<T>& pred, const Tensor<T>& target, const FeatureExtractor<T>& features,
                  Tensor<T>* grad = nullptr);

/// Squared anisotropic total variation of `pred`, averaged over all difference terms.
template <typename T>
T tv_loss(const Tensor<T>& pred, Tensor<T>* grad = nullptr);

struct LossTerms {
    double l1 = 0, l2 = 0, ssim = 0, perceptual = 0, tv = 0, total = 0;
};

template <typename T>
LossTerms combined_loss_terms(const Tensor<T>& pred, const Tensor<T>& target, const LossWeights& w,
                              const FeatureExtractor<T>& features, const SsimOptions& opt = {},
                              Tensor<T>* grad = nullptr);

template <typename T>
T combined_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossWeights& w,
                const FeatureExtractor<T>& features, const SsimOptions& opt = {}, Tensor<T>* grad = nullptr) {
    return T(combined_loss_terms(pred, target, w, features, opt, grad).total);
}

/// Normalised 1-D Gaussian taps of the SSIM window.
std::vector<double> gaussian_window(int size, double sigma);

}  // namespace dsrn
