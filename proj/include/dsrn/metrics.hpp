#pragma once

#include "dsrn/losses.hpp"
#include "dsrn/network.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dsrn {

struct ScenePair;

struct MetricReport {
    double psnr_db = 0;
    double ssim = 0;
    std::optional<double> perceptual_distance;  // absent when no extractor was supplied
    int n_images = 0;

    std::string to_json() const;
    /// One row of the results table: method,psnr,ssim,lpips,runtime_s
    std::string to_csv_row(const std::string& method, std::optional<double> runtime_s = std::nullopt) const;
    static std::string csv_header();
};

inline constexpr double kPsnrCapDb = 100.0;

/// Peak signal-to-noise ratio for unit-range images; returns `cap_db` when the images are identical.
double psnr(const Image& pred, const Image& target, double cap_db = kPsnrCapDb);

/// Mean SSIM, defined as 1 - ssim_loss so the two agree exactly.
double ssim_metric(const Image& pred, const Image& target, const SsimOptions& opt = {});

/// Learned-perceptual-style distance: per-pixel unit-normalised channel activations, squared
/// differences summed over channels, averaged spatially and summed over layers.
double perceptual_distance(const Image& pred, const Image& target, const FeatureExtractor<float>& extractor);

/// Sum with Neumaier compensation, so aggregation order barely matters.
class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0, comp_ = 0;
};

using RelightFn = std::function<Image(const Image&)>;

struct EvalOptions {
    double psnr_cap_db = kPsnrCapDb;
    SsimOptions ssim;
    const FeatureExtractor<float>* extractor = nullptr;
};

MetricReport evaluate_dataset(const RelightFn& model, const std::vector<ScenePair>& pairs, const EvalOptions& opt = {});
MetricReport evaluate_dataset(const Dsrn<float>& model, const std::vector<ScenePair>& pairs,
                              const EvalOptions& opt = {});

}  // namespace dsrn
