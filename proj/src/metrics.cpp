#include "dsrn/metrics.hpp"

#include "dsrn/data.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace dsrn {

void CompensatedSum::add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
        comp_ += (sum_ - t) + v;
    else
        comp_ += (v - t) + sum_;
    sum_ = t;
}

double psnr(const Image& pred, const Image& target, double cap_db) {
    if (!pred.same_shape(target) || pred.empty())
        fail(ErrorCode::dimension, "psnr: shape mismatch " + pred.shape_string() + " vs " + target.shape_string());
    CompensatedSum sse;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred[i]) - double(target[i]);
        sse.add(d * d);
    }
    const double mse = sse.value() / double(pred.size());
    if (mse <= 0.0) return cap_db;
    return std::min(cap_db, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const Image& pred, const Image& target, const SsimOptions& opt) {
    return 1.0 - ssim_loss(pred.cast<double>(), target.cast<double>(), opt);
}

double perceptual_distance(const Image& pred, const Image& target, const FeatureExtractor<float>& extractor) {
    if (!pred.same_shape(target)) fail(ErrorCode::dimension, "perceptual_distance: shape mismatch");
    const auto fa = extractor.extract(pred);
    const auto fb = extractor.extract(target);
    if (fa.size() != fb.size()) fail(ErrorCode::config, "perceptual_distance: layer count mismatch");
    constexpr double eps = 1e-10;
    double total = 0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const auto& a = fa[l];
        const auto& b = fb[l];
        if (!a.same_shape(b) || a.empty()) fail(ErrorCode::config, "perceptual_distance: layer shape mismatch");
        const int c = a.channels();
        double layer = 0;
        for (std::size_t p = 0; p < a.pixels(); ++p) {
            const float* va = a.data() + p * std::size_t(c);
            const float* vb = b.data() + p * std::size_t(c);
            double na = 0, nb = 0;
            for (int ch = 0; ch < c; ++ch) {
                na += double(va[ch]) * va[ch];
                nb += double(vb[ch]) * vb[ch];
            }
            na = std::sqrt(na) + eps;
            nb = std::sqrt(nb) + eps;
            double d2 = 0;
            for (int ch = 0; ch < c; ++ch) {
                const double d = va[ch] / na - vb[ch] / nb;
                d2 += d * d;
            }
            layer += d2;
        }
        total += layer / double(a.pixels());
    }
    return total;
}

MetricReport evaluate_dataset(const RelightFn& model, const std::vector<ScenePair>& pairs, const EvalOptions& opt) {
    require(!pairs.empty(), ErrorCode::data, "evaluate_dataset: no image pairs");
    CompensatedSum s_psnr, s_ssim, s_perc;
    for (const auto& pair : pairs) {
        const Image out = model(pair.input);
        s_psnr.add(psnr(out, pair.target, opt.psnr_cap_db));
        s_ssim.add(ssim_metric(out, pair.target, opt.ssim));
        if (opt.extractor) s_perc.add(perceptual_distance(out, pair.target, *opt.extractor));
    }
    MetricReport r;
    const double n = double(pairs.size());
    r.n_images = int(pairs.size());
    r.psnr_db = s_psnr.value() / n;
    r.ssim = s_ssim.value() / n;
    if (opt.extractor) r.perceptual_distance = s_perc.value() / n;
    return r;
}

MetricReport evaluate_dataset(const Dsrn<float>& model, const std::vector<ScenePair>& pairs, const EvalOptions& opt) {
    return evaluate_dataset([&](const Image& img) { return model.relight(img); }, pairs, opt);
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["psnr_db"] = psnr_db;
    j["ssim"] = ssim;
    j["perceptual_distance"] = perceptual_distance ? nlohmann::ordered_json(*perceptual_distance) : nullptr;
    j["n_images"] = n_images;
    return j.dump(2);
}

std::string MetricReport::csv_header() { return "method,psnr,ssim,lpips,runtime_s"; }

std::string MetricReport::to_csv_row(const std::string& method, std::optional<double> runtime_s) const {
    std::ostringstream os;
    os << std::setprecision(10) << method << ',' << psnr_db << ',' << ssim << ',';
    if (perceptual_distance) os << *perceptual_distance;
    os << ',';
    if (runtime_s) os << *runtime_s;
    return os.str();
}

}  // namespace dsrn
