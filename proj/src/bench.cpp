#include "dsrn/bench.hpp"

#include "dsrn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace dsrn {

double percentile(std::vector<double> v, double q) {
    if (v.empty()) fail(ErrorCode::data, "percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(q, 0.0, 1.0) * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

std::string cpu_description() {
    std::ifstream in("/proc/cpuinfo");
    std::string line, model = "unknown CPU";
    while (std::getline(in, line))
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) model = line.substr(colon + 2);
            break;
        }
    const unsigned n = std::max(1u, std::thread::hardware_concurrency());
    return "cpu: " + model + " (" + std::to_string(n) + " hardware thread" + (n == 1 ? "" : "s") + ")";
}

BenchReport time_inference(const Dsrn<float>& model, int resolution, int warmup, int iters, std::uint64_t seed) {
    if (iters < 10) fail(ErrorCode::config, "at least 10 timed iterations are required");
    if (warmup < 0) fail(ErrorCode::config, "negative warmup count");
    if (resolution <= 0 || resolution % 16 != 0 || resolution % model.arch().required_divisor() != 0)
        fail(ErrorCode::dimension, "benchmark resolution " + std::to_string(resolution) + " is not a multiple of " +
                                       std::to_string(std::max(16, model.arch().required_divisor())));

    Image img(resolution, resolution, 3);
    Rng rng(seed);
    for (auto& v : img.values()) v = float(rng.uniform());

    for (int i = 0; i < warmup; ++i) (void)model.relight(img);

    BenchReport r;
    r.resolution = resolution;
    r.warmup_iters = warmup;
    r.timed_iters = iters;
    r.samples_s.reserve(std::size_t(iters));
    for (int i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Image out = model.relight(img);
        const auto t1 = std::chrono::steady_clock::now();
        if (out.size() != img.size()) fail(ErrorCode::numeric, "benchmark forward produced a wrong-sized image");
        r.samples_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    double sum = 0;
    for (double s : r.samples_s) sum += s;
    r.mean_s = sum / iters;
    double var = 0;
    for (double s : r.samples_s) var += (s - r.mean_s) * (s - r.mean_s);
    r.stddev_s = std::sqrt(var / iters);
    r.p50_s = percentile(r.samples_s, 0.5);
    r.p95_s = percentile(r.samples_s, 0.95);
    const ParamStats st = model.stats();
    r.params = st.count;
    r.fp32_mb = double(st.fp32_bytes) / (1024.0 * 1024.0);
    r.device_descr = cpu_description();
    return r;
}

std::string BenchReport::to_json() const {
    nlohmann::ordered_json j;
    j["resolution"] = resolution;
    j["warmup_iters"] = warmup_iters;
    j["timed_iters"] = timed_iters;
    j["mean_s"] = mean_s;
    j["p50_s"] = p50_s;
    j["p95_s"] = p95_s;
    j["stddev_s"] = stddev_s;
    j["cv"] = cv();
    j["params"] = params;
    j["fp32_mb"] = fp32_mb;
    j["device_descr"] = device_descr;
    j["timing_scope"] = "forward pass only; image I/O, pre/post-processing and model loading excluded";
    j["reference"] = {{"latency_s", kReferenceLatencyS},
                      {"resolution", 1024},
                      {"hardware", "11 GB consumer GPU"},
                      {"note", "published figure, hardware-specific, not compared automatically"}};
    j["samples_s"] = samples_s;
    return j.dump(2);
}

std::string BenchReport::to_csv_row(const std::string& method) const {
    std::ostringstream s;
    s.precision(6);
    s << method << ",,,," << mean_s;
    return s.str();
}

}  // namespace dsrn
