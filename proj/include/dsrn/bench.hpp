#pragma once

#include "dsrn/network.hpp"

#include <string>
#include <vector>

namespace dsrn {

/// Published reference latency for 1024x1024 inference on an 11 GB consumer GPU. Reported
/// for comparison only.
inline constexpr double kReferenceLatencyS = 0.0116;

struct BenchReport {
    int resolution = 0;
    int warmup_iters = 0;
    int timed_iters = 0;
    double mean_s = 0, p50_s = 0, p95_s = 0, stddev_s = 0;
    std::uint64_t params = 0;
    double fp32_mb = 0;  // MiB
    std::string device_descr;
    std::vector<double> samples_s;

    double cv() const { return mean_s > 0 ? stddev_s / mean_s : 0.0; }
    std::string to_json() const;
    /// Row in the metrics table layout with only the runtime column filled.
    std::string to_csv_row(const std::string& method = "DSRN") const;
};

/// Times model.relight on a fixed random image. Only the forward pass is inside the timed
/// region; image creation and model loading are not.
BenchReport time_inference(const Dsrn<float>& model, int resolution = 1024, int warmup = 10, int iters = 50,
                           std::uint64_t seed = 0);

/// Linear-interpolation percentile of `v` (q in [0,1]).
double percentile(std::vector<double> v, double q);

std::string cpu_description();

}  // namespace dsrn
