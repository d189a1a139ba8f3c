// dsrn command-line tool. Talks to the library only through the C interface.

#include "dsrn/dsrn.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

int exit_code(dsrn_status s) {
    switch (s) {
        case DSRN_OK: return kOk;
        case DSRN_ERR_USAGE:
        case DSRN_ERR_CONFIG: return kUsage;
        case DSRN_ERR_DATA:
        case DSRN_ERR_FORMAT:
        case DSRN_ERR_IO:
        case DSRN_ERR_DIMENSION:
        case DSRN_ERR_CORRUPT:
        case DSRN_ERR_VERSION: return kData;
        default: return kRuntime;
    }
}

struct Failure {
    int code;
};

void check(dsrn_status s) {
    if (s == DSRN_OK) return;
    std::fprintf(stderr, "dsrn: %s: %s\n", dsrn_status_name(s), dsrn_last_error());
    throw Failure{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& msg) {
    std::fprintf(stderr, "dsrn: usage error: %s\n", msg.c_str());
    throw Failure{kUsage};
}

class CString {
public:
    CString() = default;
    CString(const CString&) = delete;
    CString& operator=(const CString&) = delete;
    ~CString() { dsrn_string_free(p_); }
    char** out() { return &p_; }
    std::string str() const { return p_ ? p_ : ""; }

private:
    char* p_ = nullptr;
};

class Model {
public:
    explicit Model(const std::string& path) { check(dsrn_model_load(path.c_str(), &m_)); }
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    ~Model() { dsrn_model_destroy(m_); }
    dsrn_model* get() const { return m_; }

private:
    dsrn_model* m_ = nullptr;
};

ordered_json read_config(const std::string& path) {
    if (path.empty()) return ordered_json::object();
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "dsrn: cannot open config %s\n", path.c_str());
        throw Failure{kData};
    }
    try {
        ordered_json j;
        in >> j;
        if (!j.is_object()) usage_error("config file must hold a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "dsrn: config %s: %s\n", path.c_str(), e.what());
        throw Failure{kUsage};
    }
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Records what produced the files in `dir`: tool version, seed and a hash of the full request.
void write_run_header(const fs::path& dir, const std::string& command, std::uint64_t seed, const ordered_json& request) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const std::string canonical = request.dump();
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(dsrn_fnv1a64(canonical.data(), canonical.size())));
    ordered_json h;
    h["tool"] = "dsrn";
    h["version"] = dsrn_version();
    h["command"] = command;
    h["seed"] = seed;
    h["config_hash"] = std::string("fnv1a64:") + hash;
    h["request"] = request;
    h["timestamp"] = utc_timestamp();
    std::ofstream out(dir / "run.json", std::ios::trunc);
    if (!out) {
        std::fprintf(stderr, "dsrn: cannot write %s\n", (dir / "run.json").c_str());
        throw Failure{kData};
    }
    out << h.dump(2) << '\n';
}

ordered_json data_source(const std::string& data, const std::string& manifest, const std::string& pattern) {
    ordered_json j;
    if (!manifest.empty())
        j["manifest"] = manifest;
    else if (!data.empty())
        j["data"] = data;
    else
        usage_error("one of --data or --manifest is required");
    if (!pattern.empty()) j["pattern"] = pattern;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DSRN image relighting: synthetic data, training, evaluation, inference and benchmarking"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dsrn_version()));

    const char* env_device = std::getenv("DSRN_DEVICE");
    std::string device = env_device && *env_device ? env_device : "cpu";
    std::string log_level = "info";
    app.add_option("--device", device, "Compute device (default from DSRN_DEVICE, else cpu)");
    app.add_option("--log-level", log_level, "debug, info, warn, error or off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "Render a synthetic multi-illumination corpus");
    int scenes = 10, size = 128;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    std::vector<std::string> directions;
    std::vector<int> temps;
    synth->add_option("--scenes", scenes, "Number of scenes")->check(CLI::PositiveNumber);
    synth->add_option("--size", size, "Image side in pixels (multiple of 16)")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Scene seed");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--directions", directions, "Subset of light directions (default: all 8)");
    synth->add_option("--temps", temps, "Subset of colour temperatures (default: all 5)");

    // train
    auto* train = app.add_subcommand("train", "Two-stage training on an image corpus");
    std::string data, manifest, pattern, config_path, train_out, task_kind = "single";
    std::string source_dir = "N", target_dir = "E";
    int source_temp = 6500, target_temp = 4500;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--data", data, "Dataset root scanned with --pattern");
    train->add_option("--manifest", manifest, "JSON manifest listing the images");
    train->add_option("--pattern", pattern, "File name pattern, e.g. {scene}_{direction}_{temp}.png");
    train->add_option("--task", task_kind, "single or multi")->check(CLI::IsMember({"single", "multi"}));
    train->add_option("--source-dir", source_dir, "Input light direction");
    train->add_option("--source-temp", source_temp, "Input colour temperature (K)");
    train->add_option("--target-dir", target_dir, "Target light direction");
    train->add_option("--target-temp", target_temp, "Target colour temperature (K)");
    train->add_option("--config", config_path, "JSON with arch, train, task and split sections");
    train->add_option("--seed", train_seed, "Overrides train.seed");
    train->add_option("--out", train_out, "Output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (PSNR, SSIM, perceptual distance)");
    std::string eval_ckpt, eval_data, eval_manifest, eval_pattern, split_path, subset = "test", eval_out;
    bool no_perceptual = false;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval->add_option("--data", eval_data, "Dataset root");
    eval->add_option("--manifest", eval_manifest, "JSON manifest");
    eval->add_option("--pattern", eval_pattern, "File name pattern");
    eval->add_option("--split", split_path, "Split file written by train (default: every scene)");
    eval->add_option("--subset", subset, "Which side of the split")->check(CLI::IsMember({"test", "train", "all"}));
    eval->add_flag("--no-perceptual", no_perceptual, "Skip the perceptual distance");
    eval->add_option("--out", eval_out, "Directory for metrics.json, metrics.csv and run.json")->required();

    // relight
    auto* relight = app.add_subcommand("relight", "Relight one image (two for multi-input checkpoints)");
    std::string rl_ckpt, rl_input, rl_input2, rl_out;
    relight->add_option("--checkpoint", rl_ckpt, "Checkpoint file")->required();
    relight->add_option("--input", rl_input, "Input PNG")->required();
    relight->add_option("--input2", rl_input2, "Opposite-direction PNG for multi-input checkpoints");
    relight->add_option("--out", rl_out, "Output PNG")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "Time inference at a given resolution");
    std::string bench_ckpt, bench_config, bench_out = ".";
    bool random_weights = false;
    int resolution = 1024, warmup = 10, iters = 50;
    std::uint64_t bench_seed = 0;
    auto* ck_opt = bench->add_option("--checkpoint", bench_ckpt, "Checkpoint file");
    auto* rw_opt = bench->add_flag("--random-weights", random_weights, "Use a freshly initialised model");
    ck_opt->excludes(rw_opt);
    bench->add_option("--config", bench_config, "JSON with an arch section for --random-weights");
    bench->add_option("--resolution", resolution, "Square image side")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", warmup, "Untimed iterations")->check(CLI::NonNegativeNumber);
    bench->add_option("--iters", iters, "Timed iterations (at least 10)")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "Seed for weights and the input image");
    bench->add_option("--out", bench_out, "Directory for bench.json, bench.csv and run.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        const dsrn_log_level lvl = log_level == "debug"  ? DSRN_LOG_DEBUG
                                   : log_level == "warn"  ? DSRN_LOG_WARN
                                   : log_level == "error" ? DSRN_LOG_ERROR
                                   : log_level == "off"   ? DSRN_LOG_OFF
                                                          : DSRN_LOG_INFO;
        dsrn_set_log_level(lvl);
        check(dsrn_select_device(device.c_str()));

        if (*synth) {
            ordered_json req;
            req["out"] = synth_out;
            req["scenes"] = scenes;
            req["size"] = size;
            req["seed"] = synth_seed;
            if (!directions.empty()) req["directions"] = directions;
            if (!temps.empty()) req["temperatures"] = temps;
            CString res;
            check(dsrn_synth_corpus(req.dump().c_str(), res.out()));
            write_run_header(synth_out, "synth-data", synth_seed, req);
            std::cout << res.str() << '\n';
        } else if (*train) {
            const ordered_json cfg = read_config(config_path);
            for (const auto& [k, v] : cfg.items())
                if (k != "arch" && k != "train" && k != "task" && k != "split") usage_error("unknown config section '" + k + "'");
            ordered_json req = data_source(data, manifest, pattern);
            req["out"] = train_out;
            req["arch"] = cfg.value("arch", ordered_json::object());
            req["train"] = cfg.value("train", ordered_json::object());
            if (train_seed) req["train"]["seed"] = *train_seed;
            ordered_json task = cfg.value("task", ordered_json::object());
            task["kind"] = task_kind;
            task["source"] = {{"direction", source_dir}, {"temp", source_temp}};
            req["task"] = task;
            req["target"] = {{"direction", target_dir}, {"temp", target_temp}};
            if (cfg.contains("split")) req["split"] = cfg["split"];
            const std::uint64_t seed = req["train"].value("seed", std::uint64_t(0));
            write_run_header(train_out, "train", seed, req);
            CString res;
            check(dsrn_train(req.dump().c_str(), res.out()));
            std::cout << res.str() << '\n';
        } else if (*eval) {
            ordered_json req = data_source(eval_data, eval_manifest, eval_pattern);
            req["checkpoint"] = eval_ckpt;
            if (!split_path.empty()) {
                req["split_file"] = split_path;
                req["subset"] = subset;
            }
            req["perceptual"] = !no_perceptual;
            const fs::path dir = eval_out;
            std::error_code ec;
            fs::create_directories(dir, ec);
            req["out_json"] = (dir / "metrics.json").string();
            req["out_csv"] = (dir / "metrics.csv").string();
            write_run_header(dir, "eval", 0, req);
            CString res;
            check(dsrn_evaluate(req.dump().c_str(), res.out()));
            std::cout << res.str() << '\n';
        } else if (*relight) {
            Model model(rl_ckpt);
            int needed = 1;
            check(dsrn_model_input_count(model.get(), &needed));
            const int given = rl_input2.empty() ? 1 : 2;
            if (given != needed)
                usage_error("this checkpoint expects " + std::to_string(needed) + " input image(s) but " +
                            std::to_string(given) + " were given" + (needed == 2 ? " (add --input2)" : ""));
            check(dsrn_relight_files(model.get(), rl_input.c_str(), rl_input2.empty() ? nullptr : rl_input2.c_str(),
                                     rl_out.c_str()));
            ordered_json req{{"checkpoint", rl_ckpt}, {"input", rl_input}, {"out", rl_out}};
            if (!rl_input2.empty()) req["input2"] = rl_input2;
            const fs::path parent = fs::path(rl_out).parent_path();
            write_run_header(parent.empty() ? fs::path(".") : parent, "relight", 0, req);
        } else if (*bench) {
            if (bench_ckpt.empty() && !random_weights) usage_error("bench needs --checkpoint or --random-weights");
            ordered_json req;
            if (!bench_ckpt.empty())
                req["checkpoint"] = bench_ckpt;
            else
                req["arch"] = read_config(bench_config).value("arch", ordered_json::object());
            req["resolution"] = resolution;
            req["warmup"] = warmup;
            req["iters"] = iters;
            req["seed"] = bench_seed;
            const fs::path dir = bench_out;
            std::error_code ec;
            fs::create_directories(dir, ec);
            req["out_json"] = (dir / "bench.json").string();
            req["out_csv"] = (dir / "bench.csv").string();
            write_run_header(dir, "bench", bench_seed, req);
            CString res;
            check(dsrn_bench(req.dump().c_str(), res.out()));
            std::cout << res.str() << '\n';
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return kOk;
}
