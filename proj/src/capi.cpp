#include "dsrn/dsrn.h"

#include "dsrn/bench.hpp"
#include "dsrn/checkpoint.hpp"
#include "dsrn/config_io.hpp"
#include "dsrn/log.hpp"
#include "dsrn/metrics.hpp"
#include "dsrn/synth.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>

struct dsrn_model {
    dsrn::Checkpoint ckpt;
};

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;
std::string g_device;

dsrn_status to_status(dsrn::ErrorCode c) {
    switch (c) {
        case dsrn::ErrorCode::format: return DSRN_ERR_FORMAT;
        case dsrn::ErrorCode::dimension: return DSRN_ERR_DIMENSION;
        case dsrn::ErrorCode::config: return DSRN_ERR_CONFIG;
        case dsrn::ErrorCode::data: return DSRN_ERR_DATA;
        case dsrn::ErrorCode::io: return DSRN_ERR_IO;
        case dsrn::ErrorCode::numeric: return DSRN_ERR_NUMERIC;
        case dsrn::ErrorCode::corrupt: return DSRN_ERR_CORRUPT;
        case dsrn::ErrorCode::version: return DSRN_ERR_VERSION;
        case dsrn::ErrorCode::usage: return DSRN_ERR_USAGE;
        case dsrn::ErrorCode::unsupported: return DSRN_ERR_UNSUPPORTED;
    }
    return DSRN_ERR_INTERNAL;
}

template <typename F>
dsrn_status guarded(F&& f) {
    try {
        g_last_error.clear();
        f();
        return DSRN_OK;
    } catch (const dsrn::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const json::exception& e) {
        g_last_error = std::string("invalid request: ") + e.what();
        return DSRN_ERR_CONFIG;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return DSRN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DSRN_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) dsrn::fail(dsrn::ErrorCode::usage, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void check_device() {
    if (g_device.empty()) {
        const char* env = std::getenv("DSRN_DEVICE");
        g_device = env && *env ? env : "cpu";
    }
    if (g_device != "cpu")
        dsrn::fail(dsrn::ErrorCode::unsupported, "device '" + g_device + "' is not available; only 'cpu' is supported");
}

json parse_request(const char* text) {
    need(text, "request");
    json j = dsrn::parse_json(text, "request");
    if (!j.is_object()) dsrn::fail(dsrn::ErrorCode::config, "request must be a JSON object");
    return j;
}

dsrn::SceneIndex index_from(const json& req) {
    if (req.contains("manifest") && !req["manifest"].is_null())
        return dsrn::index_manifest(req["manifest"].get<std::string>());
    if (req.contains("data") && !req["data"].is_null())
        return dsrn::index_dataset(req["data"].get<std::string>(),
                                   req.value("pattern", std::string(dsrn::kDefaultNamePattern)));
    dsrn::fail(dsrn::ErrorCode::usage, "either a dataset directory or a manifest is required");
}

dsrn::Task task_from(const json& req, const std::optional<dsrn::Task>& fallback) {
    if (req.contains("task")) return req["task"].get<dsrn::Task>();
    if (fallback) return *fallback;
    return dsrn::Task{};
}

dsrn::IlluminationSetting target_from(const json& req, const std::optional<dsrn::IlluminationSetting>& fallback) {
    if (req.contains("target")) return req["target"].get<dsrn::IlluminationSetting>();
    if (fallback) return *fallback;
    return dsrn::IlluminationSetting{dsrn::Direction::E, 4500};
}

dsrn::Split split_from(const json& req, const dsrn::SceneIndex& index) {
    if (req.contains("split_file") && !req["split_file"].is_null())
        return dsrn::read_split(req["split_file"].get<std::string>());
    const json s = req.value("split", json::object());
    const std::size_t n = index.scene_count();
    std::size_t n_test = n > 120 ? 60 : std::max<std::size_t>(1, n / 5);
    if (s.contains("n_test")) n_test = s["n_test"].get<std::size_t>();
    return dsrn::split_custom(index, n_test, s.value("seed", std::uint64_t(0)));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) dsrn::fail(dsrn::ErrorCode::io, "cannot write " + path.string());
    out << text;
}

}  // namespace

extern "C" {

const char* dsrn_version(void) { return DSRN_VERSION_STRING; }

const char* dsrn_last_error(void) { return g_last_error.c_str(); }

const char* dsrn_status_name(dsrn_status status) {
    switch (status) {
        case DSRN_OK: return "ok";
        case DSRN_ERR_FORMAT: return "format error";
        case DSRN_ERR_DIMENSION: return "dimension error";
        case DSRN_ERR_CONFIG: return "config error";
        case DSRN_ERR_DATA: return "data error";
        case DSRN_ERR_IO: return "io error";
        case DSRN_ERR_NUMERIC: return "numeric error";
        case DSRN_ERR_CORRUPT: return "corrupt archive";
        case DSRN_ERR_VERSION: return "version mismatch";
        case DSRN_ERR_USAGE: return "usage error";
        case DSRN_ERR_UNSUPPORTED: return "unsupported";
        case DSRN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void dsrn_set_log_level(dsrn_log_level level) {
    dsrn::set_log_level(static_cast<dsrn::LogLevel>(std::clamp(int(level), 0, 4)));
}

void dsrn_string_free(char* s) { std::free(s); }

uint64_t dsrn_fnv1a64(const void* data, size_t n) { return dsrn::fnv1a64(data, n); }

dsrn_status dsrn_select_device(const char* name) {
    return guarded([&] {
        need(name, "device name");
        if (std::string(name) != "cpu")
            dsrn::fail(dsrn::ErrorCode::unsupported, std::string("device '") + name + "' is not available; only 'cpu' is supported");
        g_device = name;
    });
}

dsrn_status dsrn_model_create(const char* arch_json, uint64_t seed, dsrn_model** out) {
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        dsrn::ArchConfig arch;
        if (arch_json) arch = dsrn::parse_json(arch_json, "architecture").get<dsrn::ArchConfig>();
        *out = new dsrn_model{dsrn::Checkpoint(dsrn::Dsrn<float>(arch, seed))};
    });
}

dsrn_status dsrn_model_load(const char* checkpoint_path, dsrn_model** out) {
    return guarded([&] {
        need(out, "out");
        need(checkpoint_path, "checkpoint path");
        *out = nullptr;
        *out = new dsrn_model{dsrn::load_checkpoint(checkpoint_path)};
    });
}

dsrn_status dsrn_model_save(const dsrn_model* model, const char* checkpoint_path) {
    return guarded([&] {
        need(model, "model");
        need(checkpoint_path, "checkpoint path");
        dsrn::save_checkpoint(model->ckpt, checkpoint_path);
    });
}

void dsrn_model_destroy(dsrn_model* model) { delete model; }

dsrn_status dsrn_model_param_stats(const dsrn_model* model, uint64_t* count, uint64_t* fp32_bytes) {
    return guarded([&] {
        need(model, "model");
        const auto st = model->ckpt.model.stats();
        if (count) *count = st.count;
        if (fp32_bytes) *fp32_bytes = st.fp32_bytes;
    });
}

dsrn_status dsrn_model_input_count(const dsrn_model* model, int* count) {
    return guarded([&] {
        need(model, "model");
        need(count, "count");
        *count = model->ckpt.task ? model->ckpt.task->input_count() : 1;
    });
}

dsrn_status dsrn_model_info(const dsrn_model* model, char** json_out) {
    return guarded([&] {
        need(model, "model");
        need(json_out, "json_out");
        const auto& c = model->ckpt;
        json j;
        j["arch"] = c.model.arch();
        j["train"] = c.config;
        j["stage"] = c.stage;
        j["step"] = c.step;
        j["best_val_psnr"] = c.best_val_psnr;
        j["task"] = c.task ? json(*c.task) : json(nullptr);
        j["target"] = c.target ? json(*c.target) : json(nullptr);
        const auto st = c.model.stats();
        j["params"] = st.count;
        j["fp32_bytes"] = st.fp32_bytes;
        *json_out = dup_string(j.dump(2));
    });
}

dsrn_status dsrn_relight(const dsrn_model* model, const float* input, int height, int width, float* output) {
    return guarded([&] {
        need(model, "model");
        need(input, "input");
        need(output, "output");
        check_device();
        if (height <= 0 || width <= 0) dsrn::fail(dsrn::ErrorCode::dimension, "image size must be positive");
        dsrn::Image img(height, width, 3);
        std::memcpy(img.data(), input, img.size() * sizeof(float));
        const dsrn::Image out = model->ckpt.model.relight(img);
        std::memcpy(output, out.data(), out.size() * sizeof(float));
    });
}

dsrn_status dsrn_relight_files(const dsrn_model* model, const char* input, const char* input2, const char* output) {
    return guarded([&] {
        need(model, "model");
        need(input, "input path");
        need(output, "output path");
        check_device();
        const dsrn::Task task = model->ckpt.task.value_or(dsrn::Task{});
        std::vector<dsrn::Image> captures{dsrn::load_image(input)};
        if (input2) captures.push_back(dsrn::load_image(input2));
        const dsrn::Image x = dsrn::make_task_input(task, captures);
        dsrn::save_image(output, model->ckpt.model.relight(x));
    });
}

dsrn_status dsrn_synth_corpus(const char* request_json, char** result_json) {
    return guarded([&] {
        need(result_json, "result_json");
        const json req = parse_request(request_json);
        dsrn::synth::CorpusSpec spec;
        spec.n_scenes = req.value("scenes", spec.n_scenes);
        spec.size = req.value("size", spec.size);
        spec.seed = req.value("seed", spec.seed);
        if (req.contains("directions")) {
            spec.directions.clear();
            for (const auto& d : req["directions"]) {
                const auto dir = dsrn::parse_direction(d.get<std::string>());
                if (!dir) dsrn::fail(dsrn::ErrorCode::config, "unknown direction " + d.dump());
                spec.directions.push_back(*dir);
            }
        }
        if (req.contains("temperatures")) spec.temperatures = req["temperatures"].get<std::vector<int>>();
        const fs::path out = req.at("out").get<std::string>();
        const auto index = dsrn::synth::generate_corpus(spec, out);
        nlohmann::ordered_json r;
        r["out"] = out.string();
        r["manifest"] = (out / "manifest.json").string();
        r["scenes"] = index.scene_count();
        r["images"] = index.image_count();
        *result_json = dup_string(r.dump(2));
    });
}

dsrn_status dsrn_train(const char* request_json, char** result_json) {
    return guarded([&] {
        need(result_json, "result_json");
        check_device();
        const json req = parse_request(request_json);
        const fs::path out = req.at("out").get<std::string>();
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) dsrn::fail(dsrn::ErrorCode::io, "cannot create " + out.string() + ": " + ec.message());

        const dsrn::ArchConfig arch = req.value("arch", json::object()).get<dsrn::ArchConfig>();
        const dsrn::TrainConfig cfg = req.value("train", json::object()).get<dsrn::TrainConfig>();
        const dsrn::Task task = task_from(req, std::nullopt);
        const dsrn::IlluminationSetting target = target_from(req, std::nullopt);

        const dsrn::SceneIndex index = index_from(req);
        const dsrn::Split split = split_from(req, index);
        dsrn::write_split(split, out / "split.json");
        const auto train_pairs = dsrn::make_pairs(index.subset(split.train), task, target);
        const auto val_pairs = dsrn::make_pairs(index.subset(split.test), task, target);
        if (train_pairs.empty()) dsrn::fail(dsrn::ErrorCode::data, "no training scene has the captures the task needs");

        std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
        if (!log) dsrn::fail(dsrn::ErrorCode::io, "cannot write training log in " + out.string());
        dsrn::StageOptions opt;
        opt.validation = val_pairs;
        opt.log = &log;
        opt.best_checkpoint = out / "best.dsrn";

        dsrn::Checkpoint ckpt(dsrn::Dsrn<float>(arch, cfg.seed));
        ckpt.config = cfg;
        ckpt.task = task;
        ckpt.target = target;
        dsrn::train_stage(ckpt, train_pairs, dsrn::Objective::l2, 1, cfg.steps_stage1, opt);
        if (cfg.steps_stage2 > 0) dsrn::train_stage(ckpt, train_pairs, dsrn::Objective::combined, 2, cfg.steps_stage2, opt);
        const fs::path final_path = out / "checkpoint.dsrn";
        dsrn::save_checkpoint(ckpt, final_path);

        nlohmann::ordered_json r;
        r["checkpoint"] = final_path.string();
        r["best_checkpoint"] = fs::exists(out / "best.dsrn") ? json((out / "best.dsrn").string()) : json(nullptr);
        r["log"] = (out / "train_log.jsonl").string();
        r["split"] = (out / "split.json").string();
        r["n_train"] = train_pairs.size();
        r["n_val"] = val_pairs.size();
        r["stage"] = ckpt.stage;
        r["step"] = ckpt.step;
        r["best_val_psnr"] = ckpt.best_val_psnr;
        r["final_val_psnr"] = val_pairs.empty() ? json(nullptr) : json(dsrn::mean_psnr(ckpt.model, val_pairs));
        *result_json = dup_string(r.dump(2));
    });
}

dsrn_status dsrn_evaluate(const char* request_json, char** result_json) {
    return guarded([&] {
        need(result_json, "result_json");
        check_device();
        const json req = parse_request(request_json);
        const dsrn::Checkpoint ckpt = dsrn::load_checkpoint(req.at("checkpoint").get<std::string>());
        const dsrn::Task task = task_from(req, ckpt.task);
        const dsrn::IlluminationSetting target = target_from(req, ckpt.target);
        dsrn::SceneIndex index = index_from(req);
        if (req.contains("split_file") && !req["split_file"].is_null()) {
            const dsrn::Split split = dsrn::read_split(req["split_file"].get<std::string>());
            const std::string subset = req.value("subset", std::string("test"));
            if (subset == "test")
                index = index.subset(split.test);
            else if (subset == "train")
                index = index.subset(split.train);
            else if (subset != "all")
                dsrn::fail(dsrn::ErrorCode::usage, "subset must be test, train or all");
        }
        const auto pairs = dsrn::make_pairs(index, task, target);
        const dsrn::RandomConvExtractor<float> extractor;
        dsrn::EvalOptions opt;
        if (req.value("perceptual", true)) opt.extractor = &extractor;
        const dsrn::MetricReport report = dsrn::evaluate_dataset(ckpt.model, pairs, opt);
        const std::string text = report.to_json();
        if (req.contains("out_json")) write_text(req["out_json"].get<std::string>(), text);
        if (req.contains("out_csv"))
            write_text(req["out_csv"].get<std::string>(),
                       dsrn::MetricReport::csv_header() + "\n" + report.to_csv_row(req.value("method", std::string("DSRN"))) + "\n");
        *result_json = dup_string(text);
    });
}

dsrn_status dsrn_bench(const char* request_json, char** result_json) {
    return guarded([&] {
        need(result_json, "result_json");
        check_device();
        const json req = parse_request(request_json);
        std::optional<dsrn::Dsrn<float>> model;
        if (req.contains("checkpoint") && !req["checkpoint"].is_null())
            model.emplace(dsrn::load_checkpoint(req["checkpoint"].get<std::string>()).model);
        else
            model.emplace(req.value("arch", json::object()).get<dsrn::ArchConfig>(), req.value("seed", std::uint64_t(0)));
        const dsrn::BenchReport rep = dsrn::time_inference(*model, req.value("resolution", 1024), req.value("warmup", 10),
                                                           req.value("iters", 50), req.value("seed", std::uint64_t(0)));
        const std::string text = rep.to_json();
        if (req.contains("out_json")) write_text(req["out_json"].get<std::string>(), text);
        if (req.contains("out_csv"))
            write_text(req["out_csv"].get<std::string>(),
                       dsrn::MetricReport::csv_header() + "\n" + rep.to_csv_row(req.value("method", std::string("DSRN"))) + "\n");
        *result_json = dup_string(text);
    });
}

}  // extern "C"
