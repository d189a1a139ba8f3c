#include "dsrn/config_io.hpp"

#include "dsrn/training.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace dsrn {

using nlohmann::json;

namespace {

void check_object(const json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object()) fail(ErrorCode::config, std::string(what) + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) fail(ErrorCode::config, std::string("unknown key '") + k + "' in " + what);
    }
}

template <typename V>
void read(const json& j, const char* key, V& out, const char* what) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<V>();
    } catch (const json::exception& e) {
        fail(ErrorCode::config, std::string(what) + "." + key + ": " + e.what());
    }
}

}  // namespace

void to_json(json& j, const ArchConfig& a) {
    j = json{{"pyramid_levels", a.pyramid_levels},
             {"enc_hierarchy_depth", a.enc_hierarchy_depth},
             {"res_blocks_per_stage", a.res_blocks_per_stage},
             {"base_channels", a.base_channels},
             {"channel_multipliers", a.channel_multipliers},
             {"stacks", a.stacks},
             {"shared_stacks", a.shared_stacks},
             {"leaky_slope", a.leaky_slope}};
}

void from_json(const json& j, ArchConfig& a) {
    constexpr const char* what = "arch";
    check_object(j,
                 {"pyramid_levels", "enc_hierarchy_depth", "res_blocks_per_stage", "base_channels",
                  "channel_multipliers", "stacks", "shared_stacks", "leaky_slope"},
                 what);
    read(j, "pyramid_levels", a.pyramid_levels, what);
    read(j, "enc_hierarchy_depth", a.enc_hierarchy_depth, what);
    read(j, "res_blocks_per_stage", a.res_blocks_per_stage, what);
    read(j, "base_channels", a.base_channels, what);
    read(j, "channel_multipliers", a.channel_multipliers, what);
    read(j, "stacks", a.stacks, what);
    read(j, "shared_stacks", a.shared_stacks, what);
    read(j, "leaky_slope", a.leaky_slope, what);
    a.validate();
}

void to_json(json& j, const LossWeights& w) {
    j = json{{"l1", w.l1}, {"ssim", w.ssim}, {"perceptual", w.perceptual}, {"tv", w.tv}};
}

void from_json(const json& j, LossWeights& w) {
    constexpr const char* what = "loss_weights";
    check_object(j, {"l1", "ssim", "perceptual", "tv"}, what);
    read(j, "l1", w.l1, what);
    read(j, "ssim", w.ssim, what);
    read(j, "perceptual", w.perceptual, what);
    read(j, "tv", w.tv, what);
    w.validate();
}

void to_json(json& j, const IlluminationSetting& s) {
    j = json{{"direction", to_string(s.direction)}, {"temp", s.temperature_k}};
}

void from_json(const json& j, IlluminationSetting& s) {
    check_object(j, {"direction", "temp"}, "illumination setting");
    std::string dir = to_string(s.direction);
    read(j, "direction", dir, "illumination setting");
    read(j, "temp", s.temperature_k, "illumination setting");
    const auto d = parse_direction(dir);
    if (!d) fail(ErrorCode::config, "unknown light direction '" + dir + "'");
    s.direction = *d;
    s.validate();
}

void to_json(json& j, const Task& t) {
    j = json{{"kind", to_string(t.kind)}, {"source", t.source}, {"w1", t.w1}, {"w2", t.w2}};
}

void from_json(const json& j, Task& t) {
    check_object(j, {"kind", "source", "w1", "w2"}, "task");
    std::string kind = to_string(t.kind);
    read(j, "kind", kind, "task");
    const auto k = parse_task_kind(kind);
    if (!k) fail(ErrorCode::config, "unknown task kind '" + kind + "'");
    t.kind = *k;
    if (j.contains("source")) t.source = j.at("source").get<IlluminationSetting>();
    read(j, "w1", t.w1, "task");
    read(j, "w2", t.w2, "task");
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"batch_size", c.batch_size},     {"input_size", c.input_size},     {"lr_init", c.lr_init},
             {"lr_final", c.lr_final},         {"steps_stage1", c.steps_stage1}, {"steps_stage2", c.steps_stage2},
             {"loss_weights", c.loss_weights}, {"seed", c.seed},                 {"val_every", c.val_every},
             {"clip_norm", c.clip_norm},       {"adam_beta1", c.adam_beta1},     {"adam_beta2", c.adam_beta2},
             {"adam_eps", c.adam_eps}};
}

void from_json(const json& j, TrainConfig& c) {
    constexpr const char* what = "train";
    check_object(j,
                 {"batch_size", "input_size", "lr_init", "lr_final", "steps_stage1", "steps_stage2", "loss_weights",
                  "seed", "val_every", "clip_norm", "adam_beta1", "adam_beta2", "adam_eps"},
                 what);
    read(j, "batch_size", c.batch_size, what);
    read(j, "input_size", c.input_size, what);
    read(j, "lr_init", c.lr_init, what);
    read(j, "lr_final", c.lr_final, what);
    read(j, "steps_stage1", c.steps_stage1, what);
    read(j, "steps_stage2", c.steps_stage2, what);
    if (j.contains("loss_weights")) c.loss_weights = j.at("loss_weights").get<LossWeights>();
    read(j, "seed", c.seed, what);
    read(j, "val_every", c.val_every, what);
    read(j, "clip_norm", c.clip_norm, what);
    read(j, "adam_beta1", c.adam_beta1, what);
    read(j, "adam_beta2", c.adam_beta2, what);
    read(j, "adam_eps", c.adam_eps, what);
    c.validate();
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::format, std::string(what) + ": " + e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path.string());
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace dsrn
