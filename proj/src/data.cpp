#include "dsrn/data.hpp"

#include "dsrn/log.hpp"
#include "dsrn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

namespace dsrn {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Direction d) noexcept {
    switch (d) {
        case Direction::N: return "N";
        case Direction::NE: return "NE";
        case Direction::E: return "E";
        case Direction::SE: return "SE";
        case Direction::S: return "S";
        case Direction::SW: return "SW";
        case Direction::W: return "W";
        case Direction::NW: return "NW";
    }
    return "?";
}

std::optional<Direction> parse_direction(std::string_view token) {
    std::string t(token);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return char(std::toupper(c)); });
    static const std::map<std::string, Direction> names{
        {"N", Direction::N},         {"NE", Direction::NE},         {"E", Direction::E},
        {"SE", Direction::SE},       {"S", Direction::S},           {"SW", Direction::SW},
        {"W", Direction::W},         {"NW", Direction::NW},         {"NORTH", Direction::N},
        {"NORTHEAST", Direction::NE}, {"EAST", Direction::E},        {"SOUTHEAST", Direction::SE},
        {"SOUTH", Direction::S},     {"SOUTHWEST", Direction::SW},  {"WEST", Direction::W},
        {"NORTHWEST", Direction::NW}};
    const auto it = names.find(t);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

double azimuth_degrees(Direction d) noexcept { return 45.0 * double(static_cast<int>(d)); }

Direction opposite(Direction d) noexcept { return static_cast<Direction>((static_cast<int>(d) + 4) % 8); }

bool is_supported_temperature(int kelvin) noexcept {
    return std::find(kTemperatures.begin(), kTemperatures.end(), kelvin) != kTemperatures.end();
}

void IlluminationSetting::validate() const {
    require(is_supported_temperature(temperature_k), ErrorCode::config,
            "unsupported colour temperature " + std::to_string(temperature_k) + " K");
}

std::string IlluminationSetting::to_string() const {
    return std::string(dsrn::to_string(direction)) + "@" + std::to_string(temperature_k);
}

std::size_t SceneIndex::image_count() const {
    std::size_t n = 0;
    for (const auto& [id, settings] : scenes) n += settings.size();
    return n;
}

std::vector<std::string> SceneIndex::scene_ids() const {
    std::vector<std::string> ids;
    ids.reserve(scenes.size());
    for (const auto& [id, settings] : scenes) ids.push_back(id);
    return ids;
}

SceneIndex SceneIndex::subset(const std::vector<std::string>& ids) const {
    SceneIndex out;
    for (const auto& id : ids) {
        const auto it = scenes.find(id);
        if (it == scenes.end()) fail(ErrorCode::data, "scene '" + id + "' is not in the index");
        out.scenes.emplace(id, it->second);
    }
    return out;
}

namespace {

struct CompiledPattern {
    std::regex re;
    int scene_group = 0, dir_group = 0, temp_group = 0;
};

CompiledPattern compile_pattern(std::string_view pattern) {
    CompiledPattern cp;
    std::string re;
    int group = 0;
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            const std::size_t close = pattern.find('}', i);
            require(close != std::string_view::npos, ErrorCode::config, "unterminated placeholder in file pattern");
            const std::string_view name = pattern.substr(i + 1, close - i - 1);
            ++group;
            if (name == "scene") {
                cp.scene_group = group;
                re += "(.+?)";
            } else if (name == "direction") {
                cp.dir_group = group;
                re += "([A-Za-z]+)";
            } else if (name == "temp") {
                cp.temp_group = group;
                re += "([0-9]+)";
            } else {
                fail(ErrorCode::config, "unknown placeholder {" + std::string(name) + "} in file pattern");
            }
            i = close + 1;
            continue;
        }
        const char c = pattern[i++];
        if (std::string_view(".^$|()[]{}*+?\\").find(c) != std::string_view::npos) re += '\\';
        re += c;
    }
    require(cp.scene_group && cp.dir_group && cp.temp_group, ErrorCode::config,
            "file pattern needs {scene}, {direction} and {temp}");
    cp.re = std::regex(re);
    return cp;
}

void add_entry(SceneIndex& index, const std::string& scene, const IlluminationSetting& s, const fs::path& path) {
    auto& settings = index.scenes[scene];
    if (!settings.emplace(s, path).second)
        log_warn("duplicate capture " + s.to_string() + " for scene " + scene + ": keeping " +
                 settings.at(s).string());
}

void check_consistency(const SceneIndex& index) {
    std::set<std::size_t> counts;
    for (const auto& [id, settings] : index.scenes) counts.insert(settings.size());
    if (counts.size() > 1)
        log_warn("scenes expose different numbers of illumination settings (" + std::to_string(*counts.begin()) +
                 " to " + std::to_string(*counts.rbegin()) + ")");
}

}  // namespace

SceneIndex index_dataset(const fs::path& root, std::string_view pattern) {
    if (!fs::is_directory(root)) fail(ErrorCode::io, "dataset root " + root.string() + " is not a directory");
    const CompiledPattern cp = compile_pattern(pattern);
    SceneIndex index;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const std::string name = path.filename().string();
        if (path.extension() == ".json") continue;
        std::smatch m;
        if (!std::regex_match(name, m, cp.re)) {
            index.skipped.push_back(path.string());
            log_warn("skipping " + name + ": does not match pattern");
            continue;
        }
        const auto dir = parse_direction(m[std::size_t(cp.dir_group)].str());
        const int temp = std::stoi(m[std::size_t(cp.temp_group)].str());
        if (!dir || !is_supported_temperature(temp)) {
            index.skipped.push_back(path.string());
            log_warn("skipping " + name + ": unknown direction or temperature token");
            continue;
        }
        add_entry(index, m[std::size_t(cp.scene_group)].str(), {*dir, temp}, path);
    }
    if (index.scenes.empty()) fail(ErrorCode::data, "no images matching '" + std::string(pattern) + "' under " + root.string());
    check_consistency(index);
    return index;
}

SceneIndex index_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) fail(ErrorCode::io, "cannot open manifest " + manifest.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "manifest " + manifest.string() + ": " + e.what());
    }
    const json& entries = j.is_object() && j.contains("images") ? j["images"] : j;
    if (!entries.is_array()) fail(ErrorCode::format, "manifest must be a list of entries");
    SceneIndex index;
    const fs::path base = manifest.parent_path();
    for (const auto& e : entries) {
        try {
            const auto dir = parse_direction(e.at("direction").get<std::string>());
            const int temp = e.at("temp").get<int>();
            fs::path p = e.at("path").get<std::string>();
            if (p.is_relative()) p = base / p;
            if (!dir || !is_supported_temperature(temp)) {
                index.skipped.push_back(p.string());
                log_warn("manifest entry " + p.string() + " has an unknown direction or temperature");
                continue;
            }
            add_entry(index, e.at("scene").get<std::string>(), {*dir, temp}, p);
        } catch (const json::exception& ex) {
            fail(ErrorCode::format, "malformed manifest entry: " + std::string(ex.what()));
        }
    }
    if (index.scenes.empty()) fail(ErrorCode::data, "manifest " + manifest.string() + " lists no usable images");
    check_consistency(index);
    return index;
}

void write_manifest(const SceneIndex& index, const fs::path& manifest) {
    json entries = json::array();
    const fs::path base = manifest.parent_path();
    for (const auto& [scene, settings] : index.scenes)
        for (const auto& [s, path] : settings) {
            fs::path rel = path.lexically_relative(base.empty() ? fs::path(".") : base);
            if (rel.empty() || *rel.begin() == "..") rel = path;
            entries.push_back(
                {{"path", rel.generic_string()}, {"scene", scene}, {"direction", to_string(s.direction)}, {"temp", s.temperature_k}});
        }
    std::ofstream out(manifest);
    if (!out) fail(ErrorCode::io, "cannot write manifest " + manifest.string());
    out << entries.dump(1) << '\n';
}

Image fuse_opposite(const Image& a, const Image& b, double w1, double w2) {
    if (!a.same_shape(b)) fail(ErrorCode::dimension, "fuse_opposite: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    if (std::abs(w1 + w2 - 1.0) > 1e-9) log_warn("fuse_opposite: weights sum to " + std::to_string(w1 + w2) + ", not 1");
    Image out(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = float(w1 * double(a[i]) + w2 * double(b[i]));
    return out;
}

const char* to_string(Task::Kind k) noexcept { return k == Task::Kind::single ? "single" : "multi"; }

std::optional<Task::Kind> parse_task_kind(std::string_view s) {
    if (s == "single") return Task::Kind::single;
    if (s == "multi") return Task::Kind::multi;
    return std::nullopt;
}

std::vector<IlluminationSetting> Task::input_settings() const {
    if (kind == Kind::single) return {source};
    return {source, {opposite(source.direction), source.temperature_k}};
}

Image make_task_input(const Task& task, const std::vector<Image>& captures) {
    if (int(captures.size()) != task.input_count())
        fail(ErrorCode::usage, std::string(to_string(task.kind)) + " task needs " + std::to_string(task.input_count()) +
                                   " input image(s), got " + std::to_string(captures.size()));
    if (task.kind == Task::Kind::single) return captures[0];
    return fuse_opposite(captures[0], captures[1], task.w1, task.w2);
}

std::vector<ScenePair> make_pairs(const SceneIndex& index, const Task& task, const IlluminationSetting& target) {
    const auto inputs = task.input_settings();
    std::vector<ScenePair> pairs;
    for (const auto& [scene, settings] : index.scenes) {
        bool complete = settings.count(target) > 0;
        for (const auto& s : inputs) complete = complete && settings.count(s) > 0;
        if (!complete) {
            log_warn("scene " + scene + " lacks a capture required by the task; skipped");
            continue;
        }
        std::vector<Image> captures;
        for (const auto& s : inputs) captures.push_back(load_image(settings.at(s)));
        ScenePair pair;
        pair.scene = scene;
        pair.input = make_task_input(task, captures);
        pair.input_settings = inputs;
        pair.target = load_image(settings.at(target));
        pair.target_setting = target;
        if (!pair.input.same_shape(pair.target))
            fail(ErrorCode::data, "scene " + scene + ": input and target sizes differ");
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

Split split_custom(const SceneIndex& index, std::size_t n_test, std::uint64_t seed) {
    const std::size_t n = index.scene_count();
    if (n_test >= n)
        fail(ErrorCode::data, "cannot hold out " + std::to_string(n_test) + " of " + std::to_string(n) + " scenes");
    std::vector<std::string> ids = index.scene_ids();
    Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    Split split;
    split.seed = seed;
    split.test.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_test));
    split.train.assign(ids.begin() + std::ptrdiff_t(n_test), ids.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

void write_split(const Split& split, const fs::path& path) {
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["train"] = split.train;
    j["test"] = split.test;
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write split file " + path.string());
    out << j.dump(1) << '\n';
}

Split read_split(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open split file " + path.string());
    try {
        json j;
        in >> j;
        Split s;
        s.seed = j.value("seed", std::uint64_t(0));
        s.train = j.at("train").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "split file " + path.string() + ": " + e.what());
    }
}

}  // namespace dsrn
