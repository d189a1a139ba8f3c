#pragma once

#include "dsrn/imaging.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dsrn {

/// Compass bearing of the light source, clockwise from north.
enum class Direction { N, NE, E, SE, S, SW, W, NW };

inline constexpr std::array<Direction, 8> kAllDirections{Direction::N, Direction::NE, Direction::E, Direction::SE,
                                                         Direction::S, Direction::SW, Direction::W, Direction::NW};
inline constexpr std::array<int, 5> kTemperatures{2500, 3500, 4500, 5500, 6500};

const char* to_string(Direction d) noexcept;
std::optional<Direction> parse_direction(std::string_view token);
double azimuth_degrees(Direction d) noexcept;
/// 180 degree rotation: N<->S, E<->W, NE<->SW, NW<->SE.
Direction opposite(Direction d) noexcept;
bool is_supported_temperature(int kelvin) noexcept;

struct IlluminationSetting {
    Direction direction = Direction::N;
    int temperature_k = 6500;

    void validate() const;
    std::string to_string() const;  // e.g. "N@6500"
    auto operator<=>(const IlluminationSetting&) const = default;
};

/// Scene id -> (setting -> image path).
struct SceneIndex {
    std::map<std::string, std::map<IlluminationSetting, std::filesystem::path>> scenes;
    std::vector<std::string> skipped;  // files that could not be parsed

    std::size_t scene_count() const { return scenes.size(); }
    std::size_t image_count() const;
    std::vector<std::string> scene_ids() const;
    /// Restriction of the index to the given scene ids (unknown ids are a data error).
    SceneIndex subset(const std::vector<std::string>& ids) const;
};

inline constexpr std::string_view kDefaultNamePattern = "{scene}_{direction}_{temp}.png";

/// Scans `root` recursively, matching file names against `pattern`, which must contain the
/// {scene}, {direction} and {temp} placeholders.
SceneIndex index_dataset(const std::filesystem::path& root, std::string_view pattern = kDefaultNamePattern);

/// Reads a JSON manifest: [{"path": ..., "scene": ..., "direction": "N", "temp": 6500}, ...].
/// Relative paths are resolved against the manifest's directory.
SceneIndex index_manifest(const std::filesystem::path& manifest);
void write_manifest(const SceneIndex& index, const std::filesystem::path& manifest);

/// Weighted overlay w1*a + w2*b of two captures (warns when the weights do not sum to one).
Image fuse_opposite(const Image& a, const Image& b, double w1 = 0.5, double w2 = 0.5);

struct Task {
    enum class Kind { single, multi };
    Kind kind = Kind::single;
    IlluminationSetting source;  // multi: the second input uses opposite(source.direction)
    double w1 = 0.5;
    double w2 = 0.5;

    std::vector<IlluminationSetting> input_settings() const;
    int input_count() const { return kind == Kind::single ? 1 : 2; }
};

const char* to_string(Task::Kind k) noexcept;
std::optional<Task::Kind> parse_task_kind(std::string_view s);

struct ScenePair {
    std::string scene;
    Image input;
    std::vector<IlluminationSetting> input_settings;
    Image target;
    IlluminationSetting target_setting;
};

/// Builds one input/target pair per scene that has every required capture; incomplete
/// scenes are skipped with a warning.
std::vector<ScenePair> make_pairs(const SceneIndex& index, const Task& task, const IlluminationSetting& target);

/// Builds the network input for one scene from already loaded captures.
Image make_task_input(const Task& task, const std::vector<Image>& captures);

struct Split {
    std::uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Random scene-level hold-out: `n_test` scenes for testing, the rest for training.
Split split_custom(const SceneIndex& index, std::size_t n_test = 60, std::uint64_t seed = 0);
void write_split(const Split& split, const std::filesystem::path& path);
Split read_split(const std::filesystem::path& path);

}  // namespace dsrn
