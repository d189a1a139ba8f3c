#include "dsrn/data.hpp"

#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace dsrn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dsrn_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Pixel value that identifies the scene and setting a capture belongs to.
int tag_of(int scene, const IlluminationSetting& s) {
    return scene * 40 + static_cast<int>(s.direction) * 5 + (s.temperature_k - 2500) / 1000;
}

void write_capture(const fs::path& dir, int scene, const IlluminationSetting& s, int size = 4) {
    Raw8Image raw;
    raw.height = raw.width = size;
    raw.channels = 3;
    raw.bytes.assign(std::size_t(size * size * 3), std::uint8_t(tag_of(scene, s) % 256));
    write_png(dir / ("scene" + std::to_string(scene) + "_" + to_string(s.direction) + "_" +
                     std::to_string(s.temperature_k) + ".png"),
              raw);
}

void write_scenes(const fs::path& dir, int n_scenes) {
    fs::create_directories(dir);
    for (int k = 0; k < n_scenes; ++k)
        for (Direction d : kAllDirections)
            for (int t : kTemperatures) write_capture(dir, k, {d, t});
}

SceneIndex synthetic_index(int n_scenes) {
    SceneIndex idx;
    for (int k = 0; k < n_scenes; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "s%03d", k);
        idx.scenes[id][{Direction::N, 6500}] = std::string(id) + ".png";
    }
    return idx;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("directions") {
    CHECK(opposite(Direction::N) == Direction::S);
    CHECK(opposite(Direction::E) == Direction::W);
    CHECK(opposite(Direction::NE) == Direction::SW);
    CHECK(opposite(Direction::NW) == Direction::SE);
    for (Direction d : kAllDirections) {
        CHECK(opposite(opposite(d)) == d);
        CHECK(opposite(d) != d);
        CHECK(std::fmod(azimuth_degrees(opposite(d)) - azimuth_degrees(d) + 360.0, 360.0) == 180.0);
        CHECK(parse_direction(to_string(d)) == d);
    }
    CHECK(azimuth_degrees(Direction::E) == 90.0);
    CHECK(parse_direction("north") == Direction::N);
    CHECK(parse_direction("se") == Direction::SE);
    CHECK_FALSE(parse_direction("Q"));
    CHECK(is_supported_temperature(4500));
    CHECK_FALSE(is_supported_temperature(4000));
    CHECK(IlluminationSetting{Direction::E, 4500}.to_string() == "E@4500");
    CHECK(test::error_code_of([] { IlluminationSetting{Direction::E, 3000}.validate(); }) == ErrorCode::config);
}

TEST_CASE("index_dataset") {
    const auto dir = temp_dir("index");
    write_scenes(dir / "nested", 2);

    SUBCASE("2 scenes x 40 settings") {
        const auto idx = index_dataset(dir);
        CHECK(idx.scene_count() == 2);
        CHECK(idx.image_count() == 80);
        CHECK(idx.skipped.empty());
        CHECK(idx.scene_ids() == std::vector<std::string>{"scene0", "scene1"});
        CHECK(idx.scenes.at("scene1").at({Direction::SW, 3500}).filename() == "scene1_SW_3500.png");
    }
    SUBCASE("unknown tokens are skipped with a warning") {
        Raw8Image raw;
        raw.height = raw.width = 4;
        raw.channels = 3;
        raw.bytes.assign(48, 0);
        write_png(dir / "scene0_Q_6500.png", raw);
        write_png(dir / "scene0_N_4000.png", raw);
        write_png(dir / "notes.png", raw);
        test::LogCapture logs;
        const auto idx = index_dataset(dir);
        CHECK(idx.image_count() == 80);
        CHECK(idx.skipped.size() == 3);
        CHECK(logs.contains("scene0_Q_6500.png"));
    }
    SUBCASE("custom pattern") {
        const auto other = temp_dir("pattern");
        Raw8Image raw;
        raw.height = raw.width = 4;
        raw.channels = 3;
        raw.bytes.assign(48, 0);
        write_png(other / "img-7-at-4500K-dir-NE.png", raw);
        const auto idx = index_dataset(other, "img-{scene}-at-{temp}K-dir-{direction}.png");
        REQUIRE(idx.image_count() == 1);
        CHECK(idx.scenes.at("7").count({Direction::NE, 4500}) == 1);
        CHECK(test::error_code_of([&] { (void)index_dataset(other, "{scene}_{temp}.png"); }) == ErrorCode::config);
    }
    SUBCASE("inconsistent scenes warn") {
        fs::remove(dir / "nested" / "scene1_N_2500.png");
        test::LogCapture logs;
        const auto idx = index_dataset(dir);
        CHECK(idx.image_count() == 79);
        CHECK(logs.contains("different numbers"));
    }
    SUBCASE("errors") {
        CHECK(test::error_code_of([] { (void)index_dataset(temp_dir("empty")); }) == ErrorCode::data);
        CHECK(test::error_code_of([] { (void)index_dataset("/nonexistent/dsrn"); }) == ErrorCode::io);
    }
}

TEST_CASE("manifest round trip") {
    const auto dir = temp_dir("manifest");
    write_scenes(dir / "imgs", 2);
    const auto idx = index_dataset(dir);
    write_manifest(idx, dir / "manifest.json");
    const auto back = index_manifest(dir / "manifest.json");
    CHECK(back.scenes == idx.scenes);
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    REQUIRE(j.is_array());
    CHECK(j.size() == 80);
    CHECK(fs::path(j[0]["path"].get<std::string>()).is_relative());

    std::ofstream(dir / "wrapped.json") << R"({"images": [{"path": "imgs/scene0_N_6500.png", "scene": "a",
        "direction": "N", "temp": 6500}]})";
    const auto wrapped = index_manifest(dir / "wrapped.json");
    CHECK(wrapped.scenes.at("a").at({Direction::N, 6500}) == dir / "imgs" / "scene0_N_6500.png");

    std::ofstream(dir / "bad.json") << "{not json";
    CHECK(test::error_code_of([&] { (void)index_manifest(dir / "bad.json"); }) == ErrorCode::format);
    CHECK(test::error_code_of([&] { (void)index_manifest(dir / "missing.json"); }) == ErrorCode::io);
}

TEST_CASE("fuse_opposite") {
    Image a(4, 4, 3, 0.2f), b(4, 4, 3, 0.6f);
    const Image fused = fuse_opposite(a, b);
    for (float v : fused.values()) CHECK(v == doctest::Approx(0.4f));
    CHECK(fuse_opposite(a, b, 1.0, 0.0) == a);
    Rng rng(70);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = test::random_tensor(rng, 5, 3, 3), y = test::random_tensor(rng, 5, 3, 3);
        const double w1 = rng.uniform();
        const auto f = fuse_opposite(x, y, w1, 1 - w1);
        for (float v : f.values()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f + 1e-6f);
        }
        const auto same = fuse_opposite(x, x, w1, 1 - w1);
        CHECK(max_abs_diff(same, x) < 1e-6);
    }
    test::LogCapture logs;
    (void)fuse_opposite(a, b, 0.7, 0.7);
    CHECK(logs.contains("weights sum"));
    CHECK(test::error_code_of([&] { (void)fuse_opposite(a, Image(4, 2, 3)); }) == ErrorCode::dimension);
}

TEST_CASE("tasks and pairs") {
    const auto dir = temp_dir("pairs");
    write_scenes(dir, 3);
    const auto idx = index_dataset(dir);
    const IlluminationSetting target{Direction::E, 4500};

    Task single;
    single.source = {Direction::N, 6500};
    CHECK(single.input_settings() == std::vector<IlluminationSetting>{{Direction::N, 6500}});

    Task multi = single;
    multi.kind = Task::Kind::multi;
    CHECK(multi.input_settings() == std::vector<IlluminationSetting>{{Direction::N, 6500}, {Direction::S, 6500}});
    CHECK(parse_task_kind("multi") == Task::Kind::multi);

    SUBCASE("single: one pair per scene, never across scenes") {
        const auto pairs = make_pairs(idx, single, target);
        REQUIRE(pairs.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(pairs[k].scene == "scene" + std::to_string(k));
            CHECK(pairs[k].input[0] == doctest::Approx(tag_of(int(k), single.source) / 255.0));
            CHECK(pairs[k].target[0] == doctest::Approx(tag_of(int(k), target) / 255.0));
            CHECK(pairs[k].target_setting == target);
        }
    }
    SUBCASE("multi: fused N and S") {
        const auto pairs = make_pairs(idx, multi, target);
        REQUIRE(pairs.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            const double n = tag_of(int(k), {Direction::N, 6500}) / 255.0, s = tag_of(int(k), {Direction::S, 6500}) / 255.0;
            CHECK(pairs[k].input[0] == doctest::Approx(0.5 * n + 0.5 * s));
            REQUIRE(pairs[k].input_settings.size() == 2);
            CHECK(pairs[k].input_settings[0].temperature_k == pairs[k].input_settings[1].temperature_k);
            CHECK(opposite(pairs[k].input_settings[0].direction) == pairs[k].input_settings[1].direction);
        }
    }
    SUBCASE("scene missing the S capture is excluded under multi") {
        fs::remove(dir / "scene1_S_6500.png");
        test::LogCapture logs;
        const auto sub = index_dataset(dir);
        const auto pairs = make_pairs(sub, multi, target);
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0].scene == "scene0");
        CHECK(pairs[1].scene == "scene2");
        CHECK(logs.contains("scene1"));
        CHECK(make_pairs(sub, single, target).size() == 3);
    }
    SUBCASE("size mismatch") {
        write_capture(dir, 0, target, 8);
        CHECK(test::error_code_of([&] { (void)make_pairs(index_dataset(dir), single, target); }) == ErrorCode::data);
    }
    CHECK(test::error_code_of([&] { (void)make_task_input(multi, {Image(4, 4, 3)}); }) == ErrorCode::usage);
}

TEST_CASE("split_custom") {
    const auto idx = synthetic_index(300);
    const auto split = split_custom(idx, 60, 0);
    CHECK(split.train.size() == 240);
    CHECK(split.test.size() == 60);
    std::set<std::string> all(split.train.begin(), split.train.end());
    for (const auto& id : split.test) CHECK(all.insert(id).second);
    CHECK(all.size() == 300);

    const auto again = split_custom(idx, 60, 0);
    CHECK(again.test == split.test);
    CHECK(again.train == split.train);
    CHECK(split_custom(idx, 60, 1).test != split.test);

    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + int(rng.below(50));
        const auto k = std::size_t(rng.below(std::uint64_t(n)));
        const auto s = split_custom(synthetic_index(n), k, rng.next_u64());
        CHECK(s.test.size() == k);
        CHECK(s.train.size() + s.test.size() == std::size_t(n));
        std::set<std::string> u(s.train.begin(), s.train.end());
        for (const auto& id : s.test) CHECK(u.count(id) == 0);
    }
    CHECK(test::error_code_of([&] { (void)split_custom(synthetic_index(5), 5); }) == ErrorCode::data);

    const auto dir = temp_dir("split");
    write_split(split, dir / "a.json");
    write_split(split_custom(idx, 60, 0), dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    const auto back = read_split(dir / "a.json");
    CHECK(back.seed == 0);
    CHECK(back.test == split.test);
    CHECK(back.train == split.train);

    const auto sub = idx.subset(split.test);
    CHECK(sub.scene_count() == 60);
    CHECK(test::error_code_of([&] { (void)idx.subset({"nope"}); }) == ErrorCode::data);
}
