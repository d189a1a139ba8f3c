#include "dsrn/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace dsrn;
using namespace dsrn::synth;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

double half_mean(const Image& img, bool top) {
    const int h = img.height() / 2, y0 = top ? 0 : h;
    double s = 0;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) s += img.at(y, x, c);
    return s / (double(h) * img.width() * 3);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("irradiance") {
    PointSource s;
    s.intensity = 4 * kPi;
    s.position = {0, 0, 1};
    CHECK(irradiance_magnitude({0, 0, 0}, s) == doctest::Approx(1.0).epsilon(1e-15));
    s.intensity = 1;
    s.position = {0, 2, 0};
    CHECK(irradiance_magnitude({0, 0, 0}, s) == doctest::Approx(1.0 / (16 * kPi)).epsilon(1e-15));
    CHECK(irradiance_magnitude({0, 0, 0}, s) == doctest::Approx(0.01989436788).epsilon(1e-9));
    const Rgb white = irradiance({0, 0, 0}, s);
    for (double v : white) CHECK(v == doctest::Approx(1.0 / (16 * kPi)).epsilon(1e-12));
    s.temperature_k = 2500;
    const Rgb warm = irradiance({0, 0, 0}, s);
    CHECK(warm[0] > warm[1]);
    CHECK(warm[1] > warm[2]);

    CHECK(test::error_code_of([&] { (void)irradiance_magnitude(s.position, s); }) == ErrorCode::numeric);
    s.intensity = -1;
    CHECK(test::error_code_of([&] { (void)irradiance_magnitude({0, 0, 0}, s); }) == ErrorCode::config);

    Rng rng(80);
    for (int trial = 0; trial < 50; ++trial) {
        PointSource p;
        p.intensity = rng.uniform(0.1, 10);
        const Vec3 at{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Vec3 off{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.1, 1)};
        const double k = rng.uniform(1.1, 5);
        p.position = {at[0] + off[0], at[1] + off[1], at[2] + off[2]};
        const double near = irradiance_magnitude(at, p);
        p.position = {at[0] + k * off[0], at[1] + k * off[1], at[2] + k * off[2]};
        CHECK(irradiance_magnitude(at, p) == doctest::Approx(near / (k * k)).epsilon(1e-12));
    }
}

TEST_CASE("shade_diffuse") {
    Surfel s;
    s.kd = {1, 1, 1};
    s.ka = {0, 0, 0};
    CHECK(shade_diffuse(s, {1, 1, 1}, {0, 0, 1}, {0.3, 0.3, 0.3})[0] == doctest::Approx(1.0));

    s.ka = {0.5, 0.25, 1};
    const Rgb amb = shade_diffuse(s, {1, 1, 1}, {1, 0, 0}, {0.2, 0.2, 0.2});
    CHECK(amb[0] == doctest::Approx(0.1));
    CHECK(amb[1] == doctest::Approx(0.05));
    CHECK(amb[2] == doctest::Approx(0.2));

    Surfel f;
    f.kd = {0.8, 0.8, 0.8};
    f.ka = {0.1, 0.1, 0.1};
    const Vec3 l{std::sqrt(0.75), 0, 0.5};  // N.L = 0.5
    for (double v : shade_diffuse(f, {0.5, 0.5, 0.5}, l, {0.2, 0.2, 0.2})) CHECK(v == doctest::Approx(0.22).epsilon(1e-12));

    // Light from below: clamped, ambient only.
    CHECK(shade_diffuse(f, {1, 1, 1}, {0, 0, -1}, {0.2, 0.2, 0.2})[0] == doctest::Approx(0.02));

    test::LogCapture logs;
    Surfel long_normal = f;
    long_normal.normal = {0, 0, 2};
    CHECK(shade_diffuse(long_normal, {0.5, 0.5, 0.5}, {0, 0, 3}, {0, 0, 0})[1] == doctest::Approx(0.4));
    CHECK(logs.warnings.size() == 2);

    Rng rng(81);
    for (int trial = 0; trial < 50; ++trial) {
        Surfel r;
        r.kd = {rng.uniform(), rng.uniform(), rng.uniform()};
        r.ka = {rng.uniform(), rng.uniform(), rng.uniform()};
        const double ip = rng.uniform(0, 2), ia = rng.uniform(0, 1), theta = rng.uniform(0, kPi / 2);
        const Rgb facing = shade_diffuse(r, {ip, ip, ip}, {0, 0, 1}, {ia, ia, ia});
        const Rgb grazing = shade_diffuse(r, {ip, ip, ip}, {std::sin(theta), 0, std::cos(theta)}, {ia, ia, ia});
        for (int c = 0; c < 3; ++c) CHECK(facing[std::size_t(c)] >= grazing[std::size_t(c)] - 1e-15);
    }
}

TEST_CASE("kelvin_to_rgb matches the frozen table") {
    struct Row {
        int k;
        double r, g, b;
    };
    const Row table[] = {
        {2500, 1.0, 0.625967262426, 0.280225733473}, {3500, 1.0, 0.757678538556, 0.563211921363},
        {4500, 1.0, 0.856054988248, 0.749610158143}, {5500, 1.0, 0.934607066263, 0.888832837493},
        {6500, 1.0, 1.0, 1.0},
    };
    for (const auto& row : table) {
        CAPTURE(row.k);
        const Rgb c = kelvin_to_rgb(row.k);
        CHECK(c[0] == doctest::Approx(row.r).epsilon(1e-9));
        CHECK(c[1] == doctest::Approx(row.g).epsilon(1e-9));
        CHECK(c[2] == doctest::Approx(row.b).epsilon(1e-9));
    }
    const Rgb warm = kelvin_to_rgb(2500);
    CHECK(warm[0] > warm[1]);
    CHECK(warm[1] > warm[2]);
    double prev = 0;
    for (int k = 1000; k <= 12000; k += 250) {
        const Rgb c = kelvin_to_rgb(k);
        for (double v : c) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(c[2] >= prev - 1e-12);
        prev = c[2];
    }
    CHECK(test::error_code_of([] { (void)kelvin_to_rgb(999); }) == ErrorCode::config);
    CHECK(test::error_code_of([] { (void)kelvin_to_rgb(12001); }) == ErrorCode::config);
}

TEST_CASE("light placement") {
    const SyntheticScene scene = make_scene(3);
    const PointSource n = light_for(scene, {Direction::N, 6500});
    const PointSource e = light_for(scene, {Direction::E, 4500});
    CHECK(n.position[1] < 0.5);  // north is up in the image
    CHECK(n.position[0] == doctest::Approx(0.5));
    CHECK(e.position[0] > 0.5);
    CHECK(e.temperature_k == 4500);
    const double d = scene.source_distance;
    const double horiz = std::hypot(n.position[0] - 0.5, n.position[1] - 0.5);
    CHECK(std::atan2(n.position[2], horiz) * 180 / kPi == doctest::Approx(scene.source_elevation_deg));
    CHECK(std::hypot(horiz, n.position[2]) == doctest::Approx(d));
    // Unit irradiance at the centre scaled by the source power.
    CHECK(irradiance_magnitude({0.5, 0.5, 0}, n) == doctest::Approx(scene.source_power));
}

TEST_CASE("render_scene") {
    SUBCASE("N and S flip the vertical brightness gradient") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto scene = make_scene(seed);
            const Image n = render_scene(scene, {Direction::N, 6500}, 64);
            const Image s = render_scene(scene, {Direction::S, 6500}, 64);
            CHECK(half_mean(n, true) - half_mean(n, false) > 0);
            CHECK(half_mean(s, true) - half_mean(s, false) < 0);
        }
    }
    SUBCASE("ambient only gives a constant tint") {
        SyntheticScene scene = make_scene(4);
        scene.source_power = 0;
        scene.ambient = {0.1, 0.07, 0.05};
        const Image img = render_scene(scene, {Direction::W, 3500}, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(img.at(y, x, c) == doctest::Approx(scene.ambient[std::size_t(c)]).epsilon(1e-6));
    }
    SUBCASE("determinism, range and size") {
        const auto a = render_scene(make_scene(9), {Direction::SE, 2500}, 48);
        const auto b = render_scene(make_scene(9), {Direction::SE, 2500}, 48);
        CHECK(a == b);
        CHECK(a.height() == 48);
        for (float v : a.values()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        CHECK(a != render_scene(make_scene(10), {Direction::SE, 2500}, 48));
        CHECK(test::error_code_of([] { (void)render_scene(make_scene(1), {Direction::N, 6500}, 40); }) ==
              ErrorCode::dimension);
    }
    SUBCASE("surfaces carry unit normals and in-range albedo") {
        const auto scene = make_scene(11);
        Rng rng(82);
        for (int i = 0; i < 500; ++i) {
            const Surfel s = surface_at(scene, rng.uniform(), rng.uniform());
            const double len = std::sqrt(s.normal[0] * s.normal[0] + s.normal[1] * s.normal[1] + s.normal[2] * s.normal[2]);
            CHECK(std::abs(len - 1) < 1e-6);
            for (int c = 0; c < 3; ++c) {
                CHECK(s.kd[std::size_t(c)] >= 0);
                CHECK(s.kd[std::size_t(c)] <= 1);
            }
        }
    }
}

TEST_CASE("generate_corpus") {
    const auto dir = fs::temp_directory_path() / "dsrn_synth_corpus";
    fs::remove_all(dir);
    CorpusSpec spec;
    spec.size = 16;
    const auto idx = generate_corpus(spec, dir / "a");
    CHECK(idx.scene_count() == 10);
    CHECK(idx.image_count() == 400);
    std::size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) pngs += e.path().extension() == ".png";
    CHECK(pngs == 400);
    CHECK(fs::exists(dir / "a" / "manifest.json"));

    const auto rescanned = index_dataset(dir / "a");
    CHECK(rescanned.scenes == idx.scenes);
    CHECK(index_manifest(dir / "a" / "manifest.json").scenes == idx.scenes);

    CorpusSpec small = spec;
    small.n_scenes = 2;
    small.directions = {Direction::N, Direction::S};
    small.temperatures = {6500};
    generate_corpus(small, dir / "b");
    generate_corpus(small, dir / "c");
    for (const auto& e : fs::directory_iterator(dir / "b"))
        if (e.path().extension() == ".png") CHECK(slurp(e.path()) == slurp(dir / "c" / e.path().filename()));
    CHECK(slurp(dir / "b" / "scene0001_S_6500.png") == slurp(dir / "a" / "scene0001_S_6500.png"));

    small.temperatures = {4000};
    CHECK(test::error_code_of([&] { generate_corpus(small, dir / "d"); }) == ErrorCode::config);
}
