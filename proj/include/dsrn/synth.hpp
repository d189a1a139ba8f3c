#pragma once

#include "dsrn/data.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dsrn::synth {

using Vec3 = std::array<double, 3>;
using Rgb = std::array<double, 3>;

struct PointSource {
    double intensity = 1.0;  // radiant power I_s
    Vec3 position{0.0, 0.0, 1.0};
    int temperature_k = 6500;
};

struct Surfel {
    Vec3 position{};
    Vec3 normal{0.0, 0.0, 1.0};
    Rgb kd{1.0, 1.0, 1.0};
    Rgb ka{0.0, 0.0, 0.0};
};

/// Inverse-square falloff I_s / (4 pi r^2); `r` must be positive.
double irradiance_magnitude(const Vec3& surfel_pos, const PointSource& source);
/// Irradiance tinted by the source colour temperature.
Rgb irradiance(const Vec3& surfel_pos, const PointSource& source);

/// Lambertian term plus ambient: I_p * K_d * max(N.L, 0) + K_a * I_a, unclipped.
/// Non-unit normals or light vectors are normalized with a warning.
Rgb shade_diffuse(const Surfel& surfel, const Rgb& ip, const Vec3& light_dir, const Rgb& ia);

/// Blackbody tint from Tanner Helland's curve fit, rescaled so that 6500 K is (1,1,1)
/// and the brightest channel is 1. Valid for 1000..12000 K.
Rgb kelvin_to_rgb(double kelvin);

/// Frustum-shaped box: flat top inset by `bevel` from the footprint, sloped sides.
struct Box {
    double x0, y0, x1, y1;  // footprint in unit scene coordinates, y grows downward
    double height;
    double bevel;
    std::array<Rgb, 5> albedo;  // top, north, east, south, west faces
};

/// Elliptic cap of radius `radius` and peak `height`.
struct Dome {
    double cx, cy, radius, height;
    Rgb albedo;
};

struct SyntheticScene {
    std::uint64_t seed = 0;
    Rgb ground_albedo{0.5, 0.5, 0.5};
    double texture_amplitude = 0.0;
    std::array<double, 4> texture_freq{};  // fx, fy, phase_x, phase_y
    std::vector<Box> boxes;
    std::vector<Dome> domes;
    Rgb ambient{0.08, 0.08, 0.08};       // I_a
    Rgb ambient_reflectivity{1, 1, 1};   // K_a, uniform over the scene
    double source_power = 1.0;           // I_s relative to unit irradiance at the scene centre
    double source_distance = 1.5;        // from the scene centre
    double source_elevation_deg = 35.0;
};

/// Seeded random arrangement of boxes and domes on a textured ground plane.
SyntheticScene make_scene(std::uint64_t seed);

/// Surface point, normal and albedo seen from above at (x, y) in unit scene coordinates.
Surfel surface_at(const SyntheticScene& scene, double x, double y);

PointSource light_for(const SyntheticScene& scene, const IlluminationSetting& setting);

/// Orthographic top view, 2x2 supersampled, clipped to [0,1]. `size` must be a multiple of 16.
Image render_scene(const SyntheticScene& scene, const IlluminationSetting& setting, int size);

struct CorpusSpec {
    int n_scenes = 10;
    std::vector<Direction> directions{kAllDirections.begin(), kAllDirections.end()};
    std::vector<int> temperatures{kTemperatures.begin(), kTemperatures.end()};
    int size = 128;
    std::uint64_t seed = 0;
};

/// Writes scene%04d_{direction}_{temp}.png for every combination plus manifest.json.
SceneIndex generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

}  // namespace dsrn::synth
