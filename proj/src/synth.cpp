#include "dsrn/synth.hpp"

#include "dsrn/log.hpp"
#include "dsrn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace dsrn::synth {

namespace {

constexpr double kPi = std::numbers::pi;

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 unit_or_warn(const Vec3& v, const char* what) {
    const double n = norm(v);
    if (!(n > 0.0)) fail(ErrorCode::numeric, std::string(what) + " vector has zero length");
    if (std::abs(n - 1.0) <= 1e-6) return v;
    log_warn(std::string(what) + " vector is not unit length (" + std::to_string(n) + "); normalizing");
    return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 normal_from_slope(double dhdx, double dhdy) {
    const double n = std::sqrt(dhdx * dhdx + dhdy * dhdy + 1.0);
    return {-dhdx / n, -dhdy / n, 1.0 / n};
}

// Raw Tanner Helland fit in 0..255 per channel.
Rgb helland(double kelvin) {
    const double t = kelvin / 100.0;
    double r, g, b;
    if (t <= 66.0) {
        r = 255.0;
        g = 99.4708025861 * std::log(t) - 161.1195681661;
    } else {
        r = 329.698727446 * std::pow(t - 60.0, -0.1332047592);
        g = 288.1221695283 * std::pow(t - 60.0, -0.0755148492);
    }
    if (t >= 66.0)
        b = 255.0;
    else if (t <= 19.0)
        b = 0.0;
    else
        b = 138.5177312231 * std::log(t - 10.0) - 305.0447927307;
    return {std::clamp(r, 0.0, 255.0), std::clamp(g, 0.0, 255.0), std::clamp(b, 0.0, 255.0)};
}

Rgb random_albedo(Rng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

}  // namespace

double irradiance_magnitude(const Vec3& surfel_pos, const PointSource& source) {
    const Vec3 d{source.position[0] - surfel_pos[0], source.position[1] - surfel_pos[1],
                 source.position[2] - surfel_pos[2]};
    const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if (!(r2 > 0.0)) fail(ErrorCode::numeric, "irradiance: surfel coincides with the point source");
    if (source.intensity < 0.0) fail(ErrorCode::config, "irradiance: negative source intensity");
    return source.intensity / (4.0 * kPi * r2);
}

Rgb irradiance(const Vec3& surfel_pos, const PointSource& source) {
    const double m = irradiance_magnitude(surfel_pos, source);
    const Rgb tint = kelvin_to_rgb(source.temperature_k);
    return {m * tint[0], m * tint[1], m * tint[2]};
}

Rgb shade_diffuse(const Surfel& surfel, const Rgb& ip, const Vec3& light_dir, const Rgb& ia) {
    const Vec3 n = unit_or_warn(surfel.normal, "surface normal");
    const Vec3 l = unit_or_warn(light_dir, "light direction");
    const double cos_t = std::max(0.0, n[0] * l[0] + n[1] * l[1] + n[2] * l[2]);
    Rgb out;
    for (int c = 0; c < 3; ++c) out[c] = ip[c] * surfel.kd[c] * cos_t + surfel.ka[c] * ia[c];
    return out;
}

Rgb kelvin_to_rgb(double kelvin) {
    if (!(kelvin >= 1000.0 && kelvin <= 12000.0))
        fail(ErrorCode::config, "colour temperature " + std::to_string(kelvin) + " K outside 1000..12000 K");
    static const Rgb white = helland(6500.0);
    const Rgb raw = helland(kelvin);
    Rgb rel{raw[0] / white[0], raw[1] / white[1], raw[2] / white[2]};
    const double peak = std::max({rel[0], rel[1], rel[2]});
    for (auto& v : rel) v /= peak;
    return rel;
}

SyntheticScene make_scene(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5CE7E));
    SyntheticScene s;
    s.seed = seed;
    const double grey = rng.uniform(0.35, 0.6);
    s.ground_albedo = {grey * rng.uniform(0.85, 1.15), grey * rng.uniform(0.85, 1.15), grey * rng.uniform(0.85, 1.15)};
    s.texture_amplitude = rng.uniform(0.05, 0.2);
    s.texture_freq = {rng.uniform(6.0, 30.0), rng.uniform(6.0, 30.0), rng.uniform(0.0, 2 * kPi), rng.uniform(0.0, 2 * kPi)};

    const int n_boxes = 3 + int(rng.below(5));
    for (int i = 0; i < n_boxes; ++i) {
        Box b;
        const double w = rng.uniform(0.08, 0.3), h = rng.uniform(0.08, 0.3);
        b.x0 = rng.uniform(0.0, 1.0 - w);
        b.y0 = rng.uniform(0.0, 1.0 - h);
        b.x1 = b.x0 + w;
        b.y1 = b.y0 + h;
        b.height = rng.uniform(0.04, 0.22);
        b.bevel = rng.uniform(0.015, 0.35 * std::min(w, h));
        const Rgb base = random_albedo(rng, 0.2, 0.9);
        for (auto& face : b.albedo) {
            const double k = rng.uniform(0.8, 1.0);
            face = {std::min(1.0, base[0] * k), std::min(1.0, base[1] * k), std::min(1.0, base[2] * k)};
        }
        s.boxes.push_back(b);
    }
    const int n_domes = 1 + int(rng.below(3));
    for (int i = 0; i < n_domes; ++i) {
        Dome d;
        d.radius = rng.uniform(0.05, 0.15);
        d.cx = rng.uniform(d.radius, 1.0 - d.radius);
        d.cy = rng.uniform(d.radius, 1.0 - d.radius);
        d.height = rng.uniform(0.5, 1.0) * d.radius;
        d.albedo = random_albedo(rng, 0.25, 0.9);
        s.domes.push_back(d);
    }
    const double amb = rng.uniform(0.05, 0.12);
    s.ambient = {amb, amb, amb};
    s.source_power = rng.uniform(1.2, 1.6);
    return s;
}

Surfel surface_at(const SyntheticScene& scene, double x, double y) {
    Surfel best;
    best.position = {x, y, 0.0};
    best.normal = {0.0, 0.0, 1.0};
    const auto& f = scene.texture_freq;
    const double tex = 1.0 + scene.texture_amplitude * std::sin(f[0] * x + f[2]) * std::sin(f[1] * y + f[3]);
    for (int c = 0; c < 3; ++c) best.kd[c] = std::clamp(scene.ground_albedo[c] * tex, 0.0, 1.0);
    best.ka = scene.ambient_reflectivity;

    for (const auto& b : scene.boxes) {
        const double dn = y - b.y0, de = b.x1 - x, ds = b.y1 - y, dw = x - b.x0;
        const double d = std::min({dn, de, ds, dw});
        if (d < 0.0) continue;
        const double h = b.height * std::min(1.0, d / b.bevel);
        if (h <= best.position[2]) continue;
        best.position[2] = h;
        const double slope = b.height / b.bevel;
        int face = 0;
        if (d >= b.bevel) {
            best.normal = {0.0, 0.0, 1.0};
        } else if (d == dn) {
            face = 1;
            best.normal = normal_from_slope(0.0, slope);
        } else if (d == de) {
            face = 2;
            best.normal = normal_from_slope(-slope, 0.0);
        } else if (d == ds) {
            face = 3;
            best.normal = normal_from_slope(0.0, -slope);
        } else {
            face = 4;
            best.normal = normal_from_slope(slope, 0.0);
        }
        best.kd = b.albedo[std::size_t(face)];
    }
    for (const auto& dm : scene.domes) {
        const double dx = x - dm.cx, dy = y - dm.cy;
        const double q = 1.0 - (dx * dx + dy * dy) / (dm.radius * dm.radius);
        if (q <= 0.0) continue;
        const double root = std::sqrt(q);
        const double h = dm.height * root;
        if (h <= best.position[2]) continue;
        best.position[2] = h;
        const double denom = dm.radius * dm.radius * std::max(root, 0.05);
        best.normal = normal_from_slope(-dm.height * dx / denom, -dm.height * dy / denom);
        best.kd = dm.albedo;
    }
    return best;
}

PointSource light_for(const SyntheticScene& scene, const IlluminationSetting& setting) {
    const double az = azimuth_degrees(setting.direction) * kPi / 180.0;
    const double el = scene.source_elevation_deg * kPi / 180.0;
    const double d = scene.source_distance;
    PointSource src;
    src.position = {0.5 + d * std::cos(el) * std::sin(az), 0.5 - d * std::cos(el) * std::cos(az), d * std::sin(el)};
    src.intensity = scene.source_power * 4.0 * kPi * d * d;
    src.temperature_k = setting.temperature_k;
    return src;
}

Image render_scene(const SyntheticScene& scene, const IlluminationSetting& setting, int size) {
    if (size <= 0 || size % 16 != 0)
        fail(ErrorCode::dimension, "render size must be a positive multiple of 16, got " + std::to_string(size));
    const PointSource src = light_for(scene, setting);
    const Rgb tint = kelvin_to_rgb(src.temperature_k);
    Image img(size, size, 3);
    const double inv = 1.0 / size;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            Rgb acc{0, 0, 0};
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double x = (j + 0.25 + 0.5 * sx) * inv, y = (i + 0.25 + 0.5 * sy) * inv;
                    const Surfel s = surface_at(scene, x, y);
                    const Vec3 to_light{src.position[0] - s.position[0], src.position[1] - s.position[1],
                                        src.position[2] - s.position[2]};
                    const double r = norm(to_light);
                    if (!(r > 0.0)) fail(ErrorCode::numeric, "render: surface point coincides with the light");
                    const double m = src.intensity / (4.0 * kPi * r * r);
                    const Rgb ip{m * tint[0], m * tint[1], m * tint[2]};
                    const Rgb v = shade_diffuse(s, ip, {to_light[0] / r, to_light[1] / r, to_light[2] / r}, scene.ambient);
                    for (int c = 0; c < 3; ++c) acc[c] += v[c];
                }
            for (int c = 0; c < 3; ++c) img.at(i, j, c) = float(std::clamp(acc[c] * 0.25, 0.0, 1.0));
        }
    return img;
}

SceneIndex generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    if (spec.n_scenes <= 0) fail(ErrorCode::config, "corpus needs at least one scene");
    if (spec.directions.empty() || spec.temperatures.empty())
        fail(ErrorCode::config, "corpus needs at least one direction and one temperature");
    for (int t : spec.temperatures) IlluminationSetting{Direction::N, t}.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::io, "cannot create " + out_dir.string() + ": " + ec.message());

    SceneIndex index;
    for (int k = 0; k < spec.n_scenes; ++k) {
        char id[32];
        std::snprintf(id, sizeof id, "scene%04d", k);
        const SyntheticScene scene = make_scene(mix_seed(spec.seed, std::uint64_t(k)));
        for (Direction d : spec.directions)
            for (int t : spec.temperatures) {
                const IlluminationSetting s{d, t};
                const auto path = out_dir / (std::string(id) + "_" + to_string(d) + "_" + std::to_string(t) + ".png");
                save_image(path, render_scene(scene, s, spec.size));
                index.scenes[id][s] = path;
            }
    }
    write_manifest(index, out_dir / "manifest.json");
    return index;
}

}  // namespace dsrn::synth
