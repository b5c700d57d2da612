#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dataset.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "png_io.hpp"
#include "rays.hpp"

namespace spikenerf {

struct Primitive {
    enum class Shape { sphere, box };
    Shape shape = Shape::sphere;
    Vec3<double> center{};
    Vec3<double> size{0.5, 0.5, 0.5}; // sphere: radius in x; box: half extents
    double density = 100.0;
    Vec3<double> color{1, 1, 1};

    bool contains(Vec3<double> p) const {
        const auto d = p - center;
        if (shape == Shape::sphere) return dot(d, d) <= size.x * size.x;
        return std::abs(d.x) <= size.x && std::abs(d.y) <= size.y && std::abs(d.z) <= size.z;
    }
};

struct SceneSpec {
    std::vector<Primitive> primitives;
    Aabb<double> aabb{{-1, -1, -1}, {1, 1, 1}};
    int width = 64;
    int height = 64;
    int train_views = 8;
    int test_views = 2;
    double camera_angle_x = 0.6911112070083618;
    double camera_radius = 4.0;
    Vec3<double> background{1, 1, 1};

    void validate() const {
        detail::require(aabb.valid(), ErrorCode::invalid_argument, "scene aabb is empty");
        detail::require(width > 0 && height > 0 && train_views >= 1 && test_views >= 0,
                        ErrorCode::invalid_argument, "scene image size and view counts must be positive");
        for (const auto& p : primitives) {
            detail::require(p.density > 0, ErrorCode::invalid_argument,
                            "primitive density must be positive");
            const Vec3<double> r = p.shape == Primitive::Shape::sphere
                                       ? Vec3<double>{p.size.x, p.size.x, p.size.x}
                                       : p.size;
            for (std::size_t a = 0; a < 3; ++a) {
                detail::require(p.center[a] - r[a] >= aabb.min_corner[a] &&
                                    p.center[a] + r[a] <= aabb.max_corner[a],
                                ErrorCode::invalid_argument, "primitive extends outside the aabb");
            }
        }
    }

    /// Extinction is the sum over containing primitives; colour is their
    /// density-weighted mean.
    void field(Vec3<double> p, double& sigma, Vec3<double>& rgb) const {
        sigma = 0;
        rgb = {};
        for (const auto& prim : primitives) {
            if (!prim.contains(p)) continue;
            sigma += prim.density;
            rgb = rgb + prim.color * prim.density;
        }
        if (sigma > 0) rgb = rgb / sigma;
    }
};

inline SceneSpec scene_preset(const std::string& name) {
    SceneSpec s;
    if (name == "cube-sphere") {
        s.primitives.push_back({Primitive::Shape::box, {-0.35, -0.3, -0.2}, {0.35, 0.35, 0.35},
                                100.0, {0.15, 0.35, 0.85}});
        s.primitives.push_back({Primitive::Shape::sphere, {0.4, 0.25, 0.25}, {0.45, 0, 0},
                                100.0, {0.9, 0.2, 0.15}});
    } else if (name == "sphere") {
        s.primitives.push_back({Primitive::Shape::sphere, {0, 0, 0}, {0.5, 0, 0}, 1000.0,
                                {1, 0, 0}});
    } else if (name == "empty") {
    } else {
        detail::fail(ErrorCode::invalid_argument, "unknown scene preset: " + name);
    }
    return s;
}

/// Camera at `radius` from the center, looking at it, with +z as world up.
inline Pose<double> look_at_pose(Vec3<double> center, double azimuth, double elevation,
                                 double radius) {
    const Vec3<double> eye = center + Vec3<double>{std::cos(elevation) * std::cos(azimuth),
                                                   std::cos(elevation) * std::sin(azimuth),
                                                   std::sin(elevation)} * radius;
    const Vec3<double> back = normalize(eye - center); // camera +z
    const Vec3<double> right = normalize(cross(Vec3<double>{0, 0, 1}, back));
    const Vec3<double> up = cross(back, right);
    Pose<double> p;
    for (std::size_t r = 0; r < 3; ++r) {
        p.m[r][0] = right[r];
        p.m[r][1] = up[r];
        p.m[r][2] = back[r];
        p.m[r][3] = eye[r];
    }
    return p;
}

struct GeneratedScene {
    SceneSpec spec;
    Dataset train;
    Dataset test;
};

namespace detail {

inline Image march_analytic(const SceneSpec& spec, const Camera<double>& cam) {
    const double step = 1e-3 * spec.aabb.diagonal();
    Image img(cam.width, cam.height);
    for (const auto& ray : generate_all_rays(cam)) {
        double t0, t1;
        double trans = 1.0;
        Vec3<double> acc{};
        if (intersect_aabb(ray, spec.aabb, t0, t1)) {
            for (double t = t0 + 0.5 * step; t < t1; t += step) {
                double sigma;
                Vec3<double> rgb;
                spec.field(ray.origin + ray.direction * t, sigma, rgb);
                if (sigma <= 0) continue;
                const double a = 1.0 - std::exp(-sigma * std::min(step, t1 - t));
                acc = acc + rgb * (trans * a);
                trans *= 1.0 - a;
                if (trans < 1e-7) break;
            }
        }
        acc = acc + spec.background * trans;
        for (int c = 0; c < 3; ++c) img.rgb[3 * ray.pixel_index + c] = static_cast<float>(acc[c]);
    }
    return img;
}

inline ManifestFrame frame_for(const std::string& file, const Pose<double>& pose) {
    ManifestFrame f;
    f.file_path = file;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) f.transform[r][c] = pose.m[r][c];
    f.transform[3] = {0, 0, 0, 1};
    return f;
}

inline Dataset render_views(const SceneSpec& spec, const std::vector<Pose<double>>& poses,
                            const std::string& split) {
    Dataset ds;
    ds.manifest.camera_angle_x = spec.camera_angle_x;
    const double focal = focal_from_fov(spec.camera_angle_x, spec.width);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        auto cam = Camera<double>::centered(spec.width, spec.height, focal, poses[i]);
        Image img = march_analytic(spec, cam);
        // Quantize so in-memory images match what a PNG round trip gives.
        for (auto& v : img.rgb) v = to_byte(v) / 255.f;
        ds.images.push_back(std::move(img));
        Pose<float> pf;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) pf.m[r][c] = static_cast<float>(poses[i].m[r][c]);
        ds.cameras.push_back(Camera<float>::centered(spec.width, spec.height,
                                                     static_cast<float>(focal), pf));
        ds.manifest.frames.push_back(
            frame_for("./" + split + "/r_" + std::to_string(i), poses[i]));
    }
    return ds;
}

} // namespace detail

/// Ground-truth views of an analytic scene. Training cameras ring the
/// object at alternating elevations; test cameras sit between them.
inline GeneratedScene generate_procedural_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    constexpr double deg = std::numbers::pi / 180.0;
    const double phase = jitter(rng) * 10.0 * deg;
    std::vector<Pose<double>> train, test;
    for (int i = 0; i < spec.train_views; ++i) {
        const double az = phase + 2.0 * std::numbers::pi * i / spec.train_views;
        const double el = (i % 2 ? 40.0 : 15.0) * deg + jitter(rng) * 3.0 * deg;
        train.push_back(look_at_pose(spec.aabb.center(), az, el, spec.camera_radius));
    }
    for (int i = 0; i < spec.test_views; ++i) {
        const double slot = (double(i) + 0.5) * spec.train_views / std::max(spec.test_views, 1);
        const double az = phase + 2.0 * std::numbers::pi * (std::floor(slot) + 0.5) / spec.train_views +
                          jitter(rng) * 5.0 * deg;
        const double el = 27.5 * deg + jitter(rng) * 5.0 * deg;
        test.push_back(look_at_pose(spec.aabb.center(), az, el, spec.camera_radius));
    }
    GeneratedScene g;
    g.spec = spec;
    g.train = detail::render_views(spec, train, "train");
    g.test = detail::render_views(spec, test, "test");
    return g;
}

inline nlohmann::json scene_spec_to_json(const SceneSpec& s) {
    nlohmann::json j;
    auto v3 = [](Vec3<double> v) { return nlohmann::json::array({v.x, v.y, v.z}); };
    j["aabb"] = {v3(s.aabb.min_corner), v3(s.aabb.max_corner)};
    j["width"] = s.width;
    j["height"] = s.height;
    j["background"] = v3(s.background);
    j["primitives"] = nlohmann::json::array();
    for (const auto& p : s.primitives) {
        j["primitives"].push_back({{"shape", p.shape == Primitive::Shape::sphere ? "sphere" : "box"},
                                   {"center", v3(p.center)},
                                   {"size", v3(p.size)},
                                   {"density", p.density},
                                   {"color", v3(p.color)}});
    }
    return j;
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    try {
        auto v3 = [](const nlohmann::json& a) {
            return Vec3<double>{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        };
        s.aabb = {v3(j.at("aabb").at(0)), v3(j.at("aabb").at(1))};
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.background = v3(j.at("background"));
        for (const auto& p : j.at("primitives")) {
            Primitive prim;
            prim.shape = p.at("shape").get<std::string>() == "sphere" ? Primitive::Shape::sphere
                                                                      : Primitive::Shape::box;
            prim.center = v3(p.at("center"));
            prim.size = v3(p.at("size"));
            prim.density = p.at("density").get<double>();
            prim.color = v3(p.at("color"));
            s.primitives.push_back(prim);
        }
    } catch (const nlohmann::json::exception& e) {
        detail::fail(ErrorCode::parse, std::string("malformed scene description: ") + e.what());
    }
    return s;
}

/// Writes transforms_{train,test}.json, the PNG views and scene.json.
inline void write_dataset(const std::filesystem::path& dir, const GeneratedScene& g) {
    std::filesystem::create_directories(dir / "train");
    std::filesystem::create_directories(dir / "test");
    auto dump = [&](const Dataset& ds, const std::string& split) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            write_png(dir / split / ("r_" + std::to_string(i) + ".png"), ds.images[i]);
        }
        std::ofstream out(dir / ("transforms_" + split + ".json"));
        if (!out) detail::fail(ErrorCode::io, "cannot write manifest in " + dir.string());
        out << manifest_to_json(ds.manifest).dump(2) << '\n';
    };
    dump(g.train, "train");
    dump(g.test, "test");
    std::ofstream spec(dir / "scene.json");
    if (!spec) detail::fail(ErrorCode::io, "cannot write scene.json in " + dir.string());
    spec << scene_spec_to_json(g.spec).dump(2) << '\n';
}

} // namespace spikenerf
