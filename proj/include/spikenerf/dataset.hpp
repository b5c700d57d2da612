#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "image.hpp"
#include "png_io.hpp"
#include "rays.hpp"
#include "train.hpp"

namespace spikenerf {

struct ManifestFrame {
    std::string file_path;
    std::array<std::array<double, 4>, 4> transform{};
};

/// The standard transforms_*.json camera manifest.
struct DatasetManifest {
    double camera_angle_x = 0;
    std::vector<ManifestFrame> frames;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<Camera<float>> cameras;
    std::vector<Image> images;

    std::size_t size() const { return images.size(); }
};

inline double focal_from_fov(double camera_angle_x, int width) {
    return 0.5 * width / std::tan(0.5 * camera_angle_x);
}

inline Pose<float> pose_from_matrix(const std::array<std::array<double, 4>, 4>& m) {
    Pose<float> p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) p.m[r][c] = static_cast<float>(m[r][c]);
    return p;
}

inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::string& origin) {
    DatasetManifest m;
    try {
        m.camera_angle_x = j.at("camera_angle_x").get<double>();
        for (const auto& f : j.at("frames")) {
            ManifestFrame fr;
            fr.file_path = f.at("file_path").get<std::string>();
            const auto& tm = f.at("transform_matrix");
            if (tm.size() != 4) detail::fail(ErrorCode::parse, "transform_matrix must be 4x4");
            for (int r = 0; r < 4; ++r) {
                if (tm[r].size() != 4) detail::fail(ErrorCode::parse, "transform_matrix must be 4x4");
                for (int c = 0; c < 4; ++c) fr.transform[r][c] = tm[r][c].get<double>();
            }
            m.frames.push_back(fr);
        }
    } catch (const nlohmann::json::exception& e) {
        detail::fail(ErrorCode::parse, "malformed manifest " + origin + ": " + e.what());
    }
    if (m.frames.empty()) detail::fail(ErrorCode::parse, "manifest has no frames: " + origin);
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        for (const auto& row : m.frames[i].transform)
            for (double v : row)
                if (!std::isfinite(v))
                    detail::fail(ErrorCode::parse, "non-finite transform in frame " +
                                                       std::to_string(i) + " of " + origin);
        Pose<double> p;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) p.m[r][c] = m.frames[i].transform[r][c];
        if (p.orthonormality_error() > 1e-3) {
            detail::fail(ErrorCode::invalid_argument, "rotation of frame " + std::to_string(i) +
                                                          " in " + origin + " is not orthonormal");
        }
    }
    return m;
}

/// Loads a manifest and its images; file paths resolve relative to the
/// manifest and get ".png" appended when they carry no extension.
inline Dataset load_manifest(const std::filesystem::path& path,
                             Vec3<float> background = {1, 1, 1}) {
    std::ifstream in(path);
    if (!in) detail::fail(ErrorCode::io, "cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        detail::fail(ErrorCode::parse, "malformed manifest " + path.string() + ": " + e.what());
    }
    Dataset ds;
    ds.manifest = parse_manifest(j, path.string());
    const auto dir = path.parent_path();
    for (const auto& fr : ds.manifest.frames) {
        std::filesystem::path img = dir / fr.file_path;
        if (!img.has_extension()) img += ".png";
        ds.images.push_back(read_png(img.lexically_normal(), background));
        const auto& im = ds.images.back();
        const float focal = static_cast<float>(focal_from_fov(ds.manifest.camera_angle_x, im.width));
        ds.cameras.push_back(
            Camera<float>::centered(im.width, im.height, focal, pose_from_matrix(fr.transform)));
        ds.cameras.back().validate();
    }
    return ds;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["camera_angle_x"] = m.camera_angle_x;
    j["frames"] = nlohmann::json::array();
    for (const auto& f : m.frames) {
        j["frames"].push_back({{"file_path", f.file_path}, {"transform_matrix", f.transform}});
    }
    return j;
}

/// Every pixel of every view as a training ray with its target colour.
inline TrainBatch<float> rays_from_dataset(const Dataset& ds) {
    TrainBatch<float> b;
    for (std::size_t v = 0; v < ds.size(); ++v) {
        auto rays = generate_all_rays(ds.cameras[v]);
        b.rays.insert(b.rays.end(), rays.begin(), rays.end());
        b.target.insert(b.target.end(), ds.images[v].rgb.begin(), ds.images[v].rgb.end());
    }
    return b;
}

} // namespace spikenerf
