#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "vec.hpp"

namespace spikenerf {

/// Pinhole camera. Camera space looks along -z with +y up and image rows
/// growing downwards.
template <typename Real>
struct Camera {
    int width = 0;
    int height = 0;
    Real focal = 1;
    Real cx = 0, cy = 0;
    Pose<Real> pose;

    static Camera centered(int w, int h, Real focal, const Pose<Real>& pose) {
        return {w, h, focal, Real(w) * Real(0.5), Real(h) * Real(0.5), pose};
    }

    void validate() const {
        detail::require(width > 0 && height > 0, ErrorCode::invalid_argument,
                        "camera size must be positive");
        detail::require(focal > 0, ErrorCode::invalid_argument, "focal must be positive");
        detail::require(pose.orthonormality_error() <= Real(1e-4), ErrorCode::invalid_argument,
                        "camera rotation is not orthonormal");
    }
};

template <typename Real>
struct Ray {
    Vec3<Real> origin;
    Vec3<Real> direction;
    int pixel_index = 0;
};

template <typename Real>
std::vector<Ray<Real>> generate_rays(const Camera<Real>& cam, std::span<const int> pixels) {
    std::vector<Ray<Real>> rays;
    rays.reserve(pixels.size());
    const auto origin = cam.pose.translation();
    for (int pix : pixels) {
        if (pix < 0 || pix >= cam.width * cam.height) {
            detail::fail(ErrorCode::out_of_bounds, "pixel outside image");
        }
        const Real u = Real(pix % cam.width) + Real(0.5);
        const Real v = Real(pix / cam.width) + Real(0.5);
        Vec3<Real> d{(u - cam.cx) / cam.focal, -(v - cam.cy) / cam.focal, Real(-1)};
        rays.push_back({origin, normalize(cam.pose.rotate(d)), pix});
    }
    return rays;
}

/// Rays for every pixel in row-major order.
template <typename Real>
std::vector<Ray<Real>> generate_all_rays(const Camera<Real>& cam) {
    std::vector<int> pix(static_cast<std::size_t>(cam.width) * cam.height);
    for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<int>(i);
    return generate_rays<Real>(cam, pix);
}

template <typename Real>
struct RaySamples {
    Ray<Real> ray;
    std::vector<Vec3<Real>> positions;
    std::vector<Real> deltas;
    std::size_t count() const { return positions.size(); }
};

/// Entry and exit distances of the ray through the box, entry clamped at
/// the origin. Returns false on a miss.
template <typename Real>
bool intersect_aabb(const Ray<Real>& ray, const Aabb<Real>& box, Real& t_near, Real& t_far) {
    t_near = 0;
    t_far = std::numeric_limits<Real>::max();
    for (std::size_t a = 0; a < 3; ++a) {
        const Real o = ray.origin[a], d = ray.direction[a];
        if (std::abs(d) < std::numeric_limits<Real>::min()) {
            if (o < box.min_corner[a] || o > box.max_corner[a]) return false;
            continue;
        }
        Real t0 = (box.min_corner[a] - o) / d;
        Real t1 = (box.max_corner[a] - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
    }
    return t_far > t_near;
}

/// Uniform midpoint samples at t_near + (k + 0.5) * step. max_samples == 0
/// means unbounded.
template <typename Real>
RaySamples<Real> sample_along_ray(const Ray<Real>& ray, const Aabb<Real>& box, Real step,
                                  std::size_t max_samples = 0) {
    detail::require(step > 0, ErrorCode::invalid_argument, "step_size must be positive");
    RaySamples<Real> out{ray, {}, {}};
    Real t_near, t_far;
    if (!intersect_aabb(ray, box, t_near, t_far)) return out;
    for (std::size_t k = 0;; ++k) {
        if (max_samples != 0 && k >= max_samples) break;
        const Real t = t_near + (Real(k) + Real(0.5)) * step;
        if (!(t < t_far)) break;
        out.positions.push_back(ray.origin + ray.direction * t);
        out.deltas.push_back(std::max(std::min(step, t_far - t), Real(1e-9)));
    }
    return out;
}

template <typename Real>
Real compute_alpha(Real sigma, Real delta) {
    return -std::expm1(-sigma * delta);
}

/// T_i = prod_{j<i} (1 - alpha_j). The returned vector has one extra
/// trailing entry holding the leftover transmittance.
template <typename Real>
std::vector<Real> compute_transmittance(std::span<const Real> alphas) {
    std::vector<Real> t(alphas.size() + 1);
    Real acc = 1;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const Real a = alphas[i];
        if (!(a >= 0 && a <= 1)) detail::fail(ErrorCode::invalid_argument, "alpha outside [0,1]");
        t[i] = acc;
        acc *= (1 - a);
    }
    t[alphas.size()] = acc;
    return t;
}

template <typename Real>
struct MaskThresholds {
    Real transmittance = Real(1e-4); // lambda1
    Real alpha = Real(1e-4);         // lambda2
};

/// Survivors of one ray: T_i > lambda1 and alpha_i > lambda2.
template <typename Real>
struct MaskedRay {
    std::vector<int> indices;
    std::vector<Vec3<Real>> positions;
    std::vector<Real> alphas;
    std::vector<Real> transmittances;
    std::size_t raw_count = 0;

    std::size_t count() const { return indices.size(); }
};

template <typename Real>
struct MaskedSamples {
    std::vector<MaskedRay<Real>> rays;

    std::size_t ray_count() const { return rays.size(); }
    std::size_t survivor_count() const {
        std::size_t n = 0;
        for (const auto& r : rays) n += r.count();
        return n;
    }
};

template <typename Real>
MaskedRay<Real> apply_mask(const RaySamples<Real>& samples, std::span<const Real> alphas,
                           std::span<const Real> trans, MaskThresholds<Real> lambda) {
    detail::require(alphas.size() == samples.count() && trans.size() >= samples.count(),
                    ErrorCode::shape_mismatch, "alpha/transmittance length mismatch");
    MaskedRay<Real> out;
    out.raw_count = samples.count();
    for (std::size_t i = 0; i < samples.count(); ++i) {
        if (trans[i] > lambda.transmittance && alphas[i] > lambda.alpha) {
            out.indices.push_back(static_cast<int>(i));
            out.positions.push_back(samples.positions[i]);
            out.alphas.push_back(alphas[i]);
            out.transmittances.push_back(trans[i]);
        }
    }
    return out;
}

} // namespace spikenerf
