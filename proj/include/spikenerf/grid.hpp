#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "vec.hpp"

namespace spikenerf {

template <typename Real>
struct Aabb {
    Vec3<Real> min_corner{-1, -1, -1};
    Vec3<Real> max_corner{1, 1, 1};

    bool valid() const {
        return min_corner.x < max_corner.x && min_corner.y < max_corner.y &&
               min_corner.z < max_corner.z;
    }
    Vec3<Real> extent() const { return max_corner - min_corner; }
    Vec3<Real> center() const { return (min_corner + max_corner) * Real(0.5); }
    Real diagonal() const { return norm(extent()); }

    template <typename Other>
    Aabb<Other> cast() const {
        return {min_corner.template cast<Other>(), max_corner.template cast<Other>()};
    }
};

struct GridDims {
    int nx = 2, ny = 2, nz = 2;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    int operator[](std::size_t axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Dense node-centred grid. Nodes sit on cell corners and span the AABB
/// inclusively; storage is x-fastest with channels interleaved per node.
template <typename Real>
struct DenseGrid {
    GridDims dims;
    int channels = 1;
    Aabb<Real> aabb;
    std::vector<Real> values;

    DenseGrid() = default;
    DenseGrid(GridDims d, int c, Aabb<Real> box, Real fill = Real(0))
        : dims(d), channels(c), aabb(box) {
        detail::require(d.nx >= 2 && d.ny >= 2 && d.nz >= 2, ErrorCode::invalid_argument,
                        "grid needs at least 2 nodes per axis");
        detail::require(c >= 1, ErrorCode::invalid_argument, "grid needs at least one channel");
        detail::require(box.valid(), ErrorCode::invalid_argument,
                        "aabb min_corner must be below max_corner");
        values.assign(d.count() * static_cast<std::size_t>(c), fill);
    }

    std::size_t node_index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims.nx) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.ny) * z);
    }
    Real& at(int x, int y, int z, int c = 0) {
        return values[node_index(x, y, z) * channels + c];
    }
    Real at(int x, int y, int z, int c = 0) const {
        return values[node_index(x, y, z) * channels + c];
    }
    bool same_shape(const DenseGrid& other) const {
        return dims == other.dims && channels == other.channels &&
               values.size() == other.values.size();
    }
    /// Zero-filled grid of identical shape, used to accumulate gradients.
    DenseGrid zeros_like() const {
        DenseGrid g;
        g.dims = dims;
        g.channels = channels;
        g.aabb = aabb;
        g.values.assign(values.size(), Real(0));
        return g;
    }
    /// Edge length of the largest cell axis.
    Real voxel_size() const {
        auto e = aabb.extent();
        return std::max({e.x / (dims.nx - 1), e.y / (dims.ny - 1), e.z / (dims.nz - 1)});
    }
};

template <typename Real>
using GridGradient = DenseGrid<Real>;

template <typename Real>
using FeatureGrid = DenseGrid<Real>;

enum class DensityActivationKind { relu, shifted_softplus };

struct DensityActivation {
    DensityActivationKind kind = DensityActivationKind::shifted_softplus;
    double shift = -10.0;
};

template <typename Real>
struct DensityGrid : DenseGrid<Real> {
    DensityActivation activation;

    DensityGrid() = default;
    DensityGrid(GridDims d, Aabb<Real> box, DensityActivation act = {})
        : DenseGrid<Real>(d, 1, box), activation(act) {}
};

/// Continuous grid coordinates of a world point; node 0 at min_corner and
/// node dim-1 at max_corner.
template <typename Real>
Vec3<Real> world_to_grid(Vec3<Real> p, const Aabb<Real>& aabb, GridDims dims) {
    Vec3<Real> g;
    auto ext = aabb.extent();
    for (std::size_t a = 0; a < 3; ++a) {
        // Samples produced by the slab test can land a few ulps outside.
        const Real tol = ext[a] * Real(1e-5);
        if (!(p[a] >= aabb.min_corner[a] - tol && p[a] <= aabb.max_corner[a] + tol)) {
            detail::fail(ErrorCode::out_of_bounds, "point outside grid");
        }
        Real u = (p[a] - aabb.min_corner[a]) / ext[a] * Real(dims[a] - 1);
        g[a] = std::clamp(u, Real(0), Real(dims[a] - 1));
    }
    return g;
}

template <typename Real>
struct TrilinearStencil {
    std::array<std::size_t, 8> nodes{};
    std::array<Real, 8> weights{};
};

/// The 8 enclosing nodes of p and their trilinear weights. Corner k has
/// offset (k & 1, (k >> 1) & 1, (k >> 2) & 1).
template <typename Real>
TrilinearStencil<Real> trilinear_stencil(const DenseGrid<Real>& grid, Vec3<Real> p) {
    auto g = world_to_grid(p, grid.aabb, grid.dims);
    std::array<int, 3> base{};
    std::array<Real, 3> frac{};
    for (std::size_t a = 0; a < 3; ++a) {
        int i = static_cast<int>(std::floor(g[a]));
        i = std::clamp(i, 0, grid.dims[a] - 2);
        base[a] = i;
        frac[a] = g[a] - Real(i);
    }
    TrilinearStencil<Real> s;
    for (int k = 0; k < 8; ++k) {
        int dx = k & 1, dy = (k >> 1) & 1, dz = (k >> 2) & 1;
        s.nodes[k] = grid.node_index(base[0] + dx, base[1] + dy, base[2] + dz);
        s.weights[k] = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) *
                       (dz ? frac[2] : 1 - frac[2]);
    }
    return s;
}

template <typename Real>
Real interp_density(const DensityGrid<Real>& grid, Vec3<Real> p) {
    auto s = trilinear_stencil<Real>(grid, p);
    Real v = 0;
    for (int k = 0; k < 8; ++k) v += s.weights[k] * grid.values[s.nodes[k]];
    return v;
}

/// Channel-wise interpolation into `out` (length == grid.channels).
template <typename Real>
void interp_feature(const FeatureGrid<Real>& grid, Vec3<Real> p, std::span<Real> out) {
    detail::require(out.size() == static_cast<std::size_t>(grid.channels),
                    ErrorCode::shape_mismatch, "feature output length != channels");
    auto s = trilinear_stencil<Real>(grid, p);
    std::fill(out.begin(), out.end(), Real(0));
    const std::size_t c = out.size();
    for (int k = 0; k < 8; ++k) {
        const Real* node = grid.values.data() + s.nodes[k] * c;
        const Real w = s.weights[k];
        for (std::size_t ch = 0; ch < c; ++ch) out[ch] += w * node[ch];
    }
}

template <typename Real>
std::vector<Real> interp_feature(const FeatureGrid<Real>& grid, Vec3<Real> p) {
    std::vector<Real> out(static_cast<std::size_t>(grid.channels));
    interp_feature<Real>(grid, p, out);
    return out;
}

/// Scatters upstream (one value per channel) onto the enclosing nodes of p,
/// additively.
template <typename Real>
void interp_backward(const DenseGrid<Real>& grid, Vec3<Real> p, std::span<const Real> upstream,
                     GridGradient<Real>& grad) {
    detail::require(grid.same_shape(grad), ErrorCode::shape_mismatch,
                    "gradient grid shape mismatch");
    detail::require(upstream.size() == static_cast<std::size_t>(grid.channels),
                    ErrorCode::shape_mismatch, "upstream length != channels");
    auto s = trilinear_stencil<Real>(grid, p);
    const std::size_t c = upstream.size();
    for (int k = 0; k < 8; ++k) {
        Real* node = grad.values.data() + s.nodes[k] * c;
        for (std::size_t ch = 0; ch < c; ++ch) node[ch] += s.weights[k] * upstream[ch];
    }
}

/// Maps raw grid density to a non-negative extinction coefficient.
template <typename Real>
Real activate_density(Real raw, const DensityActivation& act) {
    if (act.kind == DensityActivationKind::relu) return raw > 0 ? raw : Real(0);
    const Real y = raw + static_cast<Real>(act.shift);
    Real out = y > 0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
    return std::max(out, std::numeric_limits<Real>::denorm_min());
}

/// d activate_density / d raw.
template <typename Real>
Real activate_density_grad(Real raw, const DensityActivation& act) {
    if (act.kind == DensityActivationKind::relu) return raw > 0 ? Real(1) : Real(0);
    const Real y = raw + static_cast<Real>(act.shift);
    if (y >= 0) return Real(1) / (Real(1) + std::exp(-y));
    const Real e = std::exp(y);
    return e / (Real(1) + e);
}

/// Features uniform in [-scale, scale]; density all zeros.
template <typename Real, typename Rng>
void init_feature_grid(FeatureGrid<Real>& grid, Rng& rng, Real scale = Real(1e-2)) {
    std::uniform_real_distribution<double> dist(-static_cast<double>(scale),
                                                static_cast<double>(scale));
    for (auto& v : grid.values) v = static_cast<Real>(dist(rng));
}

} // namespace spikenerf
