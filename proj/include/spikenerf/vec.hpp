#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace spikenerf {

template <typename Real>
struct Vec3 {
    Real x{}, y{}, z{};

    constexpr Real operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr Real& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    template <typename Other>
    constexpr Vec3<Other> cast() const {
        return {static_cast<Other>(x), static_cast<Other>(y), static_cast<Other>(z)};
    }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(Vec3 a, Real s) { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr Vec3 operator*(Real s, Vec3 a) { return a * s; }
    friend constexpr Vec3 operator/(Vec3 a, Real s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

template <typename Real>
constexpr Real dot(Vec3<Real> a, Vec3<Real> b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

template <typename Real>
constexpr Vec3<Real> cross(Vec3<Real> a, Vec3<Real> b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename Real>
Real norm(Vec3<Real> a) { return std::sqrt(dot(a, a)); }

template <typename Real>
Vec3<Real> normalize(Vec3<Real> a) { return a / norm(a); }

/// Row-major 3x4 rigid transform [R | t].
template <typename Real>
struct Pose {
    std::array<std::array<Real, 4>, 3> m{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};

    Vec3<Real> rotate(Vec3<Real> v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Vec3<Real> translation() const { return {m[0][3], m[1][3], m[2][3]}; }

    /// Max deviation of R^T R from identity.
    Real orthonormality_error() const {
        Real worst = 0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                Real s = 0;
                for (int k = 0; k < 3; ++k) s += m[k][i] * m[k][j];
                worst = std::max(worst, std::abs(s - (i == j ? Real(1) : Real(0))));
            }
        }
        return worst;
    }
};

} // namespace spikenerf
