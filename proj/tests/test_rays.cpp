#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <spikenerf/rays.hpp>

using namespace spikenerf;

TEST(GenerateRays, IdentityPosePrincipalPixel) {
    auto cam = Camera<double>::centered(5, 5, 10.0, Pose<double>{});
    const int center = 2 * 5 + 2;
    auto rays = generate_rays<double>(cam, std::vector<int>{center, 0, 24});
    ASSERT_EQ(rays.size(), 3u);
    EXPECT_NEAR(rays[0].direction.x, 0.0, 1e-12);
    EXPECT_NEAR(rays[0].direction.y, 0.0, 1e-12);
    EXPECT_NEAR(rays[0].direction.z, -1.0, 1e-12);
    for (const auto& r : rays) {
        EXPECT_EQ(r.origin, (Vec3<double>{0, 0, 0}));
        EXPECT_NEAR(norm(r.direction), 1.0, 1e-6);
    }
    // Top-left pixel looks up-left.
    EXPECT_LT(rays[1].direction.x, 0.0);
    EXPECT_GT(rays[1].direction.y, 0.0);
    EXPECT_EQ(rays[2].pixel_index, 24);
}

TEST(GenerateRays, TranslationBecomesOrigin) {
    Pose<double> pose;
    pose.m[0][3] = 1;
    pose.m[1][3] = 2;
    pose.m[2][3] = 3;
    auto cam = Camera<double>::centered(4, 3, 2.0, pose);
    for (const auto& r : generate_all_rays(cam)) EXPECT_EQ(r.origin, (Vec3<double>{1, 2, 3}));
}

TEST(GenerateRays, OutOfBoundsPixelThrows) {
    auto cam = Camera<double>::centered(4, 3, 2.0, Pose<double>{});
    EXPECT_THROW(generate_rays<double>(cam, std::vector<int>{12}), Error);
    EXPECT_THROW(generate_rays<double>(cam, std::vector<int>{-1}), Error);
}

TEST(SampleAlongRay, MissGivesNoSamples) {
    Ray<double> r{{-1, 5, 0.5}, {1, 0, 0}, 0};
    EXPECT_EQ(sample_along_ray<double>(r, {{0, 0, 0}, {1, 1, 1}}, 0.1).count(), 0u);
    Ray<double> away{{-1, 0.5, 0.5}, {-1, 0, 0}, 0};
    EXPECT_EQ(sample_along_ray<double>(away, {{0, 0, 0}, {1, 1, 1}}, 0.1).count(), 0u);
}

TEST(SampleAlongRay, UnitCubeQuarterSteps) {
    Ray<double> r{{-1, 0.5, 0.5}, {1, 0, 0}, 0};
    auto s = sample_along_ray<double>(r, {{0, 0, 0}, {1, 1, 1}}, 0.25);
    ASSERT_EQ(s.count(), 4u);
    const double xs[] = {0.125, 0.375, 0.625, 0.875};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(s.positions[i].x, xs[i], 1e-12);
        EXPECT_NEAR(s.positions[i].y, 0.5, 1e-12);
        EXPECT_GT(s.deltas[i], 0.0);
    }
    EXPECT_NEAR(s.deltas[0], 0.25, 1e-12);
    EXPECT_NEAR(s.deltas[3], 0.125, 1e-12);
}

TEST(SampleAlongRay, HalvingStepDoublesCount) {
    Aabb<double> box{{-1, -1, -1}, {1, 1, 1}};
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 50; ++i) {
        Ray<double> r{{-3, u(rng), u(rng)}, normalize(Vec3<double>{1, u(rng), u(rng)}), 0};
        const auto a = sample_along_ray(r, box, 0.05).count();
        const auto b = sample_along_ray(r, box, 0.025).count();
        EXPECT_LE(std::abs(double(b) - 2.0 * double(a)), 1.0);
    }
}

TEST(SampleAlongRay, MonotoneInsideAndCapped) {
    Aabb<double> box{{-1, -1, -1}, {1, 1, 1}};
    Ray<double> r{{-2, -1.7, 0.3}, normalize(Vec3<double>{1, 0.9, -0.1}), 0};
    auto s = sample_along_ray(r, box, 0.01);
    ASSERT_GT(s.count(), 10u);
    double prev = -1;
    for (const auto& p : s.positions) {
        const double t = norm(p - r.origin);
        EXPECT_GT(t, prev);
        prev = t;
        for (std::size_t a = 0; a < 3; ++a) {
            EXPECT_GE(p[a], box.min_corner[a]);
            EXPECT_LE(p[a], box.max_corner[a]);
        }
    }
    EXPECT_EQ(sample_along_ray(r, box, 0.01, 7).count(), 7u);
    EXPECT_THROW(sample_along_ray(r, box, 0.0), Error);
}

TEST(ComputeAlpha, Examples) {
    EXPECT_EQ(compute_alpha(0.0, 0.3), 0.0);
    EXPECT_NEAR(compute_alpha(std::log(2.0), 1.0), 0.5, 1e-15);
    EXPECT_NEAR(compute_alpha(1e6, 1.0), 1.0, 1e-15);
    EXPECT_LT(compute_alpha(30.0, 1.0), 1.0);
}

TEST(ComputeTransmittance, Examples) {
    auto t0 = compute_transmittance<double>(std::vector<double>{0, 0, 0});
    for (double v : t0) EXPECT_EQ(v, 1.0);
    auto t = compute_transmittance<double>(std::vector<double>{0.5, 0.5, 0.5});
    EXPECT_DOUBLE_EQ(t[0], 1.0);
    EXPECT_DOUBLE_EQ(t[1], 0.5);
    EXPECT_DOUBLE_EQ(t[2], 0.25);
    EXPECT_DOUBLE_EQ(t[3], 0.125); // leftover
    EXPECT_THROW(compute_transmittance<double>(std::vector<double>{0.2, 1.5}), Error);
    EXPECT_THROW(compute_transmittance<double>(std::vector<double>{-0.1}), Error);
}

TEST(ComputeTransmittance, WeightsAndLeftoverSumToOne) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> a(1 + i % 40);
        for (auto& v : a) v = u(rng);
        auto t = compute_transmittance<double>(a);
        double sum = t.back();
        for (std::size_t k = 0; k < a.size(); ++k) {
            sum += t[k] * a[k];
            if (k > 0) {
                EXPECT_LE(t[k], t[k - 1]);
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

namespace {

RaySamples<double> fake_samples(std::size_t n) {
    RaySamples<double> s;
    for (std::size_t i = 0; i < n; ++i) {
        s.positions.push_back({double(i), 0, 0});
        s.deltas.push_back(1.0);
    }
    return s;
}

} // namespace

TEST(ApplyMask, ThresholdsInactiveKeepAll) {
    std::vector<double> a{0.1, 0.3, 0.2, 0.9};
    auto t = compute_transmittance<double>(a);
    auto m = apply_mask<double>(fake_samples(4), a, t, {0.0, 0.0});
    ASSERT_EQ(m.count(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(m.indices[i], i);
}

TEST(ApplyMask, HandEvaluatedExample) {
    std::vector<double> a{0.9, 0.9, 0.9};
    auto t = compute_transmittance<double>(a);
    EXPECT_NEAR(t[1], 0.1, 1e-12);
    EXPECT_NEAR(t[2], 0.01, 1e-12);
    auto m = apply_mask<double>(fake_samples(3), a, t, {0.05, 0.0});
    ASSERT_EQ(m.count(), 2u);
    EXPECT_EQ(m.indices[0], 0);
    EXPECT_EQ(m.indices[1], 1);
    EXPECT_EQ(m.raw_count, 3u);
}

TEST(ApplyMask, EmptySceneFullyMasked) {
    std::vector<double> a(5, 0.0);
    auto t = compute_transmittance<double>(a);
    auto m = apply_mask<double>(fake_samples(5), a, t, {1e-4, 1e-4});
    EXPECT_EQ(m.count(), 0u);
}

TEST(ApplyMask, SurvivorsAreIncreasingSubsequence) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(0, 0.3);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(30);
        for (auto& v : a) v = u(rng);
        auto t = compute_transmittance<double>(a);
        auto m = apply_mask<double>(fake_samples(a.size()), a, t, {0.01, 0.05});
        EXPECT_LE(m.count(), a.size());
        for (std::size_t k = 0; k < m.count(); ++k) {
            EXPECT_GT(m.transmittances[k], 0.01);
            EXPECT_GT(m.alphas[k], 0.05);
            if (k) {
                EXPECT_GT(m.indices[k], m.indices[k - 1]);
            }
        }
    }
}
