#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <spikenerf/snn.hpp>

using namespace spikenerf;

namespace {

std::vector<double> one(double x) { return {x}; }

SpikingMlp<double> random_mlp(int in, std::vector<int> hidden, int out, std::uint64_t seed,
                              double gain = 1.0) {
    std::mt19937_64 rng(seed);
    return SpikingMlp<double>::create(in, std::span<const int>(hidden), out, rng, LifConfig{},
                                      gain);
}

Tensor3<double> random_input(int r, int t, int c, std::uint64_t seed, double lo = -1,
                             double hi = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor3<double> x(r, t, c);
    for (auto& v : x.data) v = u(rng);
    return x;
}

double weighted_sum(const Tensor3<double>& a, const Tensor3<double>& w) {
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * w.data[i];
    return s;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

} // namespace

TEST(LifStep, TauOneIsMemoryless) {
    LifConfig cfg{1.0, 1.0, 0.0};
    for (double v0 : {-3.0, 0.0, 0.7, 5.0}) {
        auto r = lif_step<double>(one(v0), one(0.3), cfg);
        EXPECT_DOUBLE_EQ(r.u[0], 0.3);
        EXPECT_EQ(r.spikes[0], 0.0);
        EXPECT_DOUBLE_EQ(r.v[0], 0.3);
    }
}

TEST(LifStep, TwoSubThresholdSteps) {
    LifConfig cfg;
    auto r1 = lif_step<double>(one(0.0), one(0.8), cfg);
    EXPECT_DOUBLE_EQ(r1.u[0], 0.4);
    EXPECT_EQ(r1.spikes[0], 0.0);
    auto r2 = lif_step<double>(r1.v, one(0.8), cfg);
    EXPECT_NEAR(r2.u[0], 0.6, 1e-15);
    EXPECT_EQ(r2.spikes[0], 0.0);
    EXPECT_NEAR(r2.v[0], 0.6, 1e-15);
}

TEST(LifStep, SpikeAndReset) {
    auto r = lif_step<double>(one(0.0), one(2.5), LifConfig{});
    EXPECT_DOUBLE_EQ(r.u[0], 1.25);
    EXPECT_EQ(r.spikes[0], 1.0);
    EXPECT_EQ(r.v[0], 0.0);
    // Closed threshold.
    auto eq = lif_step<double>(one(0.0), one(2.0), LifConfig{});
    EXPECT_EQ(eq.spikes[0], 1.0);
}

TEST(LifStep, Errors) {
    EXPECT_THROW(lif_step<double>(one(0.0), one(std::nan("")), LifConfig{}), Error);
    EXPECT_THROW(lif_step<double>(one(0.0), std::vector<double>{1, 2}, LifConfig{}), Error);
    EXPECT_THROW((LifConfig{0.5, 1.0, 0.0}.validate()), Error);
    EXPECT_THROW((LifConfig{2.0, 0.0, 0.0}.validate()), Error);
}

TEST(LifStep, SubThresholdGeometricRecurrence) {
    for (double tau : {1.5, 2.0, 4.0}) {
        LifConfig cfg{tau, 100.0, 0.25};
        const double x = 0.9;
        std::vector<double> v{0.0};
        for (int t = 1; t <= 30; ++t) {
            auto r = lif_step<double>(v, one(x), cfg);
            ASSERT_EQ(r.spikes[0], 0.0);
            const double k = 1.0 - 1.0 / tau;
            const double closed = (x + cfg.v_reset) * (1.0 - std::pow(k, t));
            EXPECT_NEAR(r.v[0], closed, 1e-12);
            v = r.v;
        }
    }
}

TEST(LifStep, SpikeCountBounded) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-2, 5);
    std::vector<double> v(16, 0.0);
    std::vector<int> count(16, 0);
    const int T = 40;
    for (int t = 0; t < T; ++t) {
        std::vector<double> x(16);
        for (auto& e : x) e = u(rng);
        auto r = lif_step<double>(v, x, LifConfig{});
        for (int i = 0; i < 16; ++i) {
            EXPECT_TRUE(r.spikes[i] == 0.0 || r.spikes[i] == 1.0);
            count[i] += static_cast<int>(r.spikes[i]);
        }
        v = r.v;
    }
    for (int c : count) EXPECT_LE(c, T);
}

TEST(Surrogate, Examples) {
    for (double a : {0.5, 1.0, 4.0, 10.0}) {
        SurrogateConfig cfg{a};
        EXPECT_DOUBLE_EQ(surrogate_derivative(0.0, cfg), 0.5);
        EXPECT_NEAR(surrogate_derivative(1e3, cfg), 1.0, 1e-15);
    }
    EXPECT_NEAR(surrogate_derivative(std::log(3.0), SurrogateConfig{1.0}), 0.75, 1e-15);
    SurrogateConfig d{4.0, SurrogateForm::sigmoid_derivative};
    EXPECT_DOUBLE_EQ(surrogate_derivative(0.0, d), 1.0);
}

TEST(Surrogate, PrimitiveDifferentiatesToDerivative) {
    for (auto form : {SurrogateForm::paper_eq12, SurrogateForm::sigmoid_derivative}) {
        SurrogateConfig cfg{3.0, form};
        for (double x : {-2.0, -0.3, 0.0, 0.4, 1.7}) {
            const double h = 1e-6;
            const double fd =
                (surrogate_primitive(x + h, cfg) - surrogate_primitive(x - h, cfg)) / (2 * h);
            EXPECT_NEAR(fd, surrogate_derivative(x, cfg), 1e-7);
        }
    }
}

TEST(SmlpForward, ZeroDynamics) {
    auto mlp = random_mlp(4, {8, 8}, 3, 1);
    for (std::size_t i = 0; i < mlp.layer_count(); ++i) {
        auto& b = mlp.layer(i).bias;
        std::fill(b.begin(), b.end(), 0.0);
    }
    Tensor3<double> x(2, 5, 4);
    auto tape = smlp_forward(mlp, x, {});
    for (double y : tape.output.data) EXPECT_DOUBLE_EQ(y, 0.5);
    for (auto f : tape.record.fired) EXPECT_EQ(f, 0u);
    for (double u : tape.pre[0].data) EXPECT_EQ(u, 0.0);
}

TEST(SmlpForward, SingleStepMatchesLifStep) {
    auto mlp = random_mlp(3, {5}, 3, 2, 3.0);
    auto x = random_input(1, 1, 3, 9);
    auto tape = smlp_forward(mlp, x, {});
    const auto& l0 = mlp.hidden[0];
    std::vector<double> a(l0.out);
    for (int i = 0; i < l0.out; ++i) {
        a[i] = l0.bias[i];
        for (int j = 0; j < 3; ++j) a[i] += l0.w(j, i) * x(0, 0, j);
    }
    auto r = lif_step<double>(std::vector<double>(l0.out, 0.0), a, LifConfig{});
    for (int k = 0; k < 3; ++k) {
        double z = mlp.readout.bias[k];
        for (int i = 0; i < l0.out; ++i) z += mlp.readout.w(i, k) * r.spikes[i];
        EXPECT_NEAR(tape.output(0, 0, k), sigmoid(z), 1e-15);
    }
    for (int i = 0; i < l0.out; ++i) EXPECT_EQ(tape.act[0](0, 0, i), r.spikes[i]);
}

TEST(SmlpForward, RayIndependenceAndPermutation) {
    auto mlp = random_mlp(4, {16, 16}, 3, 5, 2.0);
    auto x = random_input(4, 6, 4, 11);
    // Make ray 3 identical to ray 1.
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < 4; ++c) x(3, t, c) = x(1, t, c);
    auto y = smlp_forward(mlp, x, {});
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < 3; ++c) EXPECT_EQ(y.output(3, t, c), y.output(1, t, c));
    const int perm[] = {2, 0, 3, 1};
    Tensor3<double> xp(4, 6, 4);
    for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 6; ++t)
            for (int c = 0; c < 4; ++c) xp(r, t, c) = x(perm[r], t, c);
    auto yp = smlp_forward(mlp, xp, {});
    for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 6; ++t)
            for (int c = 0; c < 3; ++c) EXPECT_EQ(yp.output(r, t, c), y.output(perm[r], t, c));
    auto again = smlp_forward(mlp, x, {});
    EXPECT_EQ(again.output.data, y.output.data);
}

TEST(SmlpForward, ShapeMismatchThrows) {
    auto mlp = random_mlp(4, {8}, 3, 1);
    Tensor3<double> x(1, 2, 5);
    EXPECT_THROW(smlp_forward(mlp, x, {}), Error);
    Tensor3<double> ok(1, 2, 4);
    std::vector<std::uint8_t> occ(3, 1);
    EXPECT_THROW(smlp_forward(mlp, ok, occ), Error);
}

TEST(SmlpForward, SpikesRecordedOnOccupiedSlots) {
    auto mlp = random_mlp(4, {8}, 3, 4, 4.0);
    auto x = random_input(2, 4, 4, 2);
    std::vector<std::uint8_t> occ{1, 1, 0, 0, 1, 0, 1, 0};
    auto tape = smlp_forward(mlp, x, occ);
    EXPECT_EQ(tape.record.occupied_slots, 4u);
    EXPECT_EQ(tape.extent, (std::vector<int>{2, 3}));
    std::uint64_t fired = 0;
    for (int r = 0; r < 2; ++r)
        for (int t = 0; t < 4; ++t)
            if (occ[r * 4 + t])
                for (int i = 0; i < 8; ++i) fired += tape.act[0](r, t, i) != 0.0;
    EXPECT_EQ(tape.record.fired[0], fired);
    // Slots after the last occupied one are not evaluated.
    for (int c = 0; c < 3; ++c) EXPECT_EQ(tape.output(0, 3, c), 0.0);
}

TEST(SmlpBackward, OneNeuronSymbolic) {
    SpikingMlp<double> mlp;
    mlp.hidden.push_back({1, 1, {0.9}, {0.6}, LifConfig{}});
    mlp.readout = {1, 1, {1.3}, {-0.2}, std::nullopt};
    Tensor3<double> x(1, 1, 1);
    x(0, 0, 0) = 1.7;
    auto tape = smlp_forward(mlp, x, {});
    Tensor3<double> up(1, 1, 1, 1.0);
    auto g = MlpGradients<double>::zeros_like(mlp);
    smlp_backward(mlp, tape, up, g);
    const double u = 0.5 * (0.9 * 1.7 + 0.6);
    const double s = u >= 1.0 ? 1.0 : 0.0;
    const double y = sigmoid(1.3 * s - 0.2);
    const double expected = y * (1 - y) * 1.3 * surrogate_derivative(u - 1.0, mlp.surrogate) *
                            0.5 * 1.7;
    EXPECT_NEAR(g.weight[0][0], expected, 1e-15);
    EXPECT_NEAR(g.weight[1][0], y * (1 - y) * s, 1e-15);
}

TEST(SmlpBackward, Linearity) {
    auto mlp = random_mlp(4, {8, 8}, 3, 7, 3.0);
    auto x = random_input(3, 5, 4, 1);
    auto tape = smlp_forward(mlp, x, {});
    auto up = random_input(3, 5, 3, 2, -1, 1);
    auto g1 = MlpGradients<double>::zeros_like(mlp);
    smlp_backward(mlp, tape, up, g1);
    auto up2 = up;
    for (auto& v : up2.data) v *= 2;
    auto g2 = MlpGradients<double>::zeros_like(mlp);
    smlp_backward(mlp, tape, up2, g2);
    for (std::size_t l = 0; l < g1.weight.size(); ++l) {
        for (std::size_t k = 0; k < g1.weight[l].size(); ++k)
            EXPECT_NEAR(g2.weight[l][k], 2 * g1.weight[l][k], 1e-12);
    }
    auto g0 = MlpGradients<double>::zeros_like(mlp);
    smlp_backward(mlp, tape, Tensor3<double>(3, 5, 3), g0);
    for (const auto& w : g0.weight)
        for (double v : w) EXPECT_EQ(v, 0.0);
    for (const auto& b : g0.bias)
        for (double v : b) EXPECT_EQ(v, 0.0);
}

TEST(SmlpBackward, MissingTapeThrows) {
    auto mlp = random_mlp(4, {8}, 3, 1);
    auto x = random_input(1, 2, 4, 1);
    auto tape = smlp_forward(mlp, x, {}, ForwardOptions{false});
    auto g = MlpGradients<double>::zeros_like(mlp);
    EXPECT_THROW(smlp_backward(mlp, tape, Tensor3<double>(1, 2, 3), g), Error);
}

namespace {

void check_relaxed_fd(SurrogateConfig sc, int in, std::vector<int> hidden, int T) {
    auto mlp = random_mlp(in, hidden, 3, 21, 2.0);
    mlp.spike_fn = SpikeFunction::surrogate_primitive;
    mlp.surrogate = sc;
    auto x = random_input(2, T, in, 5, -1, 2);
    auto w = random_input(2, T, 3, 6, -1, 1);
    auto loss = [&](const SpikingMlp<double>& m, const Tensor3<double>& xi) {
        return weighted_sum(smlp_forward(m, xi, {}).output, w);
    };
    auto tape = smlp_forward(mlp, x, {});
    auto g = MlpGradients<double>::zeros_like(mlp);
    Tensor3<double> dx(2, T, in);
    smlp_backward(mlp, tape, w, g, &dx);
    const double h = 1e-6;
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
        for (std::size_t k = 0; k < mlp.layer(l).weight.size(); ++k) {
            auto p = mlp, m = mlp;
            p.layer(l).weight[k] += h;
            m.layer(l).weight[k] -= h;
            const double fd = (loss(p, x) - loss(m, x)) / (2 * h);
            EXPECT_LE(rel_err(fd, g.weight[l][k]), 1e-4) << "layer " << l << " w " << k;
        }
        for (std::size_t k = 0; k < mlp.layer(l).bias.size(); ++k) {
            auto p = mlp, m = mlp;
            p.layer(l).bias[k] += h;
            m.layer(l).bias[k] -= h;
            const double fd = (loss(p, x) - loss(m, x)) / (2 * h);
            EXPECT_LE(rel_err(fd, g.bias[l][k]), 1e-4) << "layer " << l << " b " << k;
        }
    }
    for (std::size_t k = 0; k < x.data.size(); ++k) {
        auto p = x, m = x;
        p.data[k] += h;
        m.data[k] -= h;
        const double fd = (loss(mlp, p) - loss(mlp, m)) / (2 * h);
        EXPECT_LE(rel_err(fd, dx.data[k]), 1e-4) << "input " << k;
    }
}

} // namespace

TEST(SmlpBackward, RelaxedFiniteDifferencesTwoNeuronsThreeSteps) {
    check_relaxed_fd(SurrogateConfig{}, 2, {2}, 3);
}

TEST(SmlpBackward, RelaxedFiniteDifferencesVariants) {
    check_relaxed_fd(SurrogateConfig{4.0, SurrogateForm::sigmoid_derivative}, 3, {4, 3}, 4);
    check_relaxed_fd(SurrogateConfig{2.0, SurrogateForm::paper_eq12, true}, 2, {3}, 1);
}

TEST(SmlpBackward, ReadoutGradientExactOnRealForward) {
    auto mlp = random_mlp(3, {6}, 3, 8, 3.0);
    auto x = random_input(2, 4, 3, 3);
    auto w = random_input(2, 4, 3, 4, -1, 1);
    auto tape = smlp_forward(mlp, x, {});
    auto g = MlpGradients<double>::zeros_like(mlp);
    smlp_backward(mlp, tape, w, g);
    const double h = 1e-6;
    for (std::size_t k = 0; k < mlp.readout.weight.size(); ++k) {
        auto p = mlp, m = mlp;
        p.readout.weight[k] += h;
        m.readout.weight[k] -= h;
        const double fd = (weighted_sum(smlp_forward(p, x, {}).output, w) -
                           weighted_sum(smlp_forward(m, x, {}).output, w)) /
                          (2 * h);
        EXPECT_NEAR(fd, g.weight[1][k], 1e-8);
    }
}

TEST(SmlpBackward, AnnModesMatchFiniteDifferences) {
    for (auto kind : {NeuronKind::relu, NeuronKind::identity}) {
        auto mlp = random_mlp(3, {5}, 3, 12);
        mlp.neuron = kind;
        auto x = random_input(2, 2, 3, 13);
        auto w = random_input(2, 2, 3, 14, -1, 1);
        auto tape = smlp_forward(mlp, x, {});
        auto g = MlpGradients<double>::zeros_like(mlp);
        smlp_backward(mlp, tape, w, g);
        const double h = 1e-6;
        for (std::size_t k = 0; k < mlp.hidden[0].weight.size(); ++k) {
            auto p = mlp, m = mlp;
            p.hidden[0].weight[k] += h;
            m.hidden[0].weight[k] -= h;
            const double fd = (weighted_sum(smlp_forward(p, x, {}).output, w) -
                               weighted_sum(smlp_forward(m, x, {}).output, w)) /
                              (2 * h);
            EXPECT_NEAR(fd, g.weight[0][k], 1e-7);
        }
    }
}

TEST(Encoders, Direct) {
    std::vector<double> x{0.2, 0.7};
    auto t1 = direct_encode<double>(x, 1, 2, 1);
    EXPECT_EQ(t1.data, x);
    auto t3 = direct_encode<double>(x, 1, 2, 3);
    for (int t = 0; t < 3; ++t) {
        EXPECT_EQ(t3(0, t, 0), 0.2);
        EXPECT_EQ(t3(0, t, 1), 0.7);
    }
    EXPECT_THROW(direct_encode<double>(x, 1, 2, 0), Error);
}

TEST(Encoders, Poisson) {
    std::vector<double> x{0.0, 1.0};
    auto p = poisson_encode<double>(x, 1, 2, 50, 1);
    for (int t = 0; t < 50; ++t) {
        EXPECT_EQ(p(0, t, 0), 0.0);
        EXPECT_EQ(p(0, t, 1), 1.0);
    }
    std::vector<double> half{0.5};
    auto h = poisson_encode<double>(half, 1, 1, 10000, 42);
    double rate = 0;
    for (double v : h.data) {
        EXPECT_TRUE(v == 0.0 || v == 1.0);
        rate += v;
    }
    EXPECT_NEAR(rate / 10000, 0.5, 0.02);
    EXPECT_EQ(poisson_encode<double>(half, 1, 1, 64, 7).data,
              poisson_encode<double>(half, 1, 1, 64, 7).data);
    EXPECT_THROW(poisson_encode<double>(std::vector<double>{1.2}, 1, 1, 4, 0), Error);
    EXPECT_THROW(poisson_encode<double>(std::vector<double>{-0.1}, 1, 1, 4, 0), Error);
}

TEST(Encoders, MeanDecode) {
    Tensor3<double> y1(1, 1, 2);
    y1(0, 0, 0) = 0.3;
    y1(0, 0, 1) = 0.8;
    EXPECT_EQ(mean_decode(y1), (std::vector<double>{0.3, 0.8}));
    Tensor3<double> y2(1, 2, 1);
    y2(0, 1, 0) = 1.0;
    EXPECT_DOUBLE_EQ(mean_decode(y2)[0], 0.5);
    Tensor3<double> y3(1, 4, 1, 0.25);
    EXPECT_DOUBLE_EQ(mean_decode(y3)[0], 0.25);
}

TEST(ViewEmbedding, WidthAndValues) {
    EXPECT_EQ(view_embedding_width(4), 27);
    std::vector<double> e(27);
    view_embedding<double>({0.0, 0.6, -0.8}, 4, e);
    EXPECT_EQ(e[0], 0.0);
    EXPECT_EQ(e[1], 0.6);
    EXPECT_NEAR(e[3 + 1], std::sin(0.6), 1e-15);
    EXPECT_NEAR(e[6 + 2], std::cos(-0.8), 1e-15);
    EXPECT_NEAR(e[3 + 6 * 3 + 1], std::sin(8 * 0.6), 1e-15);
    std::vector<double> bad(5);
    EXPECT_THROW(view_embedding<double>({0, 0, 1}, 4, bad), Error);
}
