#pragma once

// Reference implementations and random instances shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <spikenerf/pack.hpp>
#include <spikenerf/snn.hpp>

namespace oracle {

using namespace spikenerf;

/// Sequential evaluation of one ray's input sequence, one lif_step per
/// hidden layer and time step. Returns [time][output].
inline std::vector<std::vector<double>> sequential_forward(
    const SpikingMlp<double>& mlp, const std::vector<std::vector<double>>& xs) {
    std::vector<std::vector<double>> v;
    for (const auto& l : mlp.hidden) v.emplace_back(static_cast<std::size_t>(l.out), 0.0);
    std::vector<std::vector<double>> out;
    for (const auto& x0 : xs) {
        std::vector<double> h = x0;
        for (std::size_t l = 0; l < mlp.hidden.size(); ++l) {
            const auto& layer = mlp.hidden[l];
            std::vector<double> a(layer.bias.begin(), layer.bias.end());
            for (int i = 0; i < layer.out; ++i)
                for (int j = 0; j < layer.in; ++j) a[i] += layer.w(j, i) * h[j];
            auto r = lif_step<double>(v[l], a, layer.lif.value_or(LifConfig{}));
            v[l] = r.v;
            h = r.spikes;
        }
        std::vector<double> y(mlp.readout.bias.begin(), mlp.readout.bias.end());
        for (int i = 0; i < mlp.readout.out; ++i) {
            for (int j = 0; j < mlp.readout.in; ++j) y[i] += mlp.readout.w(j, i) * h[j];
            y[i] = sigmoid(y[i]);
        }
        out.push_back(y);
    }
    return out;
}

/// Masked samples from keep patterns (positions unused by packing).
inline MaskedSamples<double> make_masked(const std::vector<std::vector<bool>>& keep) {
    MaskedSamples<double> m;
    for (const auto& ray : keep) {
        MaskedRay<double> r;
        r.raw_count = ray.size();
        for (std::size_t i = 0; i < ray.size(); ++i) {
            if (!ray[i]) continue;
            r.indices.push_back(static_cast<int>(i));
            r.positions.push_back({0, 0, 0});
            r.alphas.push_back(0.5);
            r.transmittances.push_back(1.0);
        }
        m.rays.push_back(r);
    }
    return m;
}

struct Instance {
    std::vector<std::vector<bool>> keep;
    MaskedSamples<double> masked;
    std::vector<double> features; // survivors x channels
    int channels = 0;
    SpikingMlp<double> mlp;
};

/// Random (mask pattern, sMLP, features) with <= max_rays rays, <= max_samples
/// raw samples per ray and <= max_hidden units per hidden layer.
template <typename Rng>
Instance random_instance(Rng& rng, int max_rays = 8, int max_samples = 16, int max_hidden = 32) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Instance inst;
    const int R = uni(1, max_rays);
    const double keep_p = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    std::bernoulli_distribution keep(keep_p);
    for (int r = 0; r < R; ++r) {
        std::vector<bool> k(static_cast<std::size_t>(uni(0, max_samples)));
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = keep(rng);
        inst.keep.push_back(k);
    }
    inst.masked = make_masked(inst.keep);
    inst.channels = uni(1, 6);
    std::uniform_real_distribution<double> feat(-1.0, 3.0);
    inst.features.resize(inst.masked.survivor_count() * inst.channels);
    for (auto& f : inst.features) f = feat(rng);
    std::vector<int> hidden(static_cast<std::size_t>(uni(1, 2)));
    for (auto& h : hidden) h = uni(1, max_hidden);
    LifConfig lif;
    lif.tau = std::uniform_real_distribution<double>(1.0, 4.0)(rng);
    inst.mlp = SpikingMlp<double>::create(inst.channels, std::span<const int>(hidden), 3, rng,
                                          lif, 2.5);
    return inst;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

/// Per-survivor reference outputs: TCP runs each ray's survivors alone, TP
/// runs the full raw sequence with zero vectors at masked samples.
inline std::vector<double> reference_outputs(const Instance& inst, PackingMode mode) {
    std::vector<double> out;
    std::size_t s = 0;
    const auto C = static_cast<std::size_t>(inst.channels);
    for (const auto& ray : inst.masked.rays) {
        std::vector<std::vector<double>> xs;
        if (mode == PackingMode::tcp) {
            for (std::size_t k = 0; k < ray.count(); ++k) {
                xs.emplace_back(inst.features.begin() + (s + k) * C,
                                inst.features.begin() + (s + k + 1) * C);
            }
        } else {
            xs.assign(ray.raw_count, std::vector<double>(C, 0.0));
            for (std::size_t k = 0; k < ray.count(); ++k) {
                xs[ray.indices[k]].assign(inst.features.begin() + (s + k) * C,
                                          inst.features.begin() + (s + k + 1) * C);
            }
        }
        auto ys = sequential_forward(inst.mlp, xs);
        for (std::size_t k = 0; k < ray.count(); ++k) {
            const auto& y = ys[mode == PackingMode::tcp ? k : ray.indices[k]];
            out.insert(out.end(), y.begin(), y.end());
        }
        s += ray.count();
    }
    return out;
}

/// Packed forward + unpack, per survivor.
inline std::vector<double> packed_outputs(const Instance& inst, PackingMode mode, bool sort) {
    auto b = pack<double>(inst.masked, inst.features, inst.channels, mode, sort);
    auto tape = smlp_forward(inst.mlp, b.data, b.occupancy, ForwardOptions{false});
    return unpack_scatter(tape.output, b);
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_diff(a[i], b[i]));
    return m;
}

/// One ray, sample 1 of 3 masked, tau = 2: TCP fires at its second slot,
/// TP decays through the zero slot and stays silent.
struct Witness {
    Instance inst;
    double tp = 0, tcp = 0; // red output of the last survivor
};

inline Witness interior_mask_witness() {
    Witness w;
    w.inst.keep = {{true, false, true}};
    w.inst.masked = make_masked(w.inst.keep);
    w.inst.channels = 1;
    w.inst.features = {1.5, 1.5};
    SpikingMlp<double> mlp;
    mlp.hidden.push_back({1, 1, {1.0}, {0.0}, LifConfig{2.0, 1.0, 0.0}});
    mlp.readout = {1, 3, {2.0, 2.0, 2.0}, {-1.0, -1.0, -1.0}, std::nullopt};
    w.inst.mlp = mlp;
    w.tp = packed_outputs(w.inst, PackingMode::tp, false)[3];
    w.tcp = packed_outputs(w.inst, PackingMode::tcp, false)[3];
    return w;
}

} // namespace oracle
