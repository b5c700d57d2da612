#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "vec.hpp"

namespace spikenerf {

struct LifConfig {
    double tau = 2.0;
    double v_th = 1.0;
    double v_reset = 0.0;

    void validate() const {
        detail::require(tau >= 1.0, ErrorCode::invalid_argument, "LIF tau must be >= 1");
        detail::require(v_th > v_reset, ErrorCode::invalid_argument,
                        "LIF v_th must exceed v_reset");
    }
};

enum class SurrogateForm {
    paper_eq12,         // dH/dx = sigmoid(alpha_sg * x)
    sigmoid_derivative, // dH/dx = alpha_sg * s * (1 - s), s = sigmoid(alpha_sg * x)
};

struct SurrogateConfig {
    double alpha_sg = 4.0;
    SurrogateForm form = SurrogateForm::paper_eq12;
    /// Drop the surrogate term of the reset path V = U(1-S) + V_reset S.
    bool detach_reset = false;
};

/// Hidden-layer neuron model. relu and identity give the non-spiking ANN
/// baseline with the same topology.
enum class NeuronKind { lif, relu, identity };

/// How the forward pass turns U - V_th into S. `surrogate_primitive`
/// replaces the Heaviside step by the antiderivative of the surrogate, so
/// the forward becomes smooth and its finite differences match backward.
enum class SpikeFunction { heaviside, surrogate_primitive };

template <typename Real>
Real sigmoid(Real x) {
    if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real(1) + e);
}

template <typename Real>
Real surrogate_derivative(Real x, const SurrogateConfig& cfg) {
    const Real a = static_cast<Real>(cfg.alpha_sg);
    const Real s = sigmoid(a * x);
    if (cfg.form == SurrogateForm::paper_eq12) return s;
    return a * s * (1 - s);
}

/// Antiderivative of surrogate_derivative (up to a constant).
template <typename Real>
Real surrogate_primitive(Real x, const SurrogateConfig& cfg) {
    const Real a = static_cast<Real>(cfg.alpha_sg);
    if (cfg.form == SurrogateForm::paper_eq12) {
        const Real y = a * x;
        const Real sp = y > 0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
        return sp / a;
    }
    return sigmoid(a * x);
}

template <typename Real>
struct LifStepResult {
    std::vector<Real> u;
    std::vector<Real> spikes;
    std::vector<Real> v;
};

/// One LIF update: charge, fire on U >= V_th, hard reset.
template <typename Real>
LifStepResult<Real> lif_step(std::span<const Real> v, std::span<const Real> x,
                             const LifConfig& cfg) {
    detail::require(v.size() == x.size(), ErrorCode::shape_mismatch,
                    "LIF state and input widths differ");
    const Real inv_tau = Real(1) / static_cast<Real>(cfg.tau);
    const Real vr = static_cast<Real>(cfg.v_reset), vth = static_cast<Real>(cfg.v_th);
    LifStepResult<Real> r{std::vector<Real>(v.size()), std::vector<Real>(v.size()),
                          std::vector<Real>(v.size())};
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(x[i])) detail::fail(ErrorCode::non_finite, "non-finite LIF input");
        const Real u = v[i] + inv_tau * (x[i] - v[i] + vr);
        const Real s = u >= vth ? Real(1) : Real(0);
        r.u[i] = u;
        r.spikes[i] = s;
        r.v[i] = u * (1 - s) + vr * s;
    }
    return r;
}

/// Fully connected layer. weight is input-major: weight[j * out + i] is the
/// synapse from input j to output i.
template <typename Real>
struct Layer {
    int in = 0;
    int out = 0;
    std::vector<Real> weight;
    std::vector<Real> bias;
    std::optional<LifConfig> lif;

    Real w(int j, int i) const { return weight[static_cast<std::size_t>(j) * out + i]; }
    Real& w(int j, int i) { return weight[static_cast<std::size_t>(j) * out + i]; }
};

template <typename Real>
struct SpikingMlp {
    std::vector<Layer<Real>> hidden;
    Layer<Real> readout;
    NeuronKind neuron = NeuronKind::lif;
    SurrogateConfig surrogate;
    SpikeFunction spike_fn = SpikeFunction::heaviside;

    int input_width() const { return hidden.empty() ? readout.in : hidden.front().in; }
    int output_width() const { return readout.out; }
    std::size_t layer_count() const { return hidden.size() + 1; }
    const Layer<Real>& layer(std::size_t i) const {
        return i < hidden.size() ? hidden[i] : readout;
    }
    Layer<Real>& layer(std::size_t i) { return i < hidden.size() ? hidden[i] : readout; }

    void validate() const {
        int width = input_width();
        for (std::size_t i = 0; i < layer_count(); ++i) {
            const auto& l = layer(i);
            detail::require(l.in == width, ErrorCode::shape_mismatch,
                            "adjacent layer widths are incompatible");
            detail::require(l.weight.size() == static_cast<std::size_t>(l.in) * l.out &&
                                l.bias.size() == static_cast<std::size_t>(l.out),
                            ErrorCode::shape_mismatch, "layer parameter size mismatch");
            if (l.lif) l.lif->validate();
            width = l.out;
        }
        detail::require(surrogate.alpha_sg > 0, ErrorCode::invalid_argument,
                        "alpha_sg must be positive");
    }

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases scaled by gain.
    template <typename Rng>
    static SpikingMlp create(int in, std::span<const int> hidden_widths, int out, Rng& rng,
                             LifConfig lif = {}, double gain = 1.0) {
        SpikingMlp mlp;
        auto make = [&](int fan_in, int fan_out, std::optional<LifConfig> cfg) {
            Layer<Real> l{fan_in, fan_out, {}, {}, cfg};
            const double bound = gain / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            l.weight.resize(static_cast<std::size_t>(fan_in) * fan_out);
            for (auto& w : l.weight) w = static_cast<Real>(dist(rng));
            l.bias.resize(static_cast<std::size_t>(fan_out));
            for (auto& b : l.bias) b = static_cast<Real>(dist(rng));
            return l;
        };
        int width = in;
        for (int h : hidden_widths) {
            mlp.hidden.push_back(make(width, h, lif));
            width = h;
        }
        mlp.readout = make(width, out, std::nullopt);
        return mlp;
    }
};

/// Dense [d0, d1, d2] array, last index fastest.
template <typename Real>
struct Tensor3 {
    int d0 = 0, d1 = 0, d2 = 0;
    std::vector<Real> data;

    Tensor3() = default;
    Tensor3(int a, int b, int c, Real fill = Real(0))
        : d0(a), d1(b), d2(c), data(static_cast<std::size_t>(a) * b * c, fill) {}

    std::size_t offset(int i, int j, int k = 0) const {
        return (static_cast<std::size_t>(i) * d1 + j) * d2 + k;
    }
    Real& operator()(int i, int j, int k) { return data[offset(i, j, k)]; }
    Real operator()(int i, int j, int k) const { return data[offset(i, j, k)]; }
    std::span<Real> row(int i, int j) { return {data.data() + offset(i, j), std::size_t(d2)}; }
    std::span<const Real> row(int i, int j) const {
        return {data.data() + offset(i, j), std::size_t(d2)};
    }
};

/// Per hidden layer firing totals over occupied slots.
struct SpikeRecord {
    std::vector<std::uint64_t> fired;
    std::vector<int> neurons;
    std::uint64_t occupied_slots = 0;
    bool recorded = false;
};

template <typename Real>
struct ForwardTape {
    int rays = 0, steps = 0, in_width = 0;
    /// Steps actually evaluated per ray (last occupied slot + 1).
    std::vector<int> extent;
    std::vector<std::uint8_t> occupancy;
    Tensor3<Real> input;
    /// Per hidden layer: membrane potential U (lif) or pre-activation.
    std::vector<Tensor3<Real>> pre;
    /// Per hidden layer: spikes S (lif) or post-activation.
    std::vector<Tensor3<Real>> act;
    Tensor3<Real> output;
    SpikeRecord record;
    bool has_state = false;
};

struct ForwardOptions {
    /// Keep per-step states for backward. Outputs and spike totals are
    /// always produced.
    bool keep_state = true;
};

namespace detail {

template <typename Real>
void affine(const Layer<Real>& l, const Real* h, Real* a) {
    std::copy(l.bias.begin(), l.bias.end(), a);
    const int out = l.out;
    for (int j = 0; j < l.in; ++j) {
        const Real hj = h[j];
        if (hj == Real(0)) continue;
        const Real* wj = l.weight.data() + static_cast<std::size_t>(j) * out;
        for (int i = 0; i < out; ++i) a[i] += hj * wj[i];
    }
}

/// Dot product with eight independent partial sums (vectorizes without
/// reassociation flags; the summation order is fixed).
template <typename Real>
Real dot(const Real* a, const Real* b, int n) {
    Real lane[8] = {};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int k = 0; k < 8; ++k) lane[k] += a[i + k] * b[i + k];
    Real acc = 0;
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc + ((lane[0] + lane[4]) + (lane[1] + lane[5])) +
           ((lane[2] + lane[6]) + (lane[3] + lane[7]));
}

inline std::vector<int> occupied_extent(int rays, int steps,
                                        std::span<const std::uint8_t> occupancy) {
    std::vector<int> ext(static_cast<std::size_t>(rays), steps);
    if (occupancy.empty()) return ext;
    for (int r = 0; r < rays; ++r) {
        int last = 0;
        for (int t = 0; t < steps; ++t) {
            if (occupancy[static_cast<std::size_t>(r) * steps + t]) last = t + 1;
        }
        ext[r] = last;
    }
    return ext;
}

} // namespace detail

/// Runs the network over [ray, time, channel] input. Membrane state starts
/// at zero for every ray and is carried only along that ray's time axis.
/// Slots after a ray's last occupied slot are skipped; their outputs are 0.
template <typename Real>
ForwardTape<Real> smlp_forward(const SpikingMlp<Real>& mlp, const Tensor3<Real>& input,
                               std::span<const std::uint8_t> occupancy,
                               ForwardOptions opts = {}) {
    detail::require(input.d2 == mlp.input_width(), ErrorCode::shape_mismatch,
                    "input channels do not match the network input width");
    detail::require(occupancy.empty() ||
                        occupancy.size() == static_cast<std::size_t>(input.d0) * input.d1,
                    ErrorCode::shape_mismatch, "occupancy shape mismatch");
    const int R = input.d0, T = input.d1;
    const std::size_t L = mlp.hidden.size();
    const int out_w = mlp.output_width();

    ForwardTape<Real> tape;
    tape.rays = R;
    tape.steps = T;
    tape.in_width = input.d2;
    tape.extent = detail::occupied_extent(R, T, occupancy);
    tape.occupancy.assign(occupancy.begin(), occupancy.end());
    tape.output = Tensor3<Real>(R, T, out_w);
    tape.has_state = opts.keep_state;
    tape.record.recorded = true;
    tape.record.fired.assign(L, 0);
    for (const auto& l : mlp.hidden) tape.record.neurons.push_back(l.out);
    if (opts.keep_state) {
        tape.input = input;
        for (const auto& l : mlp.hidden) {
            tape.pre.emplace_back(R, T, l.out);
            tape.act.emplace_back(R, T, l.out);
        }
    }

    int max_w = out_w;
    for (const auto& l : mlp.hidden) max_w = std::max(max_w, l.out);
    std::vector<std::vector<Real>> v(L), h(L);
    std::vector<Real> a(static_cast<std::size_t>(max_w));
    for (std::size_t l = 0; l < L; ++l) {
        v[l].resize(static_cast<std::size_t>(mlp.hidden[l].out));
        h[l].resize(static_cast<std::size_t>(mlp.hidden[l].out));
    }

    for (int r = 0; r < R; ++r) {
        for (auto& vl : v) std::fill(vl.begin(), vl.end(), Real(0));
        for (int t = 0; t < tape.extent[r]; ++t) {
            const bool occupied =
                occupancy.empty() || occupancy[static_cast<std::size_t>(r) * T + t];
            if (occupied) ++tape.record.occupied_slots;
            const Real* x = input.data.data() + input.offset(r, t);
            for (std::size_t l = 0; l < L; ++l) {
                const auto& layer = mlp.hidden[l];
                detail::affine(layer, x, a.data());
                Real* hl = h[l].data();
                Real* pre = opts.keep_state ? tape.pre[l].data.data() + tape.pre[l].offset(r, t)
                                            : nullptr;
                if (mlp.neuron == NeuronKind::lif) {
                    const LifConfig cfg = layer.lif.value_or(LifConfig{});
                    const Real inv_tau = Real(1) / static_cast<Real>(cfg.tau);
                    const Real vr = static_cast<Real>(cfg.v_reset);
                    const Real vth = static_cast<Real>(cfg.v_th);
                    Real* vl = v[l].data();
                    std::uint64_t fired = 0;
                    for (int i = 0; i < layer.out; ++i) {
                        const Real u = vl[i] + inv_tau * (a[i] - vl[i] + vr);
                        Real s;
                        if (mlp.spike_fn == SpikeFunction::heaviside) {
                            s = u >= vth ? Real(1) : Real(0);
                            fired += s != Real(0);
                        } else {
                            s = surrogate_primitive(u - vth, mlp.surrogate);
                        }
                        vl[i] = u * (1 - s) + vr * s;
                        hl[i] = s;
                        if (pre) pre[i] = u;
                    }
                    if (occupied) tape.record.fired[l] += fired;
                } else {
                    for (int i = 0; i < layer.out; ++i) {
                        hl[i] = mlp.neuron == NeuronKind::relu ? std::max(a[i], Real(0)) : a[i];
                        if (pre) pre[i] = a[i];
                    }
                }
                if (opts.keep_state) {
                    std::copy(hl, hl + layer.out,
                              tape.act[l].data.data() + tape.act[l].offset(r, t));
                }
                x = hl;
            }
            detail::affine(mlp.readout, x, a.data());
            Real* y = tape.output.data.data() + tape.output.offset(r, t);
            for (int i = 0; i < out_w; ++i) y[i] = sigmoid(a[i]);
        }
    }
    return tape;
}

/// Parameter gradients laid out like the network's layers (hidden..., readout).
template <typename Real>
struct MlpGradients {
    std::vector<std::vector<Real>> weight;
    std::vector<std::vector<Real>> bias;

    static MlpGradients zeros_like(const SpikingMlp<Real>& mlp) {
        MlpGradients g;
        for (std::size_t i = 0; i < mlp.layer_count(); ++i) {
            g.weight.emplace_back(mlp.layer(i).weight.size(), Real(0));
            g.bias.emplace_back(mlp.layer(i).bias.size(), Real(0));
        }
        return g;
    }
    void add(const MlpGradients& o) {
        for (std::size_t i = 0; i < weight.size(); ++i) {
            for (std::size_t k = 0; k < weight[i].size(); ++k) weight[i][k] += o.weight[i][k];
            for (std::size_t k = 0; k < bias[i].size(); ++k) bias[i][k] += o.bias[i][k];
        }
    }
    void set_zero() {
        for (auto& w : weight) std::fill(w.begin(), w.end(), Real(0));
        for (auto& b : bias) std::fill(b.begin(), b.end(), Real(0));
    }
};

/// Backpropagation through time. upstream is dL/d(output) shaped like
/// tape.output; gradients are accumulated into grads and, when given,
/// d_input (shaped like the input). Only the first d_input_channels input
/// channels receive gradients (all when negative).
template <typename Real>
void smlp_backward(const SpikingMlp<Real>& mlp, const ForwardTape<Real>& tape,
                   const Tensor3<Real>& upstream, MlpGradients<Real>& grads,
                   Tensor3<Real>* d_input = nullptr, int d_input_channels = -1) {
    detail::require(tape.has_state, ErrorCode::invalid_argument,
                    "backward needs a forward tape with recorded state");
    detail::require(upstream.d0 == tape.rays && upstream.d1 == tape.steps &&
                        upstream.d2 == mlp.output_width(),
                    ErrorCode::shape_mismatch, "upstream gradient shape mismatch");
    detail::require(grads.weight.size() == mlp.layer_count(), ErrorCode::shape_mismatch,
                    "gradient buffer does not match the network");
    if (d_input) {
        detail::require(d_input->d0 == tape.rays && d_input->d1 == tape.steps &&
                            d_input->d2 == tape.in_width,
                        ErrorCode::shape_mismatch, "input gradient shape mismatch");
    }
    const std::size_t L = mlp.hidden.size();
    const int out_w = mlp.output_width();
    const bool lif = mlp.neuron == NeuronKind::lif;
    const int d_width = d_input_channels < 0 ? tape.in_width
                                             : std::min(d_input_channels, tape.in_width);

    int max_w = std::max(out_w, tape.in_width);
    for (const auto& l : mlp.hidden) max_w = std::max(max_w, l.out);
    std::vector<std::vector<Real>> dv_carry(L);
    for (std::size_t l = 0; l < L; ++l) dv_carry[l].resize(std::size_t(mlp.hidden[l].out));
    std::vector<Real> dy(static_cast<std::size_t>(out_w));
    std::vector<Real> dh(static_cast<std::size_t>(max_w)), da(static_cast<std::size_t>(max_w));
    std::vector<Real> dx(static_cast<std::size_t>(tape.in_width));

    auto accumulate_layer = [&](std::size_t li, const Layer<Real>& layer, const Real* h,
                                const Real* d_pre, Real* d_h, int d_h_width) {
        auto& gw = grads.weight[li];
        auto& gb = grads.bias[li];
        const int out = layer.out;
        for (int i = 0; i < out; ++i) gb[i] += d_pre[i];
        for (int j = 0; j < layer.in; ++j) {
            const Real* wj = layer.weight.data() + static_cast<std::size_t>(j) * out;
            if (d_h && j < d_h_width) d_h[j] = detail::dot(wj, d_pre, out);
            const Real hj = h[j];
            if (hj == Real(0)) continue;
            Real* gwj = gw.data() + static_cast<std::size_t>(j) * out;
            for (int i = 0; i < out; ++i) gwj[i] += hj * d_pre[i];
        }
    };
    for (int r = 0; r < tape.rays; ++r) {
        for (auto& c : dv_carry) std::fill(c.begin(), c.end(), Real(0));
        for (int t = tape.extent[r] - 1; t >= 0; --t) {
            const Real* y = tape.output.data.data() + tape.output.offset(r, t);
            const Real* g = upstream.data.data() + upstream.offset(r, t);
            for (int i = 0; i < out_w; ++i) dy[i] = g[i] * y[i] * (1 - y[i]);
            const Real* x_top = L ? tape.act[L - 1].data.data() + tape.act[L - 1].offset(r, t)
                                  : tape.input.data.data() + tape.input.offset(r, t);
            Real* d_in_row =
                d_input ? d_input->data.data() + d_input->offset(r, t) : nullptr;
            if (L > 0) {
                accumulate_layer(L, mlp.readout, x_top, dy.data(), dh.data(), mlp.readout.in);
            } else {
                accumulate_layer(L, mlp.readout, x_top, dy.data(), d_in_row ? dx.data() : nullptr,
                                 d_width);
                if (d_in_row) {
                    for (int j = 0; j < d_width; ++j) d_in_row[j] += dx[j];
                }
            }
            for (std::size_t l = L; l-- > 0;) {
                const auto& layer = mlp.hidden[l];
                const Real* pre = tape.pre[l].data.data() + tape.pre[l].offset(r, t);
                const Real* act = tape.act[l].data.data() + tape.act[l].offset(r, t);
                if (lif) {
                    const LifConfig cfg = layer.lif.value_or(LifConfig{});
                    const Real inv_tau = Real(1) / static_cast<Real>(cfg.tau);
                    const Real vr = static_cast<Real>(cfg.v_reset);
                    const Real vth = static_cast<Real>(cfg.v_th);
                    Real* carry = dv_carry[l].data();
                    for (int i = 0; i < layer.out; ++i) {
                        const Real u = pre[i], s = act[i];
                        const Real sg = surrogate_derivative(u - vth, mlp.surrogate);
                        Real dv_du = 1 - s;
                        if (!mlp.surrogate.detach_reset) dv_du += (vr - u) * sg;
                        const Real du = dh[i] * sg + carry[i] * dv_du;
                        da[i] = du * inv_tau;
                        carry[i] = du * (1 - inv_tau);
                    }
                } else {
                    for (int i = 0; i < layer.out; ++i) {
                        const bool pass = mlp.neuron == NeuronKind::identity || pre[i] > 0;
                        da[i] = pass ? dh[i] : Real(0);
                    }
                }
                const Real* h_in = l ? tape.act[l - 1].data.data() + tape.act[l - 1].offset(r, t)
                                     : tape.input.data.data() + tape.input.offset(r, t);
                if (l > 0) {
                    accumulate_layer(l, layer, h_in, da.data(), dh.data(), layer.in);
                } else {
                    accumulate_layer(0, layer, h_in, da.data(), d_in_row ? dx.data() : nullptr,
                                     d_width);
                    if (d_in_row) {
                        for (int j = 0; j < d_width; ++j) d_in_row[j] += dx[j];
                    }
                }
            }
        }
    }
}

/// Sinusoidal embedding [v, sin(2^k v), cos(2^k v)] for k < freqs.
template <typename Real>
void view_embedding(Vec3<Real> dir, int freqs, std::span<Real> out) {
    detail::require(out.size() == static_cast<std::size_t>(3 + 6 * freqs),
                    ErrorCode::shape_mismatch, "view embedding width mismatch");
    std::size_t k = 0;
    for (int a = 0; a < 3; ++a) out[k++] = dir[a];
    for (int f = 0; f < freqs; ++f) {
        const Real scale = static_cast<Real>(1 << f);
        for (int a = 0; a < 3; ++a) out[k++] = std::sin(scale * dir[a]);
        for (int a = 0; a < 3; ++a) out[k++] = std::cos(scale * dir[a]);
    }
}

inline int view_embedding_width(int freqs) { return 3 + 6 * freqs; }

/// [batch, channel] -> [batch, T, channel] by duplication.
template <typename Real>
Tensor3<Real> direct_encode(std::span<const Real> x, int batch, int channels, int steps) {
    detail::require(steps >= 1, ErrorCode::invalid_argument, "time steps must be >= 1");
    detail::require(x.size() == static_cast<std::size_t>(batch) * channels,
                    ErrorCode::shape_mismatch, "input size != batch * channels");
    Tensor3<Real> out(batch, steps, channels);
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < steps; ++t) {
            std::copy_n(x.data() + static_cast<std::size_t>(b) * channels, channels,
                        out.data.data() + out.offset(b, t));
        }
    }
    return out;
}

/// Independent Bernoulli(x) draws per element and time step.
template <typename Real>
Tensor3<Real> poisson_encode(std::span<const Real> x, int batch, int channels, int steps,
                             std::uint64_t seed) {
    detail::require(steps >= 1, ErrorCode::invalid_argument, "time steps must be >= 1");
    detail::require(x.size() == static_cast<std::size_t>(batch) * channels,
                    ErrorCode::shape_mismatch, "input size != batch * channels");
    for (Real v : x) {
        if (!(v >= 0 && v <= 1)) detail::fail(ErrorCode::invalid_argument,
                                               "Poisson input outside [0,1]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor3<Real> out(batch, steps, channels);
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < steps; ++t) {
            for (int c = 0; c < channels; ++c) {
                const double p = static_cast<double>(x[static_cast<std::size_t>(b) * channels + c]);
                out(b, t, c) = unit(rng) < p ? Real(1) : Real(0);
            }
        }
    }
    return out;
}

/// Mean over the time axis: [batch, T, channel] -> [batch, channel].
template <typename Real>
std::vector<Real> mean_decode(const Tensor3<Real>& y) {
    detail::require(y.d1 >= 1, ErrorCode::invalid_argument, "time steps must be >= 1");
    std::vector<Real> out(static_cast<std::size_t>(y.d0) * y.d2, Real(0));
    for (int b = 0; b < y.d0; ++b) {
        for (int t = 0; t < y.d1; ++t) {
            for (int c = 0; c < y.d2; ++c) out[static_cast<std::size_t>(b) * y.d2 + c] += y(b, t, c);
        }
    }
    for (auto& v : out) v /= static_cast<Real>(y.d1);
    return out;
}

} // namespace spikenerf
