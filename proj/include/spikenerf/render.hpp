#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "pack.hpp"
#include "parallel.hpp"
#include "rays.hpp"
#include "snn.hpp"

namespace spikenerf {

enum class EncoderKind {
    aligned, // one sample per time step along the ray
    direct,  // each sample duplicated over T steps, mean-decoded
    poisson, // each sample Bernoulli-encoded over T steps, mean-decoded
};

struct EncoderConfig {
    EncoderKind kind = EncoderKind::aligned;
    int steps = 1; // T for direct / poisson
};

template <typename Real>
struct RenderConfig {
    MaskThresholds<Real> lambda;
    /// World-unit march step; 0 selects half the density voxel edge.
    Real step_size = 0;
    std::size_t max_samples = 0;
    PackingMode packing = PackingMode::tcp;
    bool sort_rays = false;
    bool flip = false;
    EncoderConfig encoder;
    Vec3<Real> background{1, 1, 1};
    int chunk_size = 4096;
    std::uint64_t poisson_seed = 42;

    void validate() const {
        detail::require(lambda.transmittance >= 0 && lambda.alpha >= 0,
                        ErrorCode::invalid_argument, "mask thresholds must be >= 0");
        detail::require(step_size >= 0, ErrorCode::invalid_argument, "step_size must be >= 0");
        detail::require(encoder.kind == EncoderKind::aligned || encoder.steps >= 1,
                        ErrorCode::invalid_argument, "time steps must be >= 1");
        detail::require(chunk_size >= 1, ErrorCode::invalid_argument, "chunk_size must be >= 1");
    }
};

struct SceneConfig {
    GridDims dims{32, 32, 32};
    int feature_channels = 12;
    std::vector<int> hidden{64, 64};
    int view_freqs = 4;
    DensityActivation activation;
    LifConfig lif;
    SurrogateConfig surrogate;
    NeuronKind neuron = NeuronKind::lif;
    double mlp_init_gain = 0.5;
};

/// Explicit grids plus the colour network queried per surviving sample.
template <typename Real>
struct Scene {
    DensityGrid<Real> density;
    FeatureGrid<Real> features;
    SpikingMlp<Real> mlp;
    int view_freqs = 4;

    int input_width() const { return features.channels + view_embedding_width(view_freqs); }

    template <typename Rng>
    static Scene create(const SceneConfig& cfg, const Aabb<Real>& aabb, Rng& rng) {
        Scene s;
        s.density = DensityGrid<Real>(cfg.dims, aabb, cfg.activation);
        s.features = FeatureGrid<Real>(cfg.dims, cfg.feature_channels, aabb);
        init_feature_grid(s.features, rng);
        s.view_freqs = cfg.view_freqs;
        s.mlp = SpikingMlp<Real>::create(s.input_width(), cfg.hidden, 3, rng, cfg.lif,
                                         cfg.mlp_init_gain);
        s.mlp.neuron = cfg.neuron;
        s.mlp.surrogate = cfg.surrogate;
        return s;
    }

    void validate() const {
        detail::require(density.channels == 1,
                        ErrorCode::shape_mismatch, "density grid must have one channel");
        detail::require(mlp.input_width() == input_width(), ErrorCode::shape_mismatch,
                        "network input width does not match features + view embedding");
        detail::require(mlp.output_width() == 3, ErrorCode::shape_mismatch,
                        "network must output RGB");
        mlp.validate();
    }
};

template <typename Real>
Real default_step_size(const Scene<Real>& scene, const RenderConfig<Real>& cfg) {
    return cfg.step_size > 0 ? cfg.step_size : scene.density.voxel_size() * Real(0.5);
}

/// Sum of weighted colours plus background times leftover transmittance.
template <typename Real>
Vec3<Real> composite(std::span<const Real> colors, std::span<const Real> weights,
                     Vec3<Real> background, Real leftover) {
    detail::require(colors.size() == weights.size() * 3, ErrorCode::shape_mismatch,
                    "colors must be weights x 3");
    Vec3<Real> c = background * leftover;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        c.x += weights[i] * colors[3 * i];
        c.y += weights[i] * colors[3 * i + 1];
        c.z += weights[i] * colors[3 * i + 2];
    }
    return c;
}

/// Mean squared colour error per ray: (1/|R|) sum ||pred - target||^2.
template <typename Real>
double mse_loss(std::span<const Real> pred, std::span<const Real> target) {
    detail::require(pred.size() == target.size() && pred.size() % 3 == 0,
                    ErrorCode::shape_mismatch, "prediction and target shapes differ");
    if (pred.empty()) return 0.0;
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pred[i]) - double(target[i]);
        acc += d * d;
    }
    return acc / double(pred.size() / 3);
}

/// Everything the forward pass of one chunk produces, kept for backward.
template <typename Real>
struct ChunkTape {
    std::vector<Ray<Real>> rays;
    std::vector<std::size_t> sample_offset; // per ray, into the flat arrays
    std::vector<Vec3<Real>> positions;
    std::vector<Real> deltas;
    std::vector<Real> raw_density;
    std::vector<Real> alphas;
    std::vector<Real> trans;
    std::vector<Real> leftover;             // per ray
    MaskedSamples<Real> masked;
    std::vector<std::size_t> survivor_offset; // per ray, into survivor arrays
    std::vector<Real> inputs;               // survivors x input width
    PackedBatch<Real> packed;               // aligned mode only
    Tensor3<Real> encoded;                  // direct / poisson mode only
    ForwardTape<Real> mlp_tape;
    std::vector<Real> colors;               // survivors x 3
    std::vector<Real> rgb;                  // rays x 3
};

template <typename Real>
struct SceneGradients {
    GridGradient<Real> density;
    GridGradient<Real> features;
    MlpGradients<Real> mlp;

    static SceneGradients zeros_like(const Scene<Real>& s) {
        return {s.density.zeros_like(), s.features.zeros_like(),
                MlpGradients<Real>::zeros_like(s.mlp)};
    }
    void set_zero() {
        std::fill(density.values.begin(), density.values.end(), Real(0));
        std::fill(features.values.begin(), features.values.end(), Real(0));
        mlp.set_zero();
    }
    void add(const SceneGradients& o) {
        for (std::size_t i = 0; i < density.values.size(); ++i) density.values[i] += o.density.values[i];
        for (std::size_t i = 0; i < features.values.size(); ++i) features.values[i] += o.features.values[i];
        mlp.add(o.mlp);
    }
};

namespace detail {

/// Probability fed to the Bernoulli encoder for a real-valued input.
template <typename Real>
Real poisson_probability(Real x) { return sigmoid(x); }

} // namespace detail

/// Sampling, weighing, masking, feature query, packing, network query and
/// compositing for one batch of rays.
template <typename Real>
ChunkTape<Real> render_chunk(const Scene<Real>& scene, std::span<const Ray<Real>> rays,
                             const RenderConfig<Real>& cfg, bool keep_state = false) {
    ChunkTape<Real> tape;
    tape.rays.assign(rays.begin(), rays.end());
    const std::size_t R = rays.size();
    const Real step = default_step_size(scene, cfg);
    const Aabb<Real>& box = scene.density.aabb;
    tape.sample_offset.assign(R + 1, 0);
    tape.leftover.assign(R, Real(1));
    tape.masked.rays.resize(R);
    tape.survivor_offset.assign(R + 1, 0);

    std::vector<Real> t_buf;
    for (std::size_t r = 0; r < R; ++r) {
        auto samples = sample_along_ray(rays[r], box, step, cfg.max_samples);
        const std::size_t K = samples.count();
        const std::size_t base = tape.positions.size();
        tape.sample_offset[r + 1] = base + K;
        std::vector<Real> alpha(K);
        for (std::size_t k = 0; k < K; ++k) {
            const Real raw = interp_density(scene.density, samples.positions[k]);
            const Real sigma = activate_density(raw, scene.density.activation);
            tape.raw_density.push_back(raw);
            alpha[k] = compute_alpha(sigma, samples.deltas[k]);
        }
        t_buf = compute_transmittance<Real>(alpha);
        tape.leftover[r] = t_buf[K];
        tape.masked.rays[r] = apply_mask<Real>(samples, alpha, t_buf, cfg.lambda);
        tape.survivor_offset[r + 1] = tape.survivor_offset[r] + tape.masked.rays[r].count();
        tape.positions.insert(tape.positions.end(), samples.positions.begin(),
                              samples.positions.end());
        tape.deltas.insert(tape.deltas.end(), samples.deltas.begin(), samples.deltas.end());
        tape.alphas.insert(tape.alphas.end(), alpha.begin(), alpha.end());
        tape.trans.insert(tape.trans.end(), t_buf.begin(), t_buf.begin() + K);
    }

    const std::size_t S = tape.survivor_offset[R];
    const int C = scene.input_width();
    const int ce = scene.features.channels;
    tape.inputs.assign(S * C, Real(0));
    for (std::size_t r = 0; r < R; ++r) {
        const auto& m = tape.masked.rays[r];
        if (m.count() == 0) continue;
        std::vector<Real> view(static_cast<std::size_t>(C - ce));
        view_embedding(rays[r].direction, scene.view_freqs, std::span<Real>(view));
        for (std::size_t k = 0; k < m.count(); ++k) {
            Real* row = tape.inputs.data() + (tape.survivor_offset[r] + k) * C;
            interp_feature(scene.features, m.positions[k], std::span<Real>(row, ce));
            std::copy(view.begin(), view.end(), row + ce);
        }
    }

    ForwardOptions opts{keep_state};
    if (cfg.encoder.kind == EncoderKind::aligned) {
        tape.packed = pack<Real>(tape.masked, tape.inputs, C, cfg.packing, cfg.sort_rays);
        if (cfg.flip) tape.packed = temporal_flip(tape.packed);
        tape.mlp_tape = smlp_forward(scene.mlp, tape.packed.data, tape.packed.occupancy, opts);
        tape.colors = unpack_scatter(tape.mlp_tape.output, tape.packed);
    } else {
        const int T = cfg.encoder.steps;
        if (cfg.encoder.kind == EncoderKind::direct) {
            tape.encoded = direct_encode<Real>(tape.inputs, int(S), C, T);
        } else {
            std::vector<Real> prob(tape.inputs.size());
            for (std::size_t i = 0; i < prob.size(); ++i)
                prob[i] = detail::poisson_probability(tape.inputs[i]);
            tape.encoded = poisson_encode<Real>(prob, int(S), C, T, cfg.poisson_seed);
        }
        tape.mlp_tape = smlp_forward(scene.mlp, tape.encoded, {}, opts);
        tape.colors = mean_decode(tape.mlp_tape.output);
    }

    tape.rgb.assign(R * 3, Real(0));
    std::vector<Real> w;
    for (std::size_t r = 0; r < R; ++r) {
        const auto& m = tape.masked.rays[r];
        w.resize(m.count());
        for (std::size_t k = 0; k < m.count(); ++k) w[k] = m.transmittances[k] * m.alphas[k];
        auto c = composite<Real>(
            std::span<const Real>(tape.colors.data() + tape.survivor_offset[r] * 3, m.count() * 3),
            w, cfg.background, tape.leftover[r]);
        tape.rgb[3 * r] = c.x;
        tape.rgb[3 * r + 1] = c.y;
        tape.rgb[3 * r + 2] = c.z;
    }
    return tape;
}

/// Reverse pass of render_chunk given dL/d(rgb); accumulates into grads.
/// The survivor set is treated as fixed.
template <typename Real>
void backward_chunk(const Scene<Real>& scene, const ChunkTape<Real>& tape,
                    const RenderConfig<Real>& cfg, std::span<const Real> d_rgb,
                    SceneGradients<Real>& grads) {
    const std::size_t R = tape.rays.size();
    detail::require(d_rgb.size() == R * 3, ErrorCode::shape_mismatch,
                    "rgb gradient must be rays x 3");
    const std::size_t S = tape.survivor_offset[R];
    const int C = scene.input_width();
    const int ce = scene.features.channels;

    // Colour path.
    std::vector<Real> d_colors(S * 3, Real(0));
    for (std::size_t r = 0; r < R; ++r) {
        const auto& m = tape.masked.rays[r];
        for (std::size_t k = 0; k < m.count(); ++k) {
            const Real w = m.transmittances[k] * m.alphas[k];
            for (int c = 0; c < 3; ++c)
                d_colors[(tape.survivor_offset[r] + k) * 3 + c] = w * d_rgb[3 * r + c];
        }
    }
    std::vector<Real> d_inputs(S * C, Real(0));
    if (S > 0) {
        if (cfg.encoder.kind == EncoderKind::aligned) {
            auto upstream = scatter_to_packed<Real>(d_colors, 3, tape.packed);
            Tensor3<Real> d_packed(tape.packed.rays(), tape.packed.steps(), C);
            smlp_backward(scene.mlp, tape.mlp_tape, upstream, grads.mlp, &d_packed, ce);
            d_inputs = unpack_scatter(d_packed, tape.packed);
        } else {
            const int T = cfg.encoder.steps;
            Tensor3<Real> upstream(int(S), T, 3);
            for (std::size_t s = 0; s < S; ++s)
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < 3; ++c)
                        upstream(int(s), t, c) = d_colors[s * 3 + c] / Real(T);
            Tensor3<Real> d_enc(int(S), T, C);
            smlp_backward(scene.mlp, tape.mlp_tape, upstream, grads.mlp, &d_enc, ce);
            for (std::size_t s = 0; s < S; ++s) {
                for (int t = 0; t < T; ++t) {
                    for (int c = 0; c < C; ++c) d_inputs[s * C + c] += d_enc(int(s), t, c);
                }
            }
            if (cfg.encoder.kind == EncoderKind::poisson) {
                // Straight-through: d spike / d probability = 1.
                for (std::size_t i = 0; i < d_inputs.size(); ++i) {
                    const Real p = detail::poisson_probability(tape.inputs[i]);
                    d_inputs[i] *= p * (1 - p);
                }
            }
        }
    }
    for (std::size_t r = 0; r < R; ++r) {
        const auto& m = tape.masked.rays[r];
        for (std::size_t k = 0; k < m.count(); ++k) {
            const Real* g = d_inputs.data() + (tape.survivor_offset[r] + k) * C;
            interp_backward(scene.features, m.positions[k], std::span<const Real>(g, ce),
                            grads.features);
        }
    }

    // Density path: weights T_k alpha_k and the leftover background term.
    std::vector<Real> g_col;
    for (std::size_t r = 0; r < R; ++r) {
        const std::size_t b = tape.sample_offset[r], e = tape.sample_offset[r + 1];
        const std::size_t K = e - b;
        if (K == 0) continue;
        g_col.assign(K, Real(0));
        const auto& m = tape.masked.rays[r];
        for (std::size_t k = 0; k < m.count(); ++k) {
            const Real* c = tape.colors.data() + (tape.survivor_offset[r] + k) * 3;
            g_col[m.indices[k]] = c[0] * d_rgb[3 * r] + c[1] * d_rgb[3 * r + 1] +
                                  c[2] * d_rgb[3 * r + 2];
        }
        Real suffix = cfg.background.x * d_rgb[3 * r] + cfg.background.y * d_rgb[3 * r + 1] +
                      cfg.background.z * d_rgb[3 * r + 2];
        for (std::size_t k = K; k-- > 0;) {
            const Real a = tape.alphas[b + k];
            const Real d_alpha = tape.trans[b + k] * (g_col[k] - suffix);
            suffix = g_col[k] * a + (1 - a) * suffix;
            const Real raw = tape.raw_density[b + k];
            const Real d_raw = d_alpha * tape.deltas[b + k] * (1 - a) *
                               activate_density_grad(raw, scene.density.activation);
            if (d_raw != Real(0)) {
                interp_backward<Real>(scene.density, tape.positions[b + k],
                                      std::span<const Real>(&d_raw, 1), grads.density);
            }
        }
    }
}

/// Aggregate result of rendering many rays in chunks.
template <typename Real>
struct RenderResult {
    std::vector<Real> rgb; // rays x 3
    std::size_t queried_samples = 0;
    SpikeRecord spikes;
    std::vector<OccupancyStats> chunk_occupancy; // aligned mode only
};

inline void merge_spike_record(SpikeRecord& into, const SpikeRecord& from) {
    if (!from.recorded) return;
    if (!into.recorded) {
        into = from;
        return;
    }
    for (std::size_t l = 0; l < into.fired.size(); ++l) into.fired[l] += from.fired[l];
    into.occupied_slots += from.occupied_slots;
}

template <typename Real>
RenderResult<Real> render_rays(const Scene<Real>& scene, std::span<const Ray<Real>> rays,
                               const RenderConfig<Real>& cfg, int threads = 1) {
    cfg.validate();
    const std::size_t R = rays.size();
    const std::size_t chunk = static_cast<std::size_t>(cfg.chunk_size);
    const std::size_t n_chunks = (R + chunk - 1) / chunk;
    std::vector<ChunkTape<Real>> tapes(n_chunks);
    parallel_for(n_chunks, threads, [&](std::size_t i) {
        const std::size_t b = i * chunk, e = std::min(R, b + chunk);
        tapes[i] = render_chunk(scene, rays.subspan(b, e - b), cfg, false);
    });
    RenderResult<Real> out;
    out.rgb.reserve(R * 3);
    for (auto& t : tapes) {
        out.rgb.insert(out.rgb.end(), t.rgb.begin(), t.rgb.end());
        out.queried_samples += t.masked.survivor_count();
        merge_spike_record(out.spikes, t.mlp_tape.record);
        if (cfg.encoder.kind == EncoderKind::aligned)
            out.chunk_occupancy.push_back(occupancy_stats(t.packed));
    }
    return out;
}

/// Renders an analytic field through the same sampling, opacity and
/// compositing path, bypassing grids and network. field(p, sigma, rgb).
template <typename Real, typename Field>
Vec3<Real> render_field(const Ray<Real>& ray, const Aabb<Real>& box, Real step, Field&& field,
                        Vec3<Real> background) {
    auto samples = sample_along_ray(ray, box, step);
    const std::size_t K = samples.count();
    std::vector<Real> alpha(K), colors(3 * K);
    for (std::size_t k = 0; k < K; ++k) {
        Real sigma = 0;
        Vec3<Real> rgb{};
        field(samples.positions[k], sigma, rgb);
        alpha[k] = compute_alpha(sigma, samples.deltas[k]);
        colors[3 * k] = rgb.x;
        colors[3 * k + 1] = rgb.y;
        colors[3 * k + 2] = rgb.z;
    }
    auto t = compute_transmittance<Real>(alpha);
    std::vector<Real> w(K);
    for (std::size_t k = 0; k < K; ++k) w[k] = t[k] * alpha[k];
    return composite<Real>(colors, w, background, t[K]);
}

} // namespace spikenerf
