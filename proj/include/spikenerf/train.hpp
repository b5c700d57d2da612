#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "render.hpp"

namespace spikenerf {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

struct TrainConfig {
    int iterations = 5000;
    int batch_rays = 1024;
    double lr_grid = 0.1;
    double lr_mlp = 1e-3;
    /// Learning rates are multiplied by lr_decay^(iteration / iterations).
    double lr_decay = 0.1;
    AdamConfig adam;
    std::uint64_t seed = 42;
    int threads = 1;
    int eval_every = 500;
    int checkpoint_every = 0;

    void validate() const {
        detail::require(iterations >= 0 && batch_rays > 0, ErrorCode::invalid_argument,
                        "iterations must be >= 0 and batch_rays > 0");
        detail::require(lr_grid >= 0 && lr_mlp >= 0 && lr_decay > 0,
                        ErrorCode::invalid_argument, "learning rates must be non-negative");
        detail::require(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 &&
                            adam.eps > 0,
                        ErrorCode::invalid_argument, "invalid Adam hyperparameters");
    }
};

/// Adam moments for one flat parameter array.
template <typename Real>
struct AdamSlot {
    std::vector<Real> m, v;

    void step(std::span<Real> param, std::span<const Real> grad, double lr, const AdamConfig& c,
              std::int64_t t) {
        if (m.size() != param.size()) {
            m.assign(param.size(), Real(0));
            v.assign(param.size(), Real(0));
        }
        const double bc1 = 1.0 - std::pow(c.beta1, double(t));
        const double bc2 = 1.0 - std::pow(c.beta2, double(t));
        const Real step = static_cast<Real>(lr * std::sqrt(bc2) / bc1);
        const Real b1 = Real(c.beta1), b2 = Real(c.beta2), eps = Real(c.eps * std::sqrt(bc2));
        for (std::size_t i = 0; i < param.size(); ++i) {
            const Real g = grad[i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            param[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
        }
    }
};

template <typename Real>
struct OptimizerState {
    std::int64_t step = 0;
    AdamSlot<Real> density, features;
    std::vector<AdamSlot<Real>> weight, bias;
};

template <typename Real>
struct TrainBatch {
    std::vector<Ray<Real>> rays;
    std::vector<Real> target; // rays x 3
};

/// Forward, backward and one Adam update over a ray batch. Returns the
/// batch MSE measured before the update.
template <typename Real>
double train_step(Scene<Real>& scene, OptimizerState<Real>& opt, const TrainBatch<Real>& batch,
                  const RenderConfig<Real>& rcfg, const TrainConfig& tcfg, int iteration = 0) {
    const std::size_t R = batch.rays.size();
    detail::require(batch.target.size() == R * 3, ErrorCode::shape_mismatch,
                    "targets must be rays x 3");
    const int shards = std::max(1, std::min<int>(tcfg.threads, int(R)));
    std::vector<SceneGradients<Real>> grads;
    for (int s = 0; s < shards; ++s) grads.push_back(SceneGradients<Real>::zeros_like(scene));
    std::vector<Real> pred(R * 3);
    std::vector<double> shard_loss(static_cast<std::size_t>(shards), 0.0);

    RenderConfig<Real> cfg = rcfg;
    cfg.poisson_seed = rcfg.poisson_seed + static_cast<std::uint64_t>(iteration) * 7919u;
    parallel_for(std::size_t(shards), shards, [&](std::size_t s) {
        const std::size_t b = R * s / shards, e = R * (s + 1) / shards;
        std::span<const Ray<Real>> rays(batch.rays.data() + b, e - b);
        auto tape = render_chunk(scene, rays, cfg, true);
        std::vector<Real> d_rgb(tape.rgb.size());
        double loss = 0;
        for (std::size_t i = 0; i < tape.rgb.size(); ++i) {
            const double diff = double(tape.rgb[i]) - double(batch.target[b * 3 + i]);
            loss += diff * diff;
            d_rgb[i] = static_cast<Real>(2.0 * diff / double(R));
            pred[b * 3 + i] = tape.rgb[i];
        }
        shard_loss[s] = loss;
        backward_chunk(scene, tape, cfg, std::span<const Real>(d_rgb), grads[s]);
    });
    double loss = 0;
    for (double l : shard_loss) loss += l;
    loss /= double(std::max<std::size_t>(R, 1));
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at iteration " << iteration << " (batch of " << R << " rays)";
        detail::fail(ErrorCode::non_finite, msg.str());
    }
    for (int s = 1; s < shards; ++s) grads[0].add(grads[s]);
    const auto& g = grads[0];

    const double frac = tcfg.iterations > 0 ? double(iteration) / double(tcfg.iterations) : 0.0;
    const double decay = std::pow(tcfg.lr_decay, frac);
    const double lr_grid = tcfg.lr_grid * decay, lr_mlp = tcfg.lr_mlp * decay;
    if (lr_grid == 0.0 && lr_mlp == 0.0) return loss;

    ++opt.step;
    opt.density.step(scene.density.values, g.density.values, lr_grid, tcfg.adam, opt.step);
    opt.features.step(scene.features.values, g.features.values, lr_grid, tcfg.adam, opt.step);
    const std::size_t n_layers = scene.mlp.layer_count();
    opt.weight.resize(n_layers);
    opt.bias.resize(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
        auto& layer = scene.mlp.layer(i);
        opt.weight[i].step(layer.weight, g.mlp.weight[i], lr_mlp, tcfg.adam, opt.step);
        opt.bias[i].step(layer.bias, g.mlp.bias[i], lr_mlp, tcfg.adam, opt.step);
    }
    return loss;
}

struct TrainRecord {
    int iteration = 0;
    double loss = 0;
    double psnr = NAN; // held-out PSNR when evaluated at this iteration
};

template <typename Real>
struct TrainHooks {
    /// Held-out PSNR; called every eval_every iterations and at the end.
    std::function<double(const Scene<Real>&)> evaluate;
    /// Called every checkpoint_every iterations and at the end.
    std::function<void(const Scene<Real>&, int iteration)> checkpoint;
    std::function<void(const TrainRecord&)> progress;
    /// Ends training after this iteration when it returns true.
    std::function<bool(const TrainRecord&)> stop;
};

/// Random-batch training over a pool of rays with known colours.
template <typename Real>
std::vector<TrainRecord> train_loop(Scene<Real>& scene, const TrainBatch<Real>& dataset,
                                    const RenderConfig<Real>& rcfg, const TrainConfig& tcfg,
                                    const TrainHooks<Real>& hooks = {}, int start_iteration = 0) {
    tcfg.validate();
    rcfg.validate();
    detail::require(!dataset.rays.empty(), ErrorCode::invalid_argument, "dataset is empty");
    std::mt19937_64 rng(tcfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, dataset.rays.size() - 1);
    OptimizerState<Real> opt;
    std::vector<TrainRecord> history;
    TrainBatch<Real> batch;
    batch.rays.resize(static_cast<std::size_t>(tcfg.batch_rays));
    batch.target.resize(static_cast<std::size_t>(tcfg.batch_rays) * 3);
    for (int it = start_iteration; it < tcfg.iterations; ++it) {
        for (std::size_t i = 0; i < batch.rays.size(); ++i) {
            const std::size_t k = pick(rng);
            batch.rays[i] = dataset.rays[k];
            for (int c = 0; c < 3; ++c) batch.target[3 * i + c] = dataset.target[3 * k + c];
        }
        TrainRecord rec{it + 1, train_step(scene, opt, batch, rcfg, tcfg, it), NAN};
        const bool last = it + 1 == tcfg.iterations;
        if (hooks.evaluate && (last || (tcfg.eval_every > 0 && (it + 1) % tcfg.eval_every == 0)))
            rec.psnr = hooks.evaluate(scene);
        if (hooks.checkpoint &&
            (last || (tcfg.checkpoint_every > 0 && (it + 1) % tcfg.checkpoint_every == 0)))
            hooks.checkpoint(scene, it + 1);
        if (hooks.progress) hooks.progress(rec);
        history.push_back(rec);
        if (hooks.stop && hooks.stop(rec)) break;
    }
    return history;
}

} // namespace spikenerf
