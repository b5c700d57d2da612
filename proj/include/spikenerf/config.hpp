#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "energy.hpp"
#include "error.hpp"
#include "render.hpp"
#include "train.hpp"

namespace spikenerf {

/// Everything a run needs, mirrored one-to-one by the JSON config file:
///
///   { "model":  { grid_dims, feature_channels, hidden, view_freqs,
///                 density_activation, density_shift, tau, v_th, v_reset,
///                 alpha_sg, surrogate_form, detach_reset, neuron, init_gain,
///                 aabb },
///     "render": { lambda1, lambda2, step_size, max_samples, packing,
///                 sort_rays, flip, encoder, time_steps, background,
///                 chunk_size },
///     "train":  { iterations, batch_rays, lr_grid, lr_mlp, lr_decay,
///                 beta1, beta2, eps, eval_every, checkpoint_every },
///     "energy": { e_mac_pj, e_ac_pj },
///     "seed", "threads", "deterministic" }
///
/// Unknown keys are rejected.
struct RunConfig {
    SceneConfig model;
    Aabb<float> aabb{{-1, -1, -1}, {1, 1, 1}};
    bool aabb_set = false;
    RenderConfig<float> render;
    TrainConfig train;
    EnergyModel energy;
    std::uint64_t seed = 42;
    int threads = 1;
    bool deterministic = true;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
    if (!j.is_object()) fail(ErrorCode::config, where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            fail(ErrorCode::config,
                 "unknown config key: " + (where.empty() ? "" : where + ".") + it.key());
        }
    }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::config, "invalid value for config key: " + where + "." + key);
    }
}

} // namespace detail

inline PackingMode parse_packing(const std::string& s) {
    if (s == "tp") return PackingMode::tp;
    if (s == "tcp") return PackingMode::tcp;
    detail::fail(ErrorCode::config, "invalid packing '" + s + "' (expected tp|tcp)");
}

inline EncoderKind parse_encoder(const std::string& s) {
    if (s == "aligned") return EncoderKind::aligned;
    if (s == "direct") return EncoderKind::direct;
    if (s == "poisson") return EncoderKind::poisson;
    detail::fail(ErrorCode::config, "invalid encoder '" + s + "' (expected aligned|direct|poisson)");
}

inline NeuronKind parse_neuron(const std::string& s) {
    if (s == "lif") return NeuronKind::lif;
    if (s == "relu") return NeuronKind::relu;
    if (s == "identity") return NeuronKind::identity;
    detail::fail(ErrorCode::config, "invalid neuron '" + s + "' (expected lif|relu|identity)");
}

inline std::string to_string(PackingMode m) { return m == PackingMode::tp ? "tp" : "tcp"; }
inline std::string to_string(EncoderKind k) {
    return k == EncoderKind::aligned ? "aligned" : (k == EncoderKind::direct ? "direct" : "poisson");
}
inline std::string to_string(NeuronKind k) {
    return k == NeuronKind::lif ? "lif" : (k == NeuronKind::relu ? "relu" : "identity");
}

/// Applies the keys present in j on top of cfg.
inline void apply_config_json(const nlohmann::json& j, RunConfig& cfg) {
    using detail::read_key;
    detail::check_keys(j, "", {"model", "render", "train", "energy", "seed", "threads",
                               "deterministic"});
    if (j.contains("model")) {
        const auto& m = j["model"];
        detail::check_keys(m, "model",
                           {"grid_dims", "feature_channels", "hidden", "view_freqs",
                            "density_activation", "density_shift", "tau", "v_th", "v_reset",
                            "alpha_sg", "surrogate_form", "detach_reset", "neuron", "init_gain",
                            "aabb"});
        if (m.contains("grid_dims")) {
            std::array<int, 3> d{};
            read_key(m, "grid_dims", d, "model");
            cfg.model.dims = {d[0], d[1], d[2]};
        }
        read_key(m, "feature_channels", cfg.model.feature_channels, "model");
        read_key(m, "hidden", cfg.model.hidden, "model");
        read_key(m, "view_freqs", cfg.model.view_freqs, "model");
        if (m.contains("density_activation")) {
            std::string a;
            read_key(m, "density_activation", a, "model");
            if (a == "relu") cfg.model.activation.kind = DensityActivationKind::relu;
            else if (a == "shifted_softplus")
                cfg.model.activation.kind = DensityActivationKind::shifted_softplus;
            else detail::fail(ErrorCode::config, "invalid value for config key: model.density_activation");
        }
        read_key(m, "density_shift", cfg.model.activation.shift, "model");
        read_key(m, "tau", cfg.model.lif.tau, "model");
        read_key(m, "v_th", cfg.model.lif.v_th, "model");
        read_key(m, "v_reset", cfg.model.lif.v_reset, "model");
        read_key(m, "alpha_sg", cfg.model.surrogate.alpha_sg, "model");
        if (m.contains("surrogate_form")) {
            std::string f;
            read_key(m, "surrogate_form", f, "model");
            if (f == "paper_eq12") cfg.model.surrogate.form = SurrogateForm::paper_eq12;
            else if (f == "sigmoid_derivative")
                cfg.model.surrogate.form = SurrogateForm::sigmoid_derivative;
            else detail::fail(ErrorCode::config, "invalid value for config key: model.surrogate_form");
        }
        read_key(m, "detach_reset", cfg.model.surrogate.detach_reset, "model");
        if (m.contains("neuron")) {
            std::string n;
            read_key(m, "neuron", n, "model");
            cfg.model.neuron = parse_neuron(n);
        }
        read_key(m, "init_gain", cfg.model.mlp_init_gain, "model");
        if (m.contains("aabb")) {
            std::array<std::array<float, 3>, 2> b{};
            read_key(m, "aabb", b, "model");
            cfg.aabb = {{b[0][0], b[0][1], b[0][2]}, {b[1][0], b[1][1], b[1][2]}};
            cfg.aabb_set = true;
        }
    }
    if (j.contains("render")) {
        const auto& r = j["render"];
        detail::check_keys(r, "render",
                           {"lambda1", "lambda2", "step_size", "max_samples", "packing",
                            "sort_rays", "flip", "encoder", "time_steps", "background",
                            "chunk_size"});
        read_key(r, "lambda1", cfg.render.lambda.transmittance, "render");
        read_key(r, "lambda2", cfg.render.lambda.alpha, "render");
        read_key(r, "step_size", cfg.render.step_size, "render");
        read_key(r, "max_samples", cfg.render.max_samples, "render");
        if (r.contains("packing")) {
            std::string p;
            read_key(r, "packing", p, "render");
            cfg.render.packing = parse_packing(p);
        }
        read_key(r, "sort_rays", cfg.render.sort_rays, "render");
        read_key(r, "flip", cfg.render.flip, "render");
        if (r.contains("encoder")) {
            std::string e;
            read_key(r, "encoder", e, "render");
            cfg.render.encoder.kind = parse_encoder(e);
        }
        read_key(r, "time_steps", cfg.render.encoder.steps, "render");
        if (r.contains("background")) {
            std::array<float, 3> bg{};
            read_key(r, "background", bg, "render");
            cfg.render.background = {bg[0], bg[1], bg[2]};
        }
        read_key(r, "chunk_size", cfg.render.chunk_size, "render");
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        detail::check_keys(t, "train",
                           {"iterations", "batch_rays", "lr_grid", "lr_mlp", "lr_decay", "beta1",
                            "beta2", "eps", "eval_every", "checkpoint_every"});
        read_key(t, "iterations", cfg.train.iterations, "train");
        read_key(t, "batch_rays", cfg.train.batch_rays, "train");
        read_key(t, "lr_grid", cfg.train.lr_grid, "train");
        read_key(t, "lr_mlp", cfg.train.lr_mlp, "train");
        read_key(t, "lr_decay", cfg.train.lr_decay, "train");
        read_key(t, "beta1", cfg.train.adam.beta1, "train");
        read_key(t, "beta2", cfg.train.adam.beta2, "train");
        read_key(t, "eps", cfg.train.adam.eps, "train");
        read_key(t, "eval_every", cfg.train.eval_every, "train");
        read_key(t, "checkpoint_every", cfg.train.checkpoint_every, "train");
    }
    if (j.contains("energy")) {
        const auto& e = j["energy"];
        detail::check_keys(e, "energy", {"e_mac_pj", "e_ac_pj"});
        double mac = cfg.energy.e_mac * 1e12, ac = cfg.energy.e_ac * 1e12;
        read_key(e, "e_mac_pj", mac, "energy");
        read_key(e, "e_ac_pj", ac, "energy");
        cfg.energy.e_mac = mac * 1e-12;
        cfg.energy.e_ac = ac * 1e-12;
    }
    read_key(j, "seed", cfg.seed, "");
    read_key(j, "threads", cfg.threads, "");
    read_key(j, "deterministic", cfg.deterministic, "");
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    const auto& m = c.model;
    j["model"] = {
        {"grid_dims", {m.dims.nx, m.dims.ny, m.dims.nz}},
        {"feature_channels", m.feature_channels},
        {"hidden", m.hidden},
        {"view_freqs", m.view_freqs},
        {"density_activation",
         m.activation.kind == DensityActivationKind::relu ? "relu" : "shifted_softplus"},
        {"density_shift", m.activation.shift},
        {"tau", m.lif.tau},
        {"v_th", m.lif.v_th},
        {"v_reset", m.lif.v_reset},
        {"alpha_sg", m.surrogate.alpha_sg},
        {"surrogate_form",
         m.surrogate.form == SurrogateForm::paper_eq12 ? "paper_eq12" : "sigmoid_derivative"},
        {"detach_reset", m.surrogate.detach_reset},
        {"neuron", to_string(m.neuron)},
        {"init_gain", m.mlp_init_gain},
        {"aabb",
         {{c.aabb.min_corner.x, c.aabb.min_corner.y, c.aabb.min_corner.z},
          {c.aabb.max_corner.x, c.aabb.max_corner.y, c.aabb.max_corner.z}}},
    };
    const auto& r = c.render;
    j["render"] = {
        {"lambda1", r.lambda.transmittance},
        {"lambda2", r.lambda.alpha},
        {"step_size", r.step_size},
        {"max_samples", r.max_samples},
        {"packing", to_string(r.packing)},
        {"sort_rays", r.sort_rays},
        {"flip", r.flip},
        {"encoder", to_string(r.encoder.kind)},
        {"time_steps", r.encoder.steps},
        {"background", {r.background.x, r.background.y, r.background.z}},
        {"chunk_size", r.chunk_size},
    };
    const auto& t = c.train;
    j["train"] = {
        {"iterations", t.iterations},     {"batch_rays", t.batch_rays},
        {"lr_grid", t.lr_grid},           {"lr_mlp", t.lr_mlp},
        {"lr_decay", t.lr_decay},         {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},          {"eps", t.adam.eps},
        {"eval_every", t.eval_every},     {"checkpoint_every", t.checkpoint_every},
    };
    j["energy"] = {{"e_mac_pj", c.energy.e_mac * 1e12}, {"e_ac_pj", c.energy.e_ac * 1e12}};
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["deterministic"] = c.deterministic;
    return j;
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) detail::fail(ErrorCode::config, "cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        detail::fail(ErrorCode::config, "malformed config " + path.string() + ": " + e.what());
    }
    apply_config_json(j, base);
    return base;
}

} // namespace spikenerf
