#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "snn.hpp"

namespace spikenerf {

/// Per-operation energy. Defaults are the commonly quoted 45 nm CMOS
/// figures for 32-bit float MAC (4.6 pJ) and AC (0.9 pJ).
struct EnergyModel {
    double e_mac = 4.6e-12;
    double e_ac = 0.9e-12;

    void validate() const {
        detail::require(e_mac > e_ac && e_ac > 0, ErrorCode::invalid_argument,
                        "energy model requires e_mac > e_ac > 0");
    }
};

struct LayerOps {
    std::uint64_t macs = 0;
    std::uint64_t synaptic_acs = 0;
    std::uint64_t bias_acs = 0;
};

struct OpCount {
    std::uint64_t macs = 0;
    std::uint64_t acs = 0;
    std::vector<LayerOps> layers;
    std::vector<double> spike_rates; // per hidden layer
};

struct SpikeRates {
    std::vector<double> rates;
    bool no_occupied_slots = false;
};

/// fired / (neurons x occupied slots) per hidden layer.
inline SpikeRates measure_spike_rate(const SpikeRecord& rec) {
    detail::require(rec.recorded, ErrorCode::invalid_argument, "no spike record");
    SpikeRates out;
    out.no_occupied_slots = rec.occupied_slots == 0;
    for (std::size_t l = 0; l < rec.fired.size(); ++l) {
        const double denom = double(rec.neurons[l]) * double(rec.occupied_slots);
        out.rates.push_back(denom > 0 ? double(rec.fired[l]) / denom : 0.0);
    }
    return out;
}

/// Rebuilds the firing totals from a tape that kept its spike trains.
template <typename Real>
SpikeRecord summarize_spikes(const ForwardTape<Real>& tape) {
    detail::require(tape.has_state, ErrorCode::invalid_argument,
                    "tape does not hold spike trains");
    SpikeRecord rec;
    rec.recorded = true;
    for (const auto& a : tape.act) rec.neurons.push_back(a.d2);
    rec.fired.assign(tape.act.size(), 0);
    for (int r = 0; r < tape.rays; ++r) {
        for (int t = 0; t < tape.extent[r]; ++t) {
            const bool occ = tape.occupancy.empty() ||
                             tape.occupancy[static_cast<std::size_t>(r) * tape.steps + t];
            if (!occ) continue;
            ++rec.occupied_slots;
            for (std::size_t l = 0; l < tape.act.size(); ++l) {
                for (int i = 0; i < tape.act[l].d2; ++i)
                    rec.fired[l] += tape.act[l](r, t, i) != Real(0);
            }
        }
    }
    return rec;
}

/// Spike-driven operation count. The first layer sees real-valued input and
/// costs in x out MACs per occupied slot; every later layer costs one AC per
/// (incoming spike, output neuron) plus one AC per output bias.
template <typename Real>
OpCount count_ops_snn(const SpikingMlp<Real>& mlp, const SpikeRecord& rec) {
    detail::require(rec.recorded, ErrorCode::invalid_argument, "missing spike record");
    detail::require(rec.fired.size() == mlp.hidden.size(), ErrorCode::shape_mismatch,
                    "spike record does not match the network");
    OpCount c;
    c.spike_rates = measure_spike_rate(rec).rates;
    const std::uint64_t slots = rec.occupied_slots;
    for (std::size_t i = 0; i < mlp.layer_count(); ++i) {
        const auto& l = mlp.layer(i);
        LayerOps ops;
        if (i == 0) {
            ops.macs = slots * std::uint64_t(l.in) * std::uint64_t(l.out);
        } else {
            ops.synaptic_acs = rec.fired[i - 1] * std::uint64_t(l.out);
            ops.bias_acs = slots * std::uint64_t(l.out);
        }
        c.macs += ops.macs;
        c.acs += ops.synaptic_acs + ops.bias_acs;
        c.layers.push_back(ops);
    }
    return c;
}

/// Conventional dense evaluation: one MAC per synapse per queried sample.
template <typename Real>
OpCount count_ops_ann(const SpikingMlp<Real>& mlp, std::uint64_t samples) {
    OpCount c;
    for (std::size_t i = 0; i < mlp.layer_count(); ++i) {
        const auto& l = mlp.layer(i);
        LayerOps ops;
        ops.macs = samples * std::uint64_t(l.in) * std::uint64_t(l.out);
        c.macs += ops.macs;
        c.layers.push_back(ops);
    }
    return c;
}

inline double estimate_energy(const OpCount& c, const EnergyModel& m) {
    return double(c.macs) * m.e_mac + double(c.acs) * m.e_ac;
}

struct EnergyReport {
    OpCount snn;
    OpCount ann;
    EnergyModel model;
    double ann_energy_j = 0;
    double snn_energy_j = 0;
    double ratio = 0;
    std::string scene;
    std::string config;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["macs"] = snn.macs;
        j["acs"] = snn.acs;
        j["spike_rates"] = snn.spike_rates;
        j["e_mac_pj"] = model.e_mac * 1e12;
        j["e_ac_pj"] = model.e_ac * 1e12;
        j["ann_mj"] = ann_energy_j * 1e3;
        j["snn_mj"] = snn_energy_j * 1e3;
        j["ratio"] = ratio;
        j["ann_macs"] = ann.macs;
        if (!scene.empty()) j["scene"] = scene;
        if (!config.empty()) j["config"] = config;
        return j;
    }
};

template <typename Real>
EnergyReport make_energy_report(const SpikingMlp<Real>& mlp, const SpikeRecord& rec,
                                std::uint64_t queried_samples, const EnergyModel& model) {
    model.validate();
    EnergyReport r;
    r.model = model;
    r.snn = count_ops_snn(mlp, rec);
    r.ann = count_ops_ann(mlp, queried_samples);
    r.snn_energy_j = estimate_energy(r.snn, model);
    r.ann_energy_j = estimate_energy(r.ann, model);
    r.ratio = r.ann_energy_j > 0 ? r.snn_energy_j / r.ann_energy_j : 0.0;
    return r;
}

} // namespace spikenerf
