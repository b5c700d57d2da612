#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"
#include "rays.hpp"
#include "snn.hpp"

namespace spikenerf {

enum class PackingMode {
    tp,  // survivors keep their original sample slot; masked slots become zeros
    tcp, // survivors are condensed to the front of the time axis
};

/// Where one survivor lives in the packed tensor.
struct SlotRef {
    int packed_ray = 0;
    int time = 0;
    int ray = 0;    // original ray index within the batch
    int sample = 0; // original sample index along that ray

    bool operator==(const SlotRef&) const = default;
};

template <typename Real>
struct PackedBatch {
    PackingMode mode = PackingMode::tcp;
    Tensor3<Real> data;                   // [packed ray, time, channel]
    std::vector<std::uint8_t> occupancy;  // [packed ray, time]
    std::vector<int> ray_permutation;     // packed slot -> original ray
    std::vector<int> extent;              // per packed ray: slots spanned by its sequence
    std::vector<SlotRef> scatter_map;     // one entry per survivor, survivor order
    bool flipped = false;

    int rays() const { return data.d0; }
    int steps() const { return data.d1; }
    int channels() const { return data.d2; }
    bool occupied(int packed_ray, int t) const {
        return occupancy[static_cast<std::size_t>(packed_ray) * steps() + t] != 0;
    }
};

namespace detail {

template <typename Real>
PackedBatch<Real> pack_impl(const MaskedSamples<Real>& masked, std::span<const Real> features,
                            int channels, PackingMode mode, bool sort) {
    const std::size_t n_surv = masked.survivor_count();
    require(channels >= 1, ErrorCode::invalid_argument, "channels must be >= 1");
    require(features.size() == n_surv * static_cast<std::size_t>(channels),
            ErrorCode::shape_mismatch, "features must be survivors x channels");
    const int R = static_cast<int>(masked.ray_count());

    std::vector<int> order(static_cast<std::size_t>(R));
    std::iota(order.begin(), order.end(), 0);
    if (mode == PackingMode::tcp && sort) {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return masked.rays[a].count() > masked.rays[b].count();
        });
    }

    int T = 0;
    std::vector<int> extent(static_cast<std::size_t>(R));
    for (int p = 0; p < R; ++p) {
        const auto& ray = masked.rays[order[p]];
        extent[p] = static_cast<int>(mode == PackingMode::tp ? ray.raw_count : ray.count());
        T = std::max(T, extent[p]);
    }

    PackedBatch<Real> b;
    b.mode = mode;
    b.data = Tensor3<Real>(R, T, channels);
    b.occupancy.assign(static_cast<std::size_t>(R) * T, 0);
    b.ray_permutation = order;
    b.extent = extent;
    b.scatter_map.resize(n_surv);

    std::vector<std::size_t> first(static_cast<std::size_t>(R) + 1, 0);
    for (int r = 0; r < R; ++r) first[r + 1] = first[r] + masked.rays[r].count();

    for (int p = 0; p < R; ++p) {
        const int r = order[p];
        const auto& ray = masked.rays[r];
        for (std::size_t k = 0; k < ray.count(); ++k) {
            const int sample = ray.indices[k];
            const int t = mode == PackingMode::tp ? sample : static_cast<int>(k);
            const std::size_t s = first[r] + k;
            std::copy_n(features.data() + s * channels, channels,
                        b.data.data.data() + b.data.offset(p, t));
            b.occupancy[static_cast<std::size_t>(p) * T + t] = 1;
            b.scatter_map[s] = {p, t, r, sample};
        }
    }
    return b;
}

} // namespace detail

/// Temporal padding: time slot = original sample index, T = max raw count.
template <typename Real>
PackedBatch<Real> pack_tp(const MaskedSamples<Real>& masked, std::span<const Real> features,
                          int channels) {
    return detail::pack_impl(masked, features, channels, PackingMode::tp, false);
}

/// Temporal condensing-and-padding: survivors contiguous from slot 0,
/// T = max survivor count. With sort, packed rays are ordered by descending
/// survivor count (stable).
template <typename Real>
PackedBatch<Real> pack_tcp(const MaskedSamples<Real>& masked, std::span<const Real> features,
                           int channels, bool sort = false) {
    return detail::pack_impl(masked, features, channels, PackingMode::tcp, sort);
}

template <typename Real>
PackedBatch<Real> pack(const MaskedSamples<Real>& masked, std::span<const Real> features,
                       int channels, PackingMode mode, bool sort = false) {
    return detail::pack_impl(masked, features, channels, mode, sort);
}

/// Reverses every packed ray's sequence over its extent; padding stays
/// trailing. Applying it twice restores the batch exactly.
template <typename Real>
PackedBatch<Real> temporal_flip(const PackedBatch<Real>& in) {
    PackedBatch<Real> out = in;
    const int T = in.steps(), C = in.channels();
    for (int p = 0; p < in.rays(); ++p) {
        const int e = in.extent[p];
        for (int t = 0; t < e; ++t) {
            const int ft = e - 1 - t;
            std::copy_n(in.data.data.data() + in.data.offset(p, t), C,
                        out.data.data.data() + out.data.offset(p, ft));
            out.occupancy[static_cast<std::size_t>(p) * T + ft] =
                in.occupancy[static_cast<std::size_t>(p) * T + t];
        }
    }
    for (auto& slot : out.scatter_map) slot.time = in.extent[slot.packed_ray] - 1 - slot.time;
    out.flipped = !in.flipped;
    return out;
}

/// Routes each occupied slot's output row back to its survivor; the result
/// is survivors x outputs.d2 in survivor order (ray-major, sample order).
template <typename Real>
std::vector<Real> unpack_scatter(const Tensor3<Real>& outputs, const PackedBatch<Real>& batch) {
    detail::require(outputs.d0 == batch.rays() && outputs.d1 == batch.steps(),
                    ErrorCode::shape_mismatch, "outputs not shaped like the packed batch");
    const int C = outputs.d2;
    std::vector<Real> out(batch.scatter_map.size() * static_cast<std::size_t>(C));
    for (std::size_t s = 0; s < batch.scatter_map.size(); ++s) {
        const auto& slot = batch.scatter_map[s];
        std::copy_n(outputs.data.data() + outputs.offset(slot.packed_ray, slot.time), C,
                    out.data() + s * C);
    }
    return out;
}

/// Inverse of unpack_scatter: writes per-survivor rows into a packed-shaped
/// tensor (zeros elsewhere).
template <typename Real>
Tensor3<Real> scatter_to_packed(std::span<const Real> per_survivor, int channels,
                                const PackedBatch<Real>& batch) {
    detail::require(per_survivor.size() == batch.scatter_map.size() * channels,
                    ErrorCode::shape_mismatch, "per-survivor rows do not match the batch");
    Tensor3<Real> out(batch.rays(), batch.steps(), channels);
    for (std::size_t s = 0; s < batch.scatter_map.size(); ++s) {
        const auto& slot = batch.scatter_map[s];
        std::copy_n(per_survivor.data() + s * channels, channels,
                    out.data.data() + out.offset(slot.packed_ray, slot.time));
    }
    return out;
}

struct OccupancyStats {
    std::size_t valid_slots = 0;
    std::size_t total_slots = 0;
    double density = 0.0;
    std::vector<int> lengths; // valid slots per packed ray
};

template <typename Real>
OccupancyStats occupancy_stats(const PackedBatch<Real>& batch) {
    OccupancyStats st;
    st.total_slots = batch.occupancy.size();
    st.lengths.assign(static_cast<std::size_t>(batch.rays()), 0);
    for (int p = 0; p < batch.rays(); ++p) {
        for (int t = 0; t < batch.steps(); ++t) st.lengths[p] += batch.occupied(p, t);
        st.valid_slots += static_cast<std::size_t>(st.lengths[p]);
    }
    st.density = st.total_slots ? double(st.valid_slots) / double(st.total_slots) : 0.0;
    return st;
}

} // namespace spikenerf
