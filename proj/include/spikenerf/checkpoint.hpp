#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "render.hpp"

namespace spikenerf {

inline constexpr char kCheckpointMagic[4] = {'S', 'P', 'K', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string config_json; // snapshot of the configuration used for training
    Scene<float> scene;
    std::uint64_t iteration = 0;
    std::string rng_state;
};

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        bytes_.insert(bytes_.end(), b, b + sizeof(T));
    }
    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void put_raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void get_raw(char* out, std::size_t n) {
        need(n);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail(ErrorCode::truncated, "truncated checkpoint");
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

inline void put_grid(ByteWriter& w, const DenseGrid<float>& g) {
    w.put<std::uint32_t>(g.dims.nx);
    w.put<std::uint32_t>(g.dims.ny);
    w.put<std::uint32_t>(g.dims.nz);
    w.put<std::uint32_t>(g.channels);
    for (std::size_t a = 0; a < 3; ++a) w.put<float>(g.aabb.min_corner[a]);
    for (std::size_t a = 0; a < 3; ++a) w.put<float>(g.aabb.max_corner[a]);
    for (float v : g.values) w.put<float>(v);
}

inline void get_grid(ByteReader& r, DenseGrid<float>& g) {
    GridDims d;
    d.nx = static_cast<int>(r.get<std::uint32_t>());
    d.ny = static_cast<int>(r.get<std::uint32_t>());
    d.nz = static_cast<int>(r.get<std::uint32_t>());
    const int channels = static_cast<int>(r.get<std::uint32_t>());
    Aabb<float> box;
    for (std::size_t a = 0; a < 3; ++a) box.min_corner[a] = r.get<float>();
    for (std::size_t a = 0; a < 3; ++a) box.max_corner[a] = r.get<float>();
    if (d.nx < 2 || d.ny < 2 || d.nz < 2 || channels < 1 || d.count() > (1u << 28)) {
        fail(ErrorCode::parse, "checkpoint grid header is invalid");
    }
    g = DenseGrid<float>(d, channels, box);
    for (auto& v : g.values) v = r.get<float>();
}

} // namespace detail

/// SPKN container: magic, version, config snapshot, density grid, feature
/// grid, network, iteration and RNG state. All numbers little-endian.
inline std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
    detail::ByteWriter w;
    w.put_raw(kCheckpointMagic, 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_string(ck.config_json);

    const auto& s = ck.scene;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.density.activation.kind));
    w.put<double>(s.density.activation.shift);
    detail::put_grid(w, s.density);
    detail::put_grid(w, s.features);

    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.view_freqs));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.mlp.neuron));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.mlp.surrogate.form));
    w.put<double>(s.mlp.surrogate.alpha_sg);
    w.put<std::uint8_t>(s.mlp.surrogate.detach_reset ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.mlp.layer_count()));
    for (std::size_t i = 0; i < s.mlp.layer_count(); ++i) {
        const auto& l = s.mlp.layer(i);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out));
        w.put<std::uint8_t>(l.lif ? 1 : 0);
        const LifConfig lif = l.lif.value_or(LifConfig{});
        w.put<double>(lif.tau);
        w.put<double>(lif.v_th);
        w.put<double>(lif.v_reset);
        for (float v : l.weight) w.put<float>(v);
        for (float v : l.bias) w.put<float>(v);
    }
    w.put<std::uint64_t>(ck.iteration);
    w.put_string(ck.rng_state);
    return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::vector<char> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        detail::fail(ErrorCode::bad_magic, "bad magic: not an SPKN checkpoint");
    }
    detail::ByteReader r(std::move(bytes));
    char magic[4];
    r.get_raw(magic, 4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        detail::fail(ErrorCode::unsupported_version,
                     "unsupported version " + std::to_string(version) + " (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ck.config_json = r.get_string();
    auto& s = ck.scene;
    DensityActivation act;
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1) detail::fail(ErrorCode::parse, "unknown density activation in checkpoint");
    act.kind = static_cast<DensityActivationKind>(kind);
    act.shift = r.get<double>();
    DenseGrid<float> dg;
    detail::get_grid(r, dg);
    static_cast<DenseGrid<float>&>(s.density) = std::move(dg);
    s.density.activation = act;
    detail::get_grid(r, s.features);

    s.view_freqs = static_cast<int>(r.get<std::uint32_t>());
    const auto neuron = r.get<std::uint32_t>();
    const auto form = r.get<std::uint32_t>();
    if (neuron > 2 || form > 1) detail::fail(ErrorCode::parse, "unknown network mode in checkpoint");
    s.mlp.neuron = static_cast<NeuronKind>(neuron);
    s.mlp.surrogate.form = static_cast<SurrogateForm>(form);
    s.mlp.surrogate.alpha_sg = r.get<double>();
    s.mlp.surrogate.detach_reset = r.get<std::uint8_t>() != 0;
    const auto n_layers = r.get<std::uint32_t>();
    if (n_layers < 1 || n_layers > 64) detail::fail(ErrorCode::parse, "bad layer count in checkpoint");
    std::vector<Layer<float>> layers;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        Layer<float> l;
        l.in = static_cast<int>(r.get<std::uint32_t>());
        l.out = static_cast<int>(r.get<std::uint32_t>());
        if (l.in < 1 || l.out < 1 || l.in > (1 << 16) || l.out > (1 << 16))
            detail::fail(ErrorCode::parse, "bad layer shape in checkpoint");
        const bool has_lif = r.get<std::uint8_t>() != 0;
        LifConfig lif{r.get<double>(), r.get<double>(), r.get<double>()};
        if (has_lif) l.lif = lif;
        l.weight.resize(static_cast<std::size_t>(l.in) * l.out);
        for (auto& v : l.weight) v = r.get<float>();
        l.bias.resize(static_cast<std::size_t>(l.out));
        for (auto& v : l.bias) v = r.get<float>();
        layers.push_back(std::move(l));
    }
    s.mlp.readout = layers.back();
    layers.pop_back();
    s.mlp.hidden = std::move(layers);
    ck.iteration = r.get<std::uint64_t>();
    ck.rng_state = r.get_string();
    s.validate();
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const auto bytes = serialize_checkpoint(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) detail::fail(ErrorCode::io, "cannot write checkpoint: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) detail::fail(ErrorCode::io, "cannot write checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::fail(ErrorCode::io, "cannot open checkpoint: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(std::move(bytes));
}

} // namespace spikenerf
