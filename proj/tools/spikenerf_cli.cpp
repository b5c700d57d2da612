#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <spikenerf/spikenerf.hpp>

using namespace spikenerf;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> encoder;
    std::optional<int> time_steps;
    std::optional<std::string> flip;
    std::optional<std::string> packing;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool deterministic = false;
    std::optional<int> iterations;
};

struct Paths {
    std::string data;
    std::string out;
    std::string ckpt;
    std::string split = "test";
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--encoder", o.encoder, "aligned | direct | poisson")
        ->check(CLI::IsMember({"aligned", "direct", "poisson"}));
    cmd->add_option("--time-steps", o.time_steps, "T for direct / poisson encoding")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--flip", o.flip, "temporal flip: on | off")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--packing", o.packing, "tp | tcp")->check(CLI::IsMember({"tp", "tcp"}));
    cmd->add_option("--seed", o.seed, "seed for every random number generator (default 42)");
    cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", o.deterministic, "ordered gradient reduction");
}

/// defaults < checkpoint snapshot < --config file < flags.
RunConfig resolve(const Overrides& o, const std::string& snapshot = {}) {
    RunConfig cfg;
    if (!snapshot.empty()) apply_config_json(nlohmann::json::parse(snapshot), cfg);
    if (!o.config.empty()) cfg = load_config_file(o.config, cfg);
    if (o.encoder) cfg.render.encoder.kind = parse_encoder(*o.encoder);
    if (o.time_steps) cfg.render.encoder.steps = *o.time_steps;
    if (o.flip) cfg.render.flip = *o.flip == "on";
    if (o.packing) cfg.render.packing = parse_packing(*o.packing);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (o.deterministic) cfg.deterministic = true;
    if (o.iterations) cfg.train.iterations = *o.iterations;
    cfg.train.seed = cfg.seed;
    cfg.train.threads = cfg.threads;
    cfg.render.poisson_seed = cfg.seed;
    if (cfg.render.encoder.kind != EncoderKind::aligned && cfg.render.encoder.steps < 1)
        detail::fail(ErrorCode::config, "invalid value for config key: render.time_steps");
    return cfg;
}

fs::path manifest_path(const std::string& data, const std::string& split) {
    return fs::path(data) / ("transforms_" + split + ".json");
}

/// The scene AABB comes from the config when set, else from scene.json
/// written by make-scene, else the default cube.
Aabb<float> scene_aabb(const RunConfig& cfg, const std::string& data) {
    if (cfg.aabb_set) return cfg.aabb;
    const auto spec_path = fs::path(data) / "scene.json";
    if (fs::exists(spec_path)) {
        std::ifstream in(spec_path);
        return scene_spec_from_json(nlohmann::json::parse(in)).aabb.cast<float>();
    }
    return cfg.aabb;
}

Image render_view(const Scene<float>& scene, const Camera<float>& cam, const RunConfig& cfg,
                  RenderResult<float>* stats = nullptr) {
    auto rays = generate_all_rays(cam);
    auto out = render_rays<float>(scene, rays, cfg.render, cfg.threads);
    Image img(cam.width, cam.height);
    img.rgb = out.rgb;
    img.clamp01();
    if (stats) *stats = std::move(out);
    return img;
}

double mean_psnr(const Scene<float>& scene, const Dataset& ds, const RunConfig& cfg) {
    double acc = 0;
    for (std::size_t v = 0; v < ds.size(); ++v) acc += psnr(render_view(scene, ds.cameras[v], cfg), ds.images[v]);
    return acc / double(ds.size());
}

Checkpoint load_run(const std::string& path) {
    if (path.empty()) detail::fail(ErrorCode::config, "missing required option --ckpt");
    return load_checkpoint(path);
}

void ensure_dir(const std::string& out) {
    if (out.empty()) detail::fail(ErrorCode::config, "missing required option --out");
    fs::create_directories(out);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) detail::fail(ErrorCode::io, "cannot write " + path.string());
    f << j.dump(2) << '\n';
}

int cmd_make_scene(const std::string& preset, const Paths& p, const Overrides& o, int width,
                   int height, int train_views, int test_views) {
    ensure_dir(p.out);
    auto spec = scene_preset(preset);
    if (width > 0) spec.width = width;
    if (height > 0) spec.height = height;
    if (train_views > 0) spec.train_views = train_views;
    if (test_views >= 0) spec.test_views = test_views;
    auto g = generate_procedural_scene(spec, o.seed.value_or(42));
    write_dataset(p.out, g);
    std::cout << "wrote " << g.train.size() << " train and " << g.test.size() << " test views to "
              << p.out << '\n';
    return 0;
}

int cmd_train(const Paths& p, const Overrides& o) {
    ensure_dir(p.out);
    if (p.data.empty()) detail::fail(ErrorCode::config, "missing required option --data");
    RunConfig cfg = resolve(o);
    auto train = load_manifest(manifest_path(p.data, "train"), cfg.render.background);
    std::optional<Dataset> test;
    if (fs::exists(manifest_path(p.data, "test")))
        test = load_manifest(manifest_path(p.data, "test"), cfg.render.background);
    cfg.aabb = scene_aabb(cfg, p.data);
    cfg.aabb_set = true;
    write_json(fs::path(p.out) / "config.json", config_to_json(cfg));

    std::mt19937_64 rng(cfg.seed);
    auto scene = Scene<float>::create(cfg.model, cfg.aabb, rng);
    scene.validate();
    const auto data = rays_from_dataset(train);

    std::ofstream csv(fs::path(p.out) / "metrics.csv");
    if (!csv) detail::fail(ErrorCode::io, "cannot write metrics.csv in " + p.out);
    csv << "iteration,loss,psnr\n";
    const auto ckpt_path = fs::path(p.out) / "ckpt";
    const auto t0 = std::chrono::steady_clock::now();
    TrainHooks<float> hooks;
    if (test) hooks.evaluate = [&](const Scene<float>& s) { return mean_psnr(s, *test, cfg); };
    hooks.checkpoint = [&](const Scene<float>& s, int it) {
        Checkpoint ck{config_to_json(cfg).dump(), s, std::uint64_t(it),
                      "mt19937_64 seed " + std::to_string(cfg.seed)};
        save_checkpoint(ckpt_path, ck);
    };
    hooks.progress = [&](const TrainRecord& r) {
        csv << r.iteration << ',' << r.loss << ',';
        if (!std::isnan(r.psnr)) csv << r.psnr;
        csv << '\n';
        if (!std::isnan(r.psnr) || r.iteration % 100 == 0) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cerr << "iter " << r.iteration << " loss " << r.loss;
            if (!std::isnan(r.psnr)) std::cerr << " psnr " << r.psnr;
            std::cerr << " (" << s << " s)\n";
        }
    };
    auto history = train_loop(scene, data, cfg.render, cfg.train, hooks);
    if (history.empty()) hooks.checkpoint(scene, 0);
    csv.flush();
    std::cout << "checkpoint: " << ckpt_path.string() << '\n';
    return 0;
}

int cmd_render(const Paths& p, const Overrides& o) {
    ensure_dir(p.out);
    auto ck = load_run(p.ckpt);
    RunConfig cfg = resolve(o, ck.config_json);
    if (p.data.empty()) detail::fail(ErrorCode::config, "missing required option --data");
    auto ds = load_manifest(manifest_path(p.data, p.split), cfg.render.background);
    for (std::size_t v = 0; v < ds.size(); ++v) {
        const auto file = fs::path(p.out) / ("r_" + std::to_string(v) + ".png");
        write_png(file, render_view(ck.scene, ds.cameras[v], cfg));
    }
    std::cout << "rendered " << ds.size() << " views to " << p.out << '\n';
    return 0;
}

int cmd_eval(const Paths& p, const Overrides& o) {
    ensure_dir(p.out);
    auto ck = load_run(p.ckpt);
    RunConfig cfg = resolve(o, ck.config_json);
    if (p.data.empty()) detail::fail(ErrorCode::config, "missing required option --data");
    auto ds = load_manifest(manifest_path(p.data, p.split), cfg.render.background);
    nlohmann::json views = nlohmann::json::array();
    double ps = 0, ss = 0;
    for (std::size_t v = 0; v < ds.size(); ++v) {
        auto img = render_view(ck.scene, ds.cameras[v], cfg);
        const double a = psnr(img, ds.images[v]);
        const double b = ssim(img, ds.images[v]);
        views.push_back({{"view", v}, {"psnr", a}, {"ssim", b}});
        ps += a;
        ss += b;
    }
    nlohmann::json j{{"split", p.split},
                     {"psnr", ps / double(ds.size())},
                     {"ssim", ss / double(ds.size())},
                     {"views", views},
                     {"iteration", ck.iteration}};
    write_json(fs::path(p.out) / "eval.json", j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_energy(const Paths& p, const Overrides& o) {
    ensure_dir(p.out);
    auto ck = load_run(p.ckpt);
    RunConfig cfg = resolve(o, ck.config_json);
    if (p.data.empty()) detail::fail(ErrorCode::config, "missing required option --data");
    auto ds = load_manifest(manifest_path(p.data, p.split), cfg.render.background);
    SpikeRecord rec;
    std::uint64_t samples = 0;
    for (std::size_t v = 0; v < ds.size(); ++v) {
        RenderResult<float> stats;
        render_view(ck.scene, ds.cameras[v], cfg, &stats);
        merge_spike_record(rec, stats.spikes);
        samples += stats.queried_samples;
    }
    auto report = make_energy_report(ck.scene.mlp, rec, samples, cfg.energy);
    report.scene = p.data + ":" + p.split;
    report.config = "encoder=" + to_string(cfg.render.encoder.kind) +
                    " packing=" + to_string(cfg.render.packing) +
                    " flip=" + (cfg.render.flip ? "on" : "off");
    auto j = report.to_json();
    j["queried_samples"] = samples;
    j["occupied_slots"] = rec.occupied_slots;
    write_json(fs::path(p.out) / "energy.json", j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_pack_bench(const Paths& p, const Overrides& o) {
    ensure_dir(p.out);
    auto ck = load_run(p.ckpt);
    RunConfig cfg = resolve(o, ck.config_json);
    if (p.data.empty()) detail::fail(ErrorCode::config, "missing required option --data");
    auto ds = load_manifest(manifest_path(p.data, p.split), cfg.render.background);
    const auto& scene = ck.scene;
    const int C = scene.input_width();
    std::ofstream csv(fs::path(p.out) / "pack_bench.csv");
    if (!csv) detail::fail(ErrorCode::io, "cannot write pack_bench.csv in " + p.out);
    csv << "mode,rays,T,valid_slots,total_slots,density,wall_ms\n";
    std::cout << "mode,rays,T,valid_slots,total_slots,density,wall_ms\n";
    for (std::size_t v = 0; v < ds.size(); ++v) {
        auto rays = generate_all_rays(ds.cameras[v]);
        for (std::size_t b = 0; b < rays.size(); b += std::size_t(cfg.render.chunk_size)) {
            const std::size_t n = std::min(rays.size() - b, std::size_t(cfg.render.chunk_size));
            auto tape = render_chunk<float>(scene, std::span(rays).subspan(b, n), cfg.render);
            for (auto mode : {PackingMode::tp, PackingMode::tcp}) {
                const auto t0 = std::chrono::steady_clock::now();
                auto packed = pack<float>(tape.masked, tape.inputs, C, mode,
                                          mode == PackingMode::tcp && cfg.render.sort_rays);
                if (cfg.render.flip) packed = temporal_flip(packed);
                auto fwd = smlp_forward(scene.mlp, packed.data, packed.occupancy,
                                        ForwardOptions{false});
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
                const auto st = occupancy_stats(packed);
                std::ostringstream row;
                row << to_string(mode) << ',' << n << ',' << packed.steps() << ',' << st.valid_slots
                    << ',' << st.total_slots << ',' << st.density << ',' << ms;
                csv << row.str() << '\n';
                std::cout << row.str() << '\n';
            }
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking radiance-field engine"};
    app.require_subcommand(1);
    Overrides o;
    Paths p;
    std::string preset = "cube-sphere";
    int width = 0, height = 0, train_views = 0, test_views = -1;

    auto* make = app.add_subcommand("make-scene", "generate a procedural dataset");
    make->add_option("--preset", preset, "cube-sphere | sphere | empty");
    make->add_option("--out", p.out, "output dataset directory")->required();
    make->add_option("--seed", o.seed, "camera jitter seed (default 42)");
    make->add_option("--width", width);
    make->add_option("--height", height);
    make->add_option("--train-views", train_views);
    make->add_option("--test-views", test_views);

    auto* train = app.add_subcommand("train", "train a scene; writes ckpt and metrics.csv");
    train->add_option("--data", p.data, "dataset directory")->required();
    train->add_option("--out", p.out, "run directory")->required();
    train->add_option("--iterations", o.iterations)->check(CLI::NonNegativeNumber);
    add_common(train, o);

    auto add_run = [&](const char* name, const char* help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("--ckpt", p.ckpt, "checkpoint file")->required();
        c->add_option("--data", p.data, "dataset directory")->required();
        c->add_option("--out", p.out, "output directory")->required();
        c->add_option("--split", p.split, "manifest split (default test)");
        add_common(c, o);
        return c;
    };
    auto* render = add_run("render", "render the dataset poses to PNG");
    auto* eval = add_run("eval", "PSNR / SSIM against the dataset images");
    auto* energy = add_run("energy", "SNN vs ANN energy estimate on identical rays");
    auto* bench = add_run("pack-bench", "TP vs TCP occupancy and wall time per chunk");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (make->parsed()) return cmd_make_scene(preset, p, o, width, height, train_views, test_views);
        if (train->parsed()) return cmd_train(p, o);
        if (render->parsed()) return cmd_render(p, o);
        if (eval->parsed()) return cmd_eval(p, o);
        if (energy->parsed()) return cmd_energy(p, o);
        if (bench->parsed()) return cmd_pack_bench(p, o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
