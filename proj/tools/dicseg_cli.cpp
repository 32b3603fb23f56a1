#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dicseg/config.hpp"
#include "dicseg/error.hpp"
#include "dicseg/image_io.hpp"
#include "dicseg/phantom.hpp"
#include "dicseg/pipeline.hpp"
#include "dicseg/tune_server.hpp"
#include "dicseg/tune_session.hpp"

namespace fs = std::filesystem;
using namespace dicseg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kEmpty = 3 };

PipelineConfig config_for(const std::vector<fs::path>& files, RunMode mode) {
    PipelineConfig cfg = files.empty() ? PipelineConfig{} : load_config(files);
    cfg.mode = mode;
    cfg.validate();
    return cfg;
}

int cmd_batch(const std::vector<fs::path>& configs, const fs::path& input, const fs::path& out,
              const std::optional<fs::path>& truth, unsigned threads) {
    const auto cfg = config_for(configs, RunMode::Batch);
    const auto seq = load_sequence(input, cfg.pattern, cfg.interval);
    auto report = run_batch(cfg, seq, threads == 0 ? detail::default_threads() : threads);
    if (truth) attach_truth(report, *truth);
    emit_report(report, out);
    std::size_t detected = 0;
    for (const auto& m : report.per_frame) detected += m.detected;
    std::printf("%zu frames, %zu detected -> %s\n", report.per_frame.size(), detected, out.string().c_str());
    return kOk;
}

int frame_position(const fs::path& frame, const PipelineConfig& cfg) {
    const auto seq = load_sequence(frame.has_parent_path() ? frame.parent_path() : fs::path("."),
                                   cfg.pattern, cfg.interval);
    for (const auto& f : seq.frames) {
        if (fs::equivalent(f.path, frame)) return f.frame_index;
    }
    throw ConfigError(frame.string() + " does not match pattern '" + cfg.pattern +
                      "' in its directory; pass --index");
}

struct SingleFlags {
    std::optional<double> d1, d2, threshold;
    std::optional<int> index;
};

int cmd_single(const std::vector<fs::path>& configs, const fs::path& frame_path, const SingleFlags& flags,
               const fs::path& out) {
    auto cfg = config_for(configs, RunMode::Single);
    const int idx = flags.index ? *flags.index : frame_position(frame_path, cfg);
    if (idx < 0) throw ConfigError("--index must be non-negative");

    FrameOverride t;
    if (auto it = cfg.frame_overrides.find(idx); it != cfg.frame_overrides.end()) {
        t = it->second;
    } else {
        if (cfg.bandpass) t = {cfg.bandpass->d1, cfg.bandpass->d2, cfg.threshold};
        t.threshold = cfg.threshold;
        if (!cfg.bandpass && !(flags.d1 && flags.d2)) {
            throw ConfigError("no band-pass for frame " + std::to_string(idx) +
                              ": set bandpass in the config, a frame override, or --d1/--d2");
        }
    }
    if (flags.d1) t.d1 = *flags.d1;
    if (flags.d2) t.d2 = *flags.d2;
    if (flags.threshold) t.threshold = *flags.threshold;
    cfg.frame_overrides[idx] = t;
    cfg.validate();

    const auto frame = load_frame(frame_path);
    const auto r = run_single(cfg, frame, idx);

    SequenceReport report;
    report.config_echo = cfg;
    report.per_frame = {r.measurement};
    report.masks = {{mask_file_name(frame_path, idx), frame_path.filename().string(), r.segmentation.mask}};
    emit_report(report, out);
    write_text(out / "measurement.json", to_json(r.measurement).dump(2) + "\n");
    std::printf("frame %d: area %zu px, perimeter %.6f px, circularity %.6f%s\n", idx, r.measurement.area,
                r.measurement.perimeter, r.measurement.circularity, r.measurement.detected ? "" : " (no object)");
    return kOk;
}

int cmd_eval(const fs::path& pred, const fs::path& truth, const fs::path& out) {
    const auto summary = run_eval(pred, truth);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, to_json(summary).dump(2) + "\n");
    std::printf("%zu pairs, %zu skipped, mean dice %.6f, min dice %.6f\n", summary.pairs.size(),
                summary.skipped.size(), summary.mean_dice, summary.min_dice);
    return kOk;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const std::vector<fs::path>& configs, const fs::path& input, const std::string& host, int port,
              const std::optional<fs::path>& ui) {
    const auto cfg = config_for(configs, RunMode::Single);
    TuneSession session(load_sequence(input, cfg.pattern, cfg.interval), cfg);
    httplib::Server server;
    install_routes(server, session, ui);
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
    } else if (!server.bind_to_port(host, port)) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    std::printf("listening on http://%s:%d (%zu frames)\n", host.c_str(), bound, session.sequence().size());
    std::fflush(stdout);
    server.listen_after_bind();
    g_server = nullptr;
    return kOk;
}

int cmd_phantom(const std::string& kind, const fs::path& out, int frames, int size, std::uint64_t seed) {
    fs::create_directories(out / "frames");
    fs::create_directories(out / "truth");
    phantom::Imaging im;
    im.seed = seed;
    char name[64];
    if (kind == "spreading") {
        const auto seq = phantom::spreading_sequence(frames, size, size, size / 15.0, size / 4.3, 0.15, im);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
            save_gray(seq[i].image, out / "frames" / name);
            save_mask(seq[i].truth, out / "truth" / name);
        }
    } else {
        phantom::Sombrero s;
        s.body = {size / 2.0, size / 2.0, size * 0.23, 3, 0.08, 0.0};
        im.noise_sigma = 0.02;
        for (int i = 0; i < frames; ++i) {
            phantom::Imaging fi = im;
            fi.seed = seed + static_cast<std::uint64_t>(i);
            std::snprintf(name, sizeof(name), "frame_%03d.png", i);
            save_gray(phantom::sombrero_cell(size, size, s, fi), out / "frames" / name);
            save_mask(s.body.mask(size, size), out / "truth" / name);
        }
    }
    std::printf("%d %s frames -> %s\n", frames, kind.c_str(), out.string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Segmentation and morphometry of spreading cells in DIC time-lapse images"};
    app.require_subcommand(1);

    std::vector<fs::path> configs;
    fs::path input, out, frame, pred, truth_dir;
    std::optional<fs::path> truth, ui;
    unsigned threads = 0;
    SingleFlags flags;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string kind = "spreading";
    int frames = 40;
    int size = 300;
    std::uint64_t seed = 1;

    auto* batch = app.add_subcommand("batch", "Run the batch chain (no band-pass) over a frame directory");
    batch->add_option("--config", configs, "Configuration file(s); later files are merged over earlier ones");
    batch->add_option("--input", input, "Directory of PNG frames")->required();
    batch->add_option("--out", out, "Output directory")->required();
    batch->add_option("--truth", truth, "Directory of ground-truth masks named like the frames");
    batch->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto* single = app.add_subcommand("single", "Run one frame with the band-pass filter");
    single->add_option("--config", configs, "Configuration file(s); later files are merged over earlier ones");
    single->add_option("--frame", frame, "PNG frame")->required();
    single->add_option("--d1", flags.d1, "Outer band-pass radius");
    single->add_option("--d2", flags.d2, "Inner band-pass radius");
    single->add_option("--threshold", flags.threshold, "Binarization threshold");
    single->add_option("--index", flags.index, "Frame index (default: position in its directory)");
    single->add_option("--out", out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Compare predicted masks with ground truth");
    eval->add_option("--pred", pred, "Predicted mask directory (or a batch output directory)")->required();
    eval->add_option("--truth", truth_dir, "Ground-truth mask directory")->required();
    eval->add_option("--out", out, "JSON report file")->required();

    auto* serve = app.add_subcommand("serve", "Serve the interactive tuning API");
    serve->add_option("--config", configs, "Configuration file(s)");
    serve->add_option("--input", input, "Directory of PNG frames")->required();
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 = any free port)")->required();
    serve->add_option("--ui", ui, "Directory with the tuning UI bundle");

    auto* phantom_cmd = app.add_subcommand("phantom", "Write a synthetic sequence with ground truth");
    phantom_cmd->add_option("--kind", kind, "spreading or sombrero")->check(CLI::IsMember({"spreading", "sombrero"}));
    phantom_cmd->add_option("--out", out, "Output directory (frames/ and truth/)")->required();
    phantom_cmd->add_option("--frames", frames, "Frame count")->check(CLI::Range(1, 10000));
    phantom_cmd->add_option("--size", size, "Frame width and height")->check(CLI::Range(32, 4096));
    phantom_cmd->add_option("--seed", seed, "Noise seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*batch) return cmd_batch(configs, input, out, truth, threads);
        if (*single) return cmd_single(configs, frame, flags, out);
        if (*eval) return cmd_eval(pred, truth_dir, out);
        if (*serve) return cmd_serve(configs, input, host, port, ui);
        if (*phantom_cmd) return cmd_phantom(kind, out, frames, size, seed);
    } catch (const EmptyInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kEmpty;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}
