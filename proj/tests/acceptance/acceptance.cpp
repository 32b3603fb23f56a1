// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "dicseg/phantom.hpp"
#include "dicseg/pipeline.hpp"
#include "dicseg/tune_server.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dicseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const GrayImage& a, const GrayImage& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.pixels()[i] - b.pixels()[i]));
    return d;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.pixels()[i] && !b.pixels()[i]) return false;
    }
    return true;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DICSEG_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome filter_oracles() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> dim(3, 32);
    const int images = 150;
    double worst_thr = 0, worst_g = 0, worst_k = 0, worst_s = 0;
    int kuwahara_images = 0;
    for (int i = 0; i < images; ++i) {
        const int w = dim(rng), h = dim(rng);
        const auto img = oracle::random_image(rng, w, h);
        const double t = g_neighbor_threshold(img);
        worst_thr = std::max(worst_thr, std::abs(t - oracle::g_threshold(img)));
        worst_g = std::max(worst_g, max_abs_diff(g_neighbor_smooth(img), oracle::g_smooth(img, t)));
        const int sw = i % 3 == 0 ? 5 : 3;
        worst_s = std::max(worst_s, max_abs_diff(local_stddev(img, sw), oracle::local_stddev(img, sw)));
        const int kw = i % 4 == 0 ? 7 : 5;
        if (w > kw && h > kw) {
            worst_k = std::max(worst_k, max_abs_diff(kuwahara(img, kw), oracle::kuwahara(img, kw)));
            ++kuwahara_images;
        }
    }
    // Kuwahara needs the window to fit; top up with sizes that do.
    std::uniform_int_distribution<int> kdim(8, 32);
    while (kuwahara_images < images) {
        const auto img = oracle::random_image(rng, kdim(rng), kdim(rng));
        const int kw = kuwahara_images % 4 == 0 ? 7 : 5;
        worst_k = std::max(worst_k, max_abs_diff(kuwahara(img, kw), oracle::kuwahara(img, kw)));
        ++kuwahara_images;
    }
    const double secs = seconds_since(t0);
    const double worst = std::max({worst_thr, worst_g, worst_k, worst_s});
    return {worst <= 1e-9 && secs < 10.0,
            fmt("%d images/filter, max |diff| threshold %.1e smooth %.1e kuwahara %.1e stddev %.1e, %.2f s", images,
                worst_thr, worst_g, worst_k, worst_s, secs)};
}

Outcome bandpass_properties() {
    double dc = 0.0;
    for (auto [w, h] : {std::pair{64, 64}, std::pair{50, 38}, std::pair{33, 21}}) {
        for (double c : {0.0, 0.37, 1.0}) {
            const auto out = fft_bandpass_unnormalized(GrayImage(w, h, c), {65.5, 0.8688});
            for (double v : out.pixels()) dc = std::max(dc, std::abs(v));
        }
    }
    double cosine = 0.0;
    const int w = 128, h = 96;
    const std::vector<BandPassParams> params{{65.5, 0.8688}, {280.1423, 0.74}, {12.0, 2.5}, {8.0, 0.0}};
    for (const auto& p : params) {
        for (auto [u0, v0] : {std::pair{1, 0}, std::pair{3, 4}, std::pair{-7, 11}, std::pair{30, -20}, std::pair{64, 48}}) {
            GrayImage img(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    img(x, y) = std::cos(2 * std::numbers::pi * (static_cast<double>(u0) * x / w + static_cast<double>(v0) * y / h));
            const double gain = bandpass_response(std::hypot(u0, v0), p);
            const auto out = fft_bandpass_unnormalized(img, p);
            for (std::size_t i = 0; i < img.size(); ++i) cosine = std::max(cosine, std::abs(out.pixels()[i] - gain * img.pixels()[i]));
        }
    }
    double linear = 0.0;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = oracle::random_image(rng, 40, 31);
        const auto b = oracle::random_image(rng, 40, 31);
        const double alpha = coef(rng), beta = coef(rng);
        GrayImage mix(40, 31);
        for (std::size_t i = 0; i < mix.size(); ++i) mix.pixels()[i] = alpha * a.pixels()[i] + beta * b.pixels()[i];
        const auto& p = params[trial % params.size()];
        const auto fa = fft_bandpass_unnormalized(a, p);
        const auto fb = fft_bandpass_unnormalized(b, p);
        const auto fm = fft_bandpass_unnormalized(mix, p);
        for (std::size_t i = 0; i < mix.size(); ++i) {
            linear = std::max(linear, std::abs(fm.pixels()[i] - (alpha * fa.pixels()[i] + beta * fb.pixels()[i])));
        }
    }
    return {dc <= 1e-9 && cosine <= 1e-6 && linear <= 1e-6,
            fmt("constant max %.1e, cosine max err %.1e, linearity max err %.1e", dc, cosine, linear)};
}

Outcome morphology_oracles() {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> density(0.15, 0.85);
    const int masks = 150;
    int mismatches = 0;
    for (int i = 0; i < masks; ++i) {
        const auto m = oracle::random_mask(rng, 20, 20, density(rng));
        for (int r = 1; r <= 3; ++r) {
            mismatches += erode(m, r) != oracle::erode(m, r);
            mismatches += close(m, r) != oracle::close(m, r);
        }
        mismatches += fill_holes(m) != oracle::fill_holes(m);
        mismatches += largest_object(m) != oracle::largest_object(m);
    }
    // Monotone part of the chain (binarize and the order-preserving steps).
    const MorphologyPlan monotone{{MorphStep::erode(1), MorphStep::close(3), MorphStep::fill_holes(), MorphStep::erode(1)}};
    std::vector<GrayImage> images;
    for (int i = 0; i < 20; ++i) images.push_back(oracle::random_image(rng, 24, 24));
    phantom::Imaging im;
    for (const auto& f : phantom::spreading_sequence(4, 120, 120, 10, 30, 0.15, im)) {
        images.push_back(prefilter(f.image, PipelineConfig{}));
    }
    int violations = 0, pairs = 0;
    const std::vector<double> thresholds{0.0, 0.01, 0.015, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0};
    for (const auto& img : images) {
        std::vector<BinaryMask> raw, morph;
        for (double t : thresholds) {
            raw.push_back(binarize(img, t));
            BinaryMask m = raw.back();
            for (const auto& s : monotone.steps) m = apply_step(m, s);
            morph.push_back(m);
        }
        for (std::size_t a = 0; a < thresholds.size(); ++a) {
            for (std::size_t b = a; b < thresholds.size(); ++b) {
                ++pairs;
                violations += !subset(raw[b], raw[a]) || !subset(morph[b], morph[a]);
            }
        }
    }
    return {mismatches == 0 && violations == 0,
            fmt("%d masks x (erode, close r=1..3, fill_holes, largest_object): %d mismatches; "
                "threshold monotonicity %d violations over %d pairs on %zu images",
                masks, mismatches, violations, pairs, images.size())};
}

Outcome circularity_reproduction() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    for (int r : {20, 40, 80}) {
        const int n = 2 * r + 11;
        const auto m = measure_mask(phantom::disk_mask(n, n, n / 2, n / 2, r), 0, 0.0);
        ok = ok && m.circularity >= 0.85 && m.circularity <= 1.15;
        detail += fmt("r=%d: %.4f; ", r, m.circularity);
    }
    const double r = 17.25;
    const double analytic = circularity(std::numbers::pi * r * r, 2 * std::numbers::pi * r);
    ok = ok && std::abs(analytic - 1.0) < 1e-15;
    const double secs = seconds_since(t0);
    ok = ok && secs < 5.0;
    return {ok, detail + fmt("analytic circle %.15f; %.2f s", analytic, secs)};
}

Outcome phantom_accuracy() {
    testutil::TempDir dir("dicseg_accept");
    phantom::Imaging im;  // noise 0.03, shading ramp 0.15
    im.seed = 2024;
    const auto seq = phantom::spreading_sequence(40, 300, 300, 20, 70, 0.15, im);
    fs::create_directories(dir / "frames");
    char name[32];
    for (std::size_t i = 0; i < seq.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
        save_gray(seq[i].image, dir / "frames" / name);
    }
    const auto t0 = Clock::now();
    PipelineConfig cfg;
    const auto report = run_batch(cfg, load_sequence(dir / "frames", cfg.pattern, cfg.interval));
    const double secs = seconds_since(t0);
    double sum = 0.0, worst = 1.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const double d = evaluate(report.masks[i].mask, seq[i].truth).dice;
        sum += d;
        worst = std::min(worst, d);
    }
    const double mean = sum / seq.size();
    return {mean >= 0.90 && secs < 60.0, fmt("40 frames 300x300, mean Dice %.4f (min %.4f), batch %.2f s", mean, worst, secs)};
}

Outcome sombrero_recovery() {
    PipelineConfig batch;
    PipelineConfig single;
    single.mode = RunMode::Single;
    const FrameOverride tuned{65.5, 0.8688, 0.05};
    single.frame_overrides[9] = tuned;
    double worst_batch = 0.0, worst_single = 1.0;
    std::string detail;
    for (std::uint64_t seed : {7, 8, 9}) {
        phantom::Sombrero s;
        s.body = {150, 150, 70, 3, 0.08, 0.4 * static_cast<double>(seed)};
        phantom::Imaging im;
        im.noise_sigma = 0.02;
        im.seed = seed;
        const auto img = phantom::sombrero_cell(300, 300, s, im);
        const auto truth = s.body.mask(300, 300);
        const auto pre = prefilter(img, batch);
        const double db = evaluate(finish_frame(pre, batch, std::nullopt, batch.threshold, 9, 90).segmentation.mask, truth).dice;
        const double ds = evaluate(run_single(single, img, 9).segmentation.mask, truth).dice;
        worst_batch = std::max(worst_batch, db);
        worst_single = std::min(worst_single, ds);
        detail += fmt("seed %llu batch %.3f single %.3f; ", static_cast<unsigned long long>(seed), db, ds);
    }
    return {worst_batch < 0.7 && worst_single >= 0.85,
            detail + fmt("tuned d1=%.1f d2=%.4f threshold=%.3f", tuned.d1, tuned.d2, tuned.threshold)};
}

Outcome population_cohort() {
    // Cell k grows 2 px in radius per frame until its completion frame, then holds.
    const std::vector<int> completion{3, 5, 5, 8, 10, 12, 12, 12, 15, 19};
    const int frames = 20;
    const double interval = 10.0;
    std::vector<std::vector<CellMeasurement>> series;
    for (std::size_t k = 0; k < completion.size(); ++k) {
        std::vector<CellMeasurement> cell;
        for (int t = 0; t < frames; ++t) {
            const double r = 6.0 + 2.0 * std::min(t, completion[k]) + 0.1 * k;
            const int n = static_cast<int>(2 * r) + 9;
            cell.push_back(measure_mask(phantom::disk_mask(n, n, n / 2, n / 2, r), t, t * interval));
        }
        series.push_back(std::move(cell));
    }
    const auto curve = population_curve(series, 1.0);
    int wrong = static_cast<int>(curve.points.size() != static_cast<std::size_t>(frames));
    for (int t = 0; t < frames && !wrong; ++t) {
        const double expected = std::count_if(completion.begin(), completion.end(), [t](int c) { return c <= t; }) / 10.0;
        wrong += curve.points[t].timestamp != t * interval || curve.points[t].fraction_fully_spread != expected;
    }
    return {wrong == 0, fmt("10 cells, %zu timepoints, %d mismatching fractions (final %.1f)", curve.points.size(), wrong,
                            curve.points.empty() ? 0.0 : curve.points.back().fraction_fully_spread)};
}

Outcome determinism() {
    testutil::TempDir dir("dicseg_accept");
    if (run_cli("phantom --kind spreading --frames 12 --size 200 --seed 99 --out " + q(dir.path())) != 0) {
        return {false, "phantom generation failed"};
    }
    if (run_cli("batch --input " + q(dir / "frames") + " --out " + q(dir / "a") + " --threads 1") != 0 ||
        run_cli("batch --input " + q(dir / "frames") + " --out " + q(dir / "b") + " --threads 8") != 0) {
        return {false, "batch run failed"};
    }
    int differing = slurp(dir / "a" / "measurements.csv") != slurp(dir / "b" / "measurements.csv");
    int masks = 0;
    for (const auto& e : fs::directory_iterator(dir / "a" / "masks")) {
        ++masks;
        differing += slurp(e.path()) != slurp(dir / "b" / "masks" / e.path().filename());
    }
    return {differing == 0 && masks == 12,
            fmt("measurements.csv + %d mask PNGs compared (1 vs 8 threads), %d differ", masks, differing)};
}

Outcome override_round_trip() {
    testutil::TempDir dir("dicseg_accept");
    if (run_cli("phantom --kind sombrero --frames 4 --size 200 --seed 3 --out " + q(dir.path())) != 0) {
        return {false, "phantom generation failed"};
    }
    write_text(dir / "base.json", R"({"mode": "single", "interval": 5})");
    const auto base = load_config(dir / "base.json");

    TuneSession session(load_sequence(dir / "frames", base.pattern, base.interval), base);
    httplib::Server server;
    install_routes(server, session);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::jthread serving([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    // Scripted tuning: explore a few triplets, accept the last one per frame.
    const std::vector<std::pair<int, std::vector<FrameOverride>>> script{
        {0, {{30.0, 1.0, 0.2}, {65.5, 0.8688, 0.0305}}},
        {2, {{280.1423, 0.74, 0.04}, {65.5, 0.8688, 0.05}}},
        {3, {{40.0, 2.0, 0.1}}},
    };
    std::map<int, json> accepted_measurement;
    for (const auto& [idx, tries] : script) {
        for (const auto& t : tries) {
            const json body{{"d1", t.d1}, {"d2", t.d2}, {"threshold", t.threshold}};
            auto res = client.Post("/api/frames/" + std::to_string(idx) + "/preview", body.dump(), "application/json");
            if (!res || res->status != 200) return {false, "preview request failed"};
            accepted_measurement[idx] = json::parse(res->body)["measurement"];
        }
        const auto& t = tries.back();
        const json body{{"d1", t.d1}, {"d2", t.d2}, {"threshold", t.threshold}};
        auto res = client.Post("/api/frames/" + std::to_string(idx) + "/accept", body.dump(), "application/json");
        if (!res || res->status != 204) return {false, "accept request failed"};
    }
    auto res = client.Get("/api/overrides");
    server.stop();
    serving = {};
    if (!res || res->status != 200) return {false, "export request failed"};
    write_text(dir / "overrides.json", res->body);

    int mismatched = 0;
    std::string detail;
    const auto seq = load_sequence(dir / "frames");
    for (const auto& [idx, expected] : accepted_measurement) {
        const auto out = dir / ("single_" + std::to_string(idx));
        if (run_cli("single --config " + q(dir / "base.json") + " --config " + q(dir / "overrides.json") +
                    " --frame " + q(seq.frames[idx].path) + " --out " + q(out)) != 0) {
            return {false, "single run failed for frame " + std::to_string(idx)};
        }
        const auto got = json::parse(slurp(out / "measurement.json"));
        const bool same = got["area"] == expected["area"] &&
                          got["perimeter"].get<double>() == expected["perimeter"].get<double>() &&
                          got["circularity"].get<double>() == expected["circularity"].get<double>() &&
                          got["timestamp"].get<double>() == expected["timestamp"].get<double>() &&
                          got["frame_index"] == expected["frame_index"] && got["detected"] == expected["detected"];
        mismatched += !same;
        detail += fmt("frame %d area %llu; ", idx, got["area"].get<unsigned long long>());
    }
    return {mismatched == 0 && accepted_measurement.size() == 3,
            detail + fmt("%d of %zu frames differ bit-wise", mismatched, accepted_measurement.size())};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"filter oracle suite", filter_oracles},
        {"band-pass properties", bandpass_properties},
        {"morphology oracle suite + threshold monotonicity", morphology_oracles},
        {"circularity reproduction", circularity_reproduction},
        {"phantom end-to-end accuracy", phantom_accuracy},
        {"hard-phantom failure/recovery", sombrero_recovery},
        {"population curve", population_cohort},
        {"determinism", determinism},
        {"override round-trip", override_round_trip},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return failed == 0 ? 0 : 1;
}
