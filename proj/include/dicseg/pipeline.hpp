#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dicseg/config.hpp"
#include "dicseg/error.hpp"
#include "dicseg/filters.hpp"
#include "dicseg/image_io.hpp"
#include "dicseg/measurement.hpp"
#include "dicseg/segmentation.hpp"

namespace dicseg {

// ---------------------------------------------------------------------------
// Filter chain
// ---------------------------------------------------------------------------

/// Everything up to (not including) the band-pass:
/// normalize > flat field > G-neighbor > Kuwahara > local stddev.
inline GrayImage prefilter(const GrayImage& frame, const PipelineConfig& cfg) {
    GrayImage img = normalize(frame);
    img = flat_field_correct(img, cfg.flat_field);
    img = g_neighbor_smooth(img, cfg.g_neighbor);
    img = kuwahara(img, cfg.kuwahara_window);
    return local_stddev(img, cfg.stddev_window);
}

struct FrameResult {
    SegmentationResult segmentation;
    CellMeasurement measurement;
};

/// Band-pass (when given), then segmentation and measurement.
inline FrameResult finish_frame(const GrayImage& prefiltered, const PipelineConfig& cfg,
                                const std::optional<BandPassParams>& bandpass, double threshold,
                                int frame_index, double timestamp) {
    FrameResult r;
    if (bandpass) {
        r.segmentation = segment(fft_bandpass(prefiltered, *bandpass), threshold, cfg.effective_plan());
    } else {
        r.segmentation = segment(prefiltered, threshold, cfg.effective_plan());
    }
    r.measurement = measure_frame(r.segmentation, frame_index, timestamp);
    return r;
}

struct SingleParams {
    BandPassParams bandpass;
    double threshold = 0.0;
};

/// Per-frame override first, then the config's band-pass and threshold.
inline SingleParams resolve_single_params(const PipelineConfig& cfg, int frame_index) {
    if (auto it = cfg.frame_overrides.find(frame_index); it != cfg.frame_overrides.end()) {
        return {it->second.bandpass(), it->second.threshold};
    }
    if (!cfg.bandpass) {
        throw ConfigError("single-frame mode needs band-pass parameters for frame " +
                          std::to_string(frame_index) + " (config.bandpass or frame_overrides)");
    }
    return {*cfg.bandpass, cfg.threshold};
}

inline FrameResult run_single(const PipelineConfig& cfg, const GrayImage& frame, int frame_index) {
    if (cfg.mode != RunMode::Single) throw ConfigError("run_single requires mode 'single'");
    cfg.validate();
    const auto params = resolve_single_params(cfg, frame_index);
    return finish_frame(prefilter(frame, cfg), cfg, params.bandpass, params.threshold, frame_index,
                        frame_index * cfg.interval);
}

// ---------------------------------------------------------------------------
// Batch runs
// ---------------------------------------------------------------------------

struct MaskOutput {
    std::string file_name;    // <source stem>_<frame index>.png
    std::string source_name;  // the frame's own file name
    BinaryMask mask;
};

inline std::string mask_file_name(const fs::path& source, int frame_index) {
    return source.stem().string() + "_" + std::to_string(frame_index) + ".png";
}

struct SequenceReport {
    std::vector<CellMeasurement> per_frame;
    std::vector<MaskOutput> masks;
    std::optional<PopulationCurve> population;
    std::optional<std::vector<std::optional<EvalResult>>> eval;  // nullopt entry = no truth mask
    PipelineConfig config_echo;
};

namespace detail {

/// Runs fn(i) for i in [0,n) on up to `threads` workers; rethrows the
/// exception of the lowest failing index.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline unsigned default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace detail

/// Batch chain over a sequence (no band-pass). A frame that cannot be read
/// aborts the run; a frame that segments to nothing is recorded as undetected.
inline SequenceReport run_batch(const PipelineConfig& cfg, const FrameSequence& seq,
                                unsigned threads = detail::default_threads()) {
    if (cfg.mode != RunMode::Batch) throw ConfigError("run_batch requires mode 'batch'");
    cfg.validate();
    if (seq.empty()) throw EmptyInputError("run_batch: empty frame sequence");

    SequenceReport report;
    report.config_echo = cfg;
    report.per_frame.resize(seq.size());
    report.masks.resize(seq.size());
    detail::parallel_for(seq.size(), threads, [&](std::size_t i) {
        const auto& entry = seq.frames[i];
        GrayImage frame;
        try {
            frame = load_frame(entry.path);
        } catch (const Error& e) {
            throw IoError("frame " + std::to_string(entry.frame_index) + " (" +
                          entry.path.string() + "): " + e.what());
        }
        auto r = finish_frame(prefilter(frame, cfg), cfg, std::nullopt, cfg.threshold,
                              entry.frame_index, entry.timestamp);
        report.per_frame[i] = r.measurement;
        report.masks[i] = {mask_file_name(entry.path, entry.frame_index),
                           entry.path.filename().string(), std::move(r.segmentation.mask)};
    });
    report.population = population_curve({report.per_frame}, cfg.spread_fraction);
    return report;
}

/// Scores each mask against the truth mask named like its source frame, if any.
inline void attach_truth(SequenceReport& report, const fs::path& truth_dir) {
    std::vector<std::optional<EvalResult>> results;
    for (const auto& m : report.masks) {
        const auto truth_path = truth_dir / m.source_name;
        if (!fs::exists(truth_path)) {
            results.push_back(std::nullopt);
            continue;
        }
        results.push_back(evaluate(m.mask, load_mask(truth_path)));
    }
    report.eval = std::move(results);
}

// ---------------------------------------------------------------------------
// Ground-truth evaluation of mask directories
// ---------------------------------------------------------------------------

struct EvalPair {
    std::string file_name;
    EvalResult result;
};

struct EvalSummary {
    std::vector<EvalPair> pairs;
    std::vector<std::string> skipped;  // predictions without a truth mask
    double mean_dice = 0.0;
    double min_dice = 0.0;
    double mean_iou = 0.0;
};

inline EvalSummary run_eval(const fs::path& pred_dir, const fs::path& truth_dir) {
    if (!fs::is_directory(pred_dir)) throw IoError("not a directory: " + pred_dir.string());
    if (!fs::is_directory(truth_dir)) throw IoError("not a directory: " + truth_dir.string());
    FrameSequence preds;
    try {
        preds = load_sequence(pred_dir, "*.png");
    } catch (const EmptyInputError&) {
        // A batch output directory keeps its masks one level down.
        if (!fs::is_directory(pred_dir / "masks")) throw;
        preds = load_sequence(pred_dir / "masks", "*.png");
    }
    EvalSummary s;
    for (const auto& f : preds.frames) {
        const auto name = f.path.filename().string();
        auto truth_path = truth_dir / name;
        if (!fs::exists(truth_path)) {
            // Batch masks are named <stem>_<index>.png after their source frame.
            const auto stem = f.path.stem().string();
            if (const auto cut = stem.find_last_of('_'); cut != std::string::npos && cut > 0) {
                truth_path = truth_dir / (stem.substr(0, cut) + f.path.extension().string());
            }
        }
        if (!fs::exists(truth_path)) {
            s.skipped.push_back(name);
            continue;
        }
        s.pairs.push_back({name, evaluate(load_mask(f.path), load_mask(truth_path))});
    }
    if (s.pairs.empty()) {
        throw EmptyInputError("no prediction/truth mask pairs between " + pred_dir.string() +
                              " and " + truth_dir.string());
    }
    double dice = 0.0;
    double iou = 0.0;
    s.min_dice = std::numeric_limits<double>::infinity();
    for (const auto& p : s.pairs) {
        dice += p.result.dice;
        iou += p.result.iou;
        s.min_dice = std::min(s.min_dice, p.result.dice);
    }
    s.mean_dice = dice / static_cast<double>(s.pairs.size());
    s.mean_iou = iou / static_cast<double>(s.pairs.size());
    return s;
}

inline json to_json(const CellMeasurement& m) {
    return {{"frame_index", m.frame_index}, {"timestamp", m.timestamp},
            {"area", m.area},               {"perimeter", m.perimeter},
            {"circularity", m.circularity}, {"detected", m.detected}};
}

inline json to_json(const EvalResult& r) {
    return {{"dice", r.dice},
            {"iou", r.iou},
            {"perimeter_rel_error",
             std::isfinite(r.perimeter_rel_error) ? json(r.perimeter_rel_error) : json(nullptr)}};
}

inline json to_json(const EvalSummary& s) {
    json frames = json::array();
    for (const auto& p : s.pairs) {
        auto j = to_json(p.result);
        j["file"] = p.file_name;
        frames.push_back(std::move(j));
    }
    return {{"frames", frames},
            {"skipped", s.skipped},
            {"summary",
             {{"pairs", s.pairs.size()},
              {"mean_dice", s.mean_dice},
              {"min_dice", s.min_dice},
              {"mean_iou", s.mean_iou}}}};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kMeasurementsHeader =
    "frame,timestamp_min,area_px,perimeter_px,circularity,detected";

inline std::string format_measurement_row(const CellMeasurement& m) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%zu,%.6f,%.6f,%d", m.frame_index, m.timestamp, m.area,
                  m.perimeter, m.circularity, m.detected ? 1 : 0);
    return buf;
}

inline std::string measurements_csv(const std::vector<CellMeasurement>& rows) {
    std::string out = std::string(kMeasurementsHeader) + "\n";
    for (const auto& m : rows) out += format_measurement_row(m) + "\n";
    return out;
}

/// Inverse of measurements_csv (values carry the CSV's 6-decimal precision).
inline std::vector<CellMeasurement> parse_measurements_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMeasurementsHeader) {
        throw FormatError("measurements.csv: unexpected header");
    }
    std::vector<CellMeasurement> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CellMeasurement m;
        int detected = 0;
        unsigned long long area = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%llu,%lf,%lf,%d", &m.frame_index, &m.timestamp,
                        &area, &m.perimeter, &m.circularity, &detected) != 6 ||
            (detected != 0 && detected != 1)) {
            throw FormatError("measurements.csv: malformed row '" + line + "'");
        }
        m.area = static_cast<std::size_t>(area);
        m.detected = detected == 1;
        rows.push_back(m);
    }
    return rows;
}

inline std::string population_csv(const PopulationCurve& curve) {
    std::string out = "timestamp_min,fraction_fully_spread\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", p.timestamp, p.fraction_fully_spread);
        out += buf;
    }
    return out;
}

inline std::string evaluation_csv(const SequenceReport& report) {
    std::string out = "frame,file,dice,iou,perimeter_rel_error\n";
    char buf[256];
    for (std::size_t i = 0; i < report.masks.size() && report.eval; ++i) {
        const auto& e = (*report.eval)[i];
        if (!e) continue;
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f\n", report.per_frame[i].frame_index,
                      report.masks[i].file_name.c_str(), e->dice, e->iou, e->perimeter_rel_error);
        out += buf;
    }
    return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

/// measurements.csv, population.csv (if any), evaluation.csv (if any),
/// config.resolved.json and masks/<stem>_<index>.png.
inline void emit_report(const SequenceReport& report, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir / "masks", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "masks").string() + ": " + ec.message());
    write_text(out_dir / "measurements.csv", measurements_csv(report.per_frame));
    if (report.population) write_text(out_dir / "population.csv", population_csv(*report.population));
    if (report.eval) write_text(out_dir / "evaluation.csv", evaluation_csv(report));
    write_text(out_dir / "config.resolved.json", to_json(report.config_echo).dump(2) + "\n");
    for (const auto& m : report.masks) save_mask(m.mask, out_dir / "masks" / m.file_name);
}

}  // namespace dicseg
