#pragma once

// Interactive per-frame tuning state: previews and accepted overrides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "dicseg/config.hpp"
#include "dicseg/error.hpp"
#include "dicseg/image_io.hpp"
#include "dicseg/measurement.hpp"
#include "dicseg/pipeline.hpp"

namespace dicseg {

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kAlphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (i < bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

/// Grayscale image with the mask's outer contours drawn in red.
inline RgbImage contour_overlay(const GrayImage& img, const BinaryMask& mask) {
    require_same_shape(img, mask, "contour_overlay");
    RgbImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(img(x, y), 0.0, 1.0) * 255.0));
            out(x, y) = {v, v, v};
        }
    }
    const auto comps = label_components(mask);
    for (std::size_t id = 0; id < comps.sizes.size(); ++id) {
        const auto first = comps.first_pixel[id];
        const Point start{static_cast<int>(first % mask.width()), static_cast<int>(first / mask.width())};
        const int label = static_cast<int>(id);
        for (const auto& p : detail::moore_trace(mask.width(), mask.height(), start,
                                                 [&](int x, int y) { return comps.labels(x, y) == label; })) {
            out(p.x, p.y) = {255, 0, 0};
        }
    }
    return out;
}

struct FrameInfo {
    int frame_index = 0;
    double timestamp = 0.0;
    bool has_override = false;
};

struct Preview {
    std::vector<std::uint8_t> filtered_png;
    std::vector<std::uint8_t> mask_png;
    std::vector<std::uint8_t> overlay_png;
    CellMeasurement measurement;
};

/// Checks a (d1, d2, threshold) triplet, naming every offending field.
inline void validate_triplet(const FrameOverride& t) {
    std::vector<std::string> fields;
    if (!std::isfinite(t.d1) || !std::isfinite(t.d2) || !(t.d1 > t.d2)) {
        fields.push_back("d1");
        fields.push_back("d2");
    } else if (!(t.d2 >= 0.0)) {
        fields.push_back("d2");
    }
    if (!(t.threshold >= 0.0 && t.threshold <= 1.0)) fields.push_back("threshold");
    if (!fields.empty()) {
        throw ValidationError("band-pass needs d1 > d2 >= 0 and threshold in [0,1]", fields);
    }
}

class TuneSession {
public:
    TuneSession(FrameSequence sequence, PipelineConfig base, bool use_cache = true)
        : sequence_(std::move(sequence)), base_(std::move(base)), use_cache_(use_cache) {
        if (sequence_.empty()) throw EmptyInputError("tuning session needs at least one frame");
        base_.frame_overrides.clear();
        base_.mode = RunMode::Single;
        base_.validate();
    }

    const FrameSequence& sequence() const noexcept { return sequence_; }
    const PipelineConfig& base_config() const noexcept { return base_; }

    std::vector<FrameInfo> list_frames() const {
        std::shared_lock lock(state_mutex_);
        std::vector<FrameInfo> out;
        for (const auto& f : sequence_.frames) {
            out.push_back({f.frame_index, f.timestamp, accepted_.contains(f.frame_index)});
        }
        return out;
    }

    const FrameEntry& frame(int frame_index) const {
        if (frame_index < 0 || static_cast<std::size_t>(frame_index) >= sequence_.size()) {
            throw NotFoundError("no frame with index " + std::to_string(frame_index));
        }
        return sequence_.frames[static_cast<std::size_t>(frame_index)];
    }

    std::vector<std::uint8_t> original_png(int frame_index) const {
        return png::read_file_bytes(frame(frame_index).path);
    }

    /// Pure in (frame_index, triplet); never touches the accepted overrides.
    Preview preview(int frame_index, const FrameOverride& t) const {
        const auto& entry = frame(frame_index);
        validate_triplet(t);
        const auto pre = prefiltered(frame_index);
        const auto filtered = fft_bandpass(*pre, t.bandpass());
        auto seg = segment(filtered, t.threshold, base_.effective_plan());
        Preview p;
        p.measurement = measure_frame(seg, entry.frame_index, entry.timestamp);
        p.filtered_png = encode_gray_png(filtered, 8);
        p.mask_png = encode_mask_png(seg.mask);
        p.overlay_png = encode_rgb_png(contour_overlay(normalize(load_frame(entry.path)), seg.mask));
        return p;
    }

    /// Last write wins.
    void accept(int frame_index, const FrameOverride& t) {
        frame(frame_index);
        validate_triplet(t);
        std::unique_lock lock(state_mutex_);
        accepted_[frame_index] = t;
    }

    std::map<int, FrameOverride> accepted() const {
        std::shared_lock lock(state_mutex_);
        return accepted_;
    }

    /// {"frame_overrides": {...}}, ready to merge over a configuration.
    json export_overrides() const {
        return {{"frame_overrides", overrides_to_json(accepted())}};
    }

private:
    std::shared_ptr<const GrayImage> prefiltered(int frame_index) const {
        if (use_cache_) {
            std::lock_guard lock(cache_mutex_);
            if (auto it = cache_.find(frame_index); it != cache_.end()) return it->second;
        }
        auto img = std::make_shared<const GrayImage>(prefilter(load_frame(frame(frame_index).path), base_));
        if (use_cache_) {
            std::lock_guard lock(cache_mutex_);
            cache_.try_emplace(frame_index, img);
        }
        return img;
    }

    FrameSequence sequence_;
    PipelineConfig base_;
    bool use_cache_;
    mutable std::shared_mutex state_mutex_;
    std::map<int, FrameOverride> accepted_;
    mutable std::mutex cache_mutex_;
    mutable std::map<int, std::shared_ptr<const GrayImage>> cache_;
};

}  // namespace dicseg
