#pragma once

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "dicseg/error.hpp"
#include "dicseg/png_codec.hpp"
#include "dicseg/raster.hpp"

namespace dicseg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Pixel rescaling
// ---------------------------------------------------------------------------

/// Affine rescale to [0,1]. A constant image maps to all zeros.
inline GrayImage normalize(const GrayImage& img) {
    if (img.empty()) return img;
    const auto [lo_it, hi_it] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    GrayImage out(img.width(), img.height(), 0.0);
    if (!(hi > lo)) return out;
    const double scale = hi - lo;
    auto src = img.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        // Endpoints are pinned so repeated normalization is a fixed point.
        if (src[i] == lo) {
            dst[i] = 0.0;
        } else if (src[i] == hi) {
            dst[i] = 1.0;
        } else {
            dst[i] = std::clamp((src[i] - lo) / scale, 0.0, 1.0);
        }
    }
    return out;
}

inline GrayImage crop(const GrayImage& img, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.width() || y + h > img.height()) {
        throw BoundsError("crop rectangle (x=" + std::to_string(x) + ", y=" + std::to_string(y) +
                          ", w=" + std::to_string(w) + ", h=" + std::to_string(h) +
                          ") is outside the " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " image");
    }
    GrayImage out(w, h);
    for (int r = 0; r < h; ++r) {
        auto src = img.row(y + r).subspan(x, w);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNG frames and masks
// ---------------------------------------------------------------------------

inline GrayImage gray_from_png(const png::Decoded& d, const std::string& name) {
    if (d.channels != 1) {
        throw FormatError(name + ": expected a single-channel image, found " +
                          std::to_string(d.channels) + " channels");
    }
    const double maxval = d.bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<double> data(d.samples.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = d.samples[i] / maxval;
    return GrayImage(d.width, d.height, std::move(data));
}

/// Loads a single-channel 8/16-bit PNG, dividing by the bit-depth maximum.
inline GrayImage load_frame(const fs::path& path) {
    return gray_from_png(png::decode_file(path), path.string());
}

inline GrayImage load_frame_from_memory(std::span<const std::uint8_t> bytes,
                                        const std::string& name = "<memory>") {
    return gray_from_png(png::decode(bytes, name), name);
}

/// Any nonzero sample is foreground (accepts 8- and 16-bit masks).
inline BinaryMask load_mask(const fs::path& path) {
    const auto d = png::decode_file(path);
    if (d.channels != 1) {
        throw FormatError(path.string() + ": expected a single-channel mask, found " +
                          std::to_string(d.channels) + " channels");
    }
    BinaryMask mask(d.width, d.height, 0);
    auto dst = mask.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = d.samples[i] > 0 ? 1 : 0;
    return mask;
}

inline std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
    std::vector<std::uint16_t> samples(mask.size());
    auto src = mask.pixels();
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = src[i] ? 255 : 0;
    return png::encode(mask.width(), mask.height(), 1, 8, samples);
}

/// Writes {0,255} 8-bit grayscale.
inline void save_mask(const BinaryMask& mask, const fs::path& path) {
    png::write_file(path, encode_mask_png(mask));
}

/// Quantizes [0,1] intensities (clamped) to the given bit depth.
inline std::vector<std::uint8_t> encode_gray_png(const GrayImage& img, int bit_depth = 8) {
    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<std::uint16_t> samples(img.size());
    auto src = img.pixels();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(src[i], 0.0, 1.0) * maxval));
    }
    return png::encode(img.width(), img.height(), 1, bit_depth, samples);
}

inline void save_gray(const GrayImage& img, const fs::path& path, int bit_depth = 16) {
    png::write_file(path, encode_gray_png(img, bit_depth));
}

inline std::vector<std::uint8_t> encode_rgb_png(const RgbImage& img) {
    std::vector<std::uint16_t> samples;
    samples.reserve(img.size() * 3);
    for (const auto& p : img.pixels()) {
        samples.push_back(p.r);
        samples.push_back(p.g);
        samples.push_back(p.b);
    }
    return png::encode(img.width(), img.height(), 3, 8, samples);
}

// ---------------------------------------------------------------------------
// Time-lapse sequences
// ---------------------------------------------------------------------------

struct FrameEntry {
    int frame_index = 0;     // zero-based position in the sequence
    double timestamp = 0.0;  // minutes
    fs::path path;
    std::optional<long long> file_number;  // index embedded in the file name
};

struct FrameSequence {
    std::vector<FrameEntry> frames;
    double interval = 10.0;

    std::size_t size() const noexcept { return frames.size(); }
    bool empty() const noexcept { return frames.empty(); }
};

/// Trailing integer of a `<stem>_<index>` style file stem, if any.
inline std::optional<long long> embedded_number(const fs::path& path) {
    const std::string stem = path.stem().string();
    auto end = stem.find_last_of("0123456789");
    if (end == std::string::npos) return std::nullopt;
    auto begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    const auto digits = stem.substr(begin, end - begin + 1);
    if (digits.size() > 18) return std::nullopt;
    return std::stoll(digits);
}

/// Matches `pattern` (shell glob) in `dir`, ordered by embedded frame number.
inline FrameSequence load_sequence(const fs::path& dir, const std::string& pattern = "*.png",
                                   double interval = 10.0) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a readable directory: " + dir.string());
    if (!(interval > 0.0)) throw ParameterError("frame interval must be positive");

    struct Candidate {
        fs::path path;
        std::optional<long long> number;
    };
    std::vector<Candidate> found;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) {
            found.push_back({entry.path(), embedded_number(entry.path())});
        }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    if (found.empty()) {
        throw EmptyInputError("no files matching '" + pattern + "' in " + dir.string());
    }
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
        if (a.number.has_value() != b.number.has_value()) return !a.number.has_value();
        if (a.number != b.number) return *a.number < *b.number;
        return a.path.filename() < b.path.filename();
    });

    FrameSequence seq;
    seq.interval = interval;
    seq.frames.reserve(found.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
        const int idx = static_cast<int>(i);
        seq.frames.push_back({idx, idx * interval, found[i].path, found[i].number});
    }
    return seq;
}

}  // namespace dicseg
