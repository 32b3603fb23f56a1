#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dicseg/error.hpp"
#include "dicseg/raster.hpp"

namespace dicseg {

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// Foreground where img > threshold (strict).
inline BinaryMask binarize(const GrayImage& img, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ParameterError("binarization threshold must lie in [0,1], got " +
                             std::to_string(threshold));
    }
    BinaryMask mask(img.width(), img.height(), 0);
    auto src = img.pixels();
    auto dst = mask.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
    return mask;
}

inline constexpr int kOtsuBins = 256;

inline int otsu_bin(double v) noexcept {
    const int b = static_cast<int>(std::clamp(v, 0.0, 1.0) * kOtsuBins);
    return std::min(b, kOtsuBins - 1);
}

/// Between-class-variance maximizing threshold over a 256-bin histogram of
/// [0,1]. Returns the upper edge of the last background bin, so
/// binarize(img, otsu_threshold(img)) selects the upper class.
inline double otsu_threshold(const GrayImage& img) {
    std::array<double, kOtsuBins> hist{};
    for (double v : img.pixels()) hist[otsu_bin(v)] += 1.0;
    const double total = static_cast<double>(img.size());
    const auto occupied = std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0; });
    if (occupied < 2) {
        throw PreconditionError("otsu_threshold: degenerate histogram (image is constant)");
    }
    double mu_total = 0.0;
    for (int i = 0; i < kOtsuBins; ++i) mu_total += i * hist[i] / total;

    double w0 = 0.0;
    double mu0 = 0.0;
    double best = -1.0;
    int best_bin = 0;
    for (int t = 0; t < kOtsuBins - 1; ++t) {
        w0 += hist[t] / total;
        mu0 += t * hist[t] / total;
        const double w1 = 1.0 - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double num = mu_total * w0 - mu0;
        const double between = num * num / (w0 * w1);
        if (between > best) {
            best = between;
            best_bin = t;
        }
    }
    return static_cast<double>(best_bin + 1) / kOtsuBins;
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

struct Components {
    Raster<int> labels;  // -1 background, otherwise component id
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> first_pixel;  // row-major offset of each component's first pixel
};

/// 8-connected labeling; ids follow row-major order of each component's first pixel.
inline Components label_components(const BinaryMask& mask) {
    Components c{Raster<int>(mask.width(), mask.height(), -1), {}, {}};
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y) || c.labels(x, y) >= 0) continue;
            const int id = static_cast<int>(c.sizes.size());
            std::size_t size = 0;
            c.labels(x, y) = id;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const auto [px, py] = stack.back();
                stack.pop_back();
                ++size;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = px + dx;
                        const int ny = py + dy;
                        if (mask.contains(nx, ny) && mask(nx, ny) && c.labels(nx, ny) < 0) {
                            c.labels(nx, ny) = id;
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
            c.sizes.push_back(size);
            c.first_pixel.push_back(static_cast<std::size_t>(y) * w + x);
        }
    }
    return c;
}

inline std::size_t count_components(const BinaryMask& mask) {
    return label_components(mask).sizes.size();
}

/// Keeps the largest 8-connected component; ties go to the earliest in row-major order.
inline BinaryMask largest_object(const BinaryMask& mask) {
    const auto comps = label_components(mask);
    BinaryMask out(mask.width(), mask.height(), 0);
    if (comps.sizes.empty()) return out;
    int keep = 0;
    for (int i = 1; i < static_cast<int>(comps.sizes.size()); ++i) {
        if (comps.sizes[i] > comps.sizes[keep]) keep = i;
    }
    auto lab = comps.labels.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < lab.size(); ++i) dst[i] = lab[i] == keep ? 1 : 0;
    return out;
}

/// Drops 8-connected components smaller than min_area pixels.
inline BinaryMask remove_specks(const BinaryMask& mask, int min_area) {
    if (min_area < 0) throw ParameterError("remove_specks: min_area must be >= 0");
    const auto comps = label_components(mask);
    BinaryMask out(mask.width(), mask.height(), 0);
    auto lab = comps.labels.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < lab.size(); ++i) {
        dst[i] = lab[i] >= 0 && comps.sizes[lab[i]] >= static_cast<std::size_t>(min_area) ? 1 : 0;
    }
    return out;
}

/// Background regions not 4-connected to the image border become foreground.
inline BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    BinaryMask outside(w, h, 0);
    std::vector<std::pair<int, int>> stack;
    auto seed = [&](int x, int y) {
        if (!mask(x, y) && !outside(x, y)) {
            outside(x, y) = 1;
            stack.push_back({x, y});
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    constexpr std::array<std::pair<int, int>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        for (const auto [dx, dy] : kSteps) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (mask.contains(nx, ny)) seed(nx, ny);
        }
    }
    BinaryMask out(w, h, 0);
    auto o = outside.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = o[i] ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// Disk morphology
// ---------------------------------------------------------------------------

namespace detail {

inline void require_radius(int radius, const char* what) {
    if (radius < 1 || radius > 3) {
        throw ParameterError(std::string(what) + ": structuring element radius must be in [1,3], got " +
                             std::to_string(radius));
    }
}

/// Half-width of the discrete disk {dx^2 + dy^2 <= r^2} on each row offset.
inline std::vector<int> disk_half_widths(int radius) {
    std::vector<int> hw(2 * radius + 1);
    for (int dy = -radius; dy <= radius; ++dy) {
        int w = 0;
        while ((w + 1) * (w + 1) + dy * dy <= radius * radius) ++w;
        hw[dy + radius] = w;
    }
    return hw;
}

/// Per-row prefix counts of foreground pixels, one extra column per row.
inline std::vector<int> row_prefix_counts(const BinaryMask& m) {
    const int w = m.width();
    std::vector<int> pre(static_cast<std::size_t>(w + 1) * m.height(), 0);
    for (int y = 0; y < m.height(); ++y) {
        int* p = pre.data() + static_cast<std::size_t>(y) * (w + 1);
        for (int x = 0; x < w; ++x) p[x + 1] = p[x] + (m(x, y) ? 1 : 0);
    }
    return pre;
}

/// Dilation; pixels outside the raster are background.
inline BinaryMask dilate_disk(const BinaryMask& m, int radius) {
    const auto hw = disk_half_widths(radius);
    const auto pre = row_prefix_counts(m);
    const int w = m.width();
    const int h = m.height();
    BinaryMask out(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int dy = -radius; dy <= radius; ++dy) {
                const int ry = y + dy;
                if (ry < 0 || ry >= h) continue;
                const int half = hw[dy + radius];
                const int x0 = std::max(0, x - half);
                const int x1 = std::min(w - 1, x + half);
                const int* p = pre.data() + static_cast<std::size_t>(ry) * (w + 1);
                if (p[x1 + 1] - p[x0] > 0) {
                    out(x, y) = 1;
                    break;
                }
            }
        }
    }
    return out;
}

/// Erosion; pixels outside the raster are background.
inline BinaryMask erode_disk(const BinaryMask& m, int radius) {
    const auto hw = disk_half_widths(radius);
    const auto pre = row_prefix_counts(m);
    const int w = m.width();
    const int h = m.height();
    BinaryMask out(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m(x, y)) continue;
            bool all = true;
            for (int dy = -radius; dy <= radius && all; ++dy) {
                const int ry = y + dy;
                const int half = hw[dy + radius];
                if (ry < 0 || ry >= h || x - half < 0 || x + half >= w) {
                    all = false;
                    break;
                }
                const int* p = pre.data() + static_cast<std::size_t>(ry) * (w + 1);
                all = p[x + half + 1] - p[x - half] == 2 * half + 1;
            }
            out(x, y) = all ? 1 : 0;
        }
    }
    return out;
}

inline BinaryMask pad_mask(const BinaryMask& m, int pad) {
    BinaryMask out(m.width() + 2 * pad, m.height() + 2 * pad, 0);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) out(x + pad, y + pad) = m(x, y);
    }
    return out;
}

inline BinaryMask unpad_mask(const BinaryMask& m, int pad) {
    BinaryMask out(m.width() - 2 * pad, m.height() - 2 * pad, 0);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) out(x, y) = m(x + pad, y + pad);
    }
    return out;
}

}  // namespace detail

/// Erosion by the disk {dx^2 + dy^2 <= r^2}; the image exterior counts as
/// background, so objects touching the border shrink away from it.
inline BinaryMask erode(const BinaryMask& mask, int radius) {
    detail::require_radius(radius, "erode");
    return detail::erode_disk(mask, radius);
}

inline BinaryMask dilate(const BinaryMask& mask, int radius) {
    detail::require_radius(radius, "dilate");
    return detail::dilate_disk(mask, radius);
}

/// Dilation then erosion by the disk. The exterior is background and the
/// dilated set is kept beyond the border until the erosion, which makes
/// closing extensive (close(m) contains m) right up to the image edge.
inline BinaryMask close(const BinaryMask& mask, int radius) {
    detail::require_radius(radius, "close");
    const auto padded = detail::pad_mask(mask, radius);
    const auto closed = detail::erode_disk(detail::dilate_disk(padded, radius), radius);
    return detail::unpad_mask(closed, radius);
}

// ---------------------------------------------------------------------------
// Morphology plans and segmentation
// ---------------------------------------------------------------------------

enum class MorphOp { Close, Erode, FillHoles, LargestObject, RemoveSpecks };

struct MorphStep {
    MorphOp op = MorphOp::FillHoles;
    int value = 0;  // radius for Close/Erode, min_area for RemoveSpecks

    static MorphStep close(int r) { return {MorphOp::Close, r}; }
    static MorphStep erode(int r) { return {MorphOp::Erode, r}; }
    static MorphStep fill_holes() { return {MorphOp::FillHoles, 0}; }
    static MorphStep largest_object() { return {MorphOp::LargestObject, 0}; }
    static MorphStep remove_specks(int min_area) { return {MorphOp::RemoveSpecks, min_area}; }

    friend bool operator==(const MorphStep&, const MorphStep&) = default;
};

inline const char* to_string(MorphOp op) {
    switch (op) {
        case MorphOp::Close: return "close";
        case MorphOp::Erode: return "erode";
        case MorphOp::FillHoles: return "fill_holes";
        case MorphOp::LargestObject: return "largest_object";
        case MorphOp::RemoveSpecks: return "remove_specks";
    }
    return "?";
}

inline MorphOp morph_op_from_string(const std::string& s) {
    if (s == "close") return MorphOp::Close;
    if (s == "erode") return MorphOp::Erode;
    if (s == "fill_holes") return MorphOp::FillHoles;
    if (s == "largest_object") return MorphOp::LargestObject;
    if (s == "remove_specks") return MorphOp::RemoveSpecks;
    throw ConfigError("unknown morphology step '" + s + "'");
}

struct MorphologyPlan {
    std::vector<MorphStep> steps;

    /// erode(1) > close(3) > fill holes > erode(1), then largest object.
    static MorphologyPlan standard() {
        return {{MorphStep::erode(1), MorphStep::close(3), MorphStep::fill_holes(),
                 MorphStep::erode(1), MorphStep::largest_object()}};
    }

    /// close(r) > largest object > fill holes > erode(r).
    static MorphologyPlan close_first(int radius = 3) {
        return {{MorphStep::close(radius), MorphStep::largest_object(), MorphStep::fill_holes(),
                 MorphStep::erode(radius)}};
    }

    void validate() const {
        if (steps.empty()) throw ParameterError("morphology plan is empty");
        int largest = 0;
        for (const auto& s : steps) {
            switch (s.op) {
                case MorphOp::Close:
                case MorphOp::Erode:
                    detail::require_radius(s.value, to_string(s.op));
                    break;
                case MorphOp::RemoveSpecks:
                    if (s.value < 0) throw ParameterError("remove_specks: min_area must be >= 0");
                    break;
                case MorphOp::LargestObject:
                    ++largest;
                    break;
                case MorphOp::FillHoles:
                    break;
            }
        }
        if (largest > 1) throw ParameterError("morphology plan lists largest_object more than once");
    }

    friend bool operator==(const MorphologyPlan&, const MorphologyPlan&) = default;
};

inline BinaryMask apply_step(const BinaryMask& mask, const MorphStep& step) {
    switch (step.op) {
        case MorphOp::Close: return close(mask, step.value);
        case MorphOp::Erode: return erode(mask, step.value);
        case MorphOp::FillHoles: return fill_holes(mask);
        case MorphOp::LargestObject: return largest_object(mask);
        case MorphOp::RemoveSpecks: return remove_specks(mask, step.value);
    }
    return mask;
}

struct SegmentationResult {
    BinaryMask mask;
    std::size_t object_area = 0;
    double threshold_used = 0.0;
};

/// Binarize, run the plan, and finish with largest_object unless the plan
/// already ends with it, so the mask holds at most one component.
inline SegmentationResult segment(const GrayImage& img, double threshold,
                                  const MorphologyPlan& plan) {
    plan.validate();
    BinaryMask mask = binarize(img, threshold);
    for (const auto& step : plan.steps) mask = apply_step(mask, step);
    if (plan.steps.back().op != MorphOp::LargestObject) mask = largest_object(mask);
    const std::size_t area = count_foreground(mask);
    return {std::move(mask), area, threshold};
}

}  // namespace dicseg
