#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

#include "dicseg/error.hpp"
#include "dicseg/raster.hpp"
#include "dicseg/segmentation.hpp"

namespace dicseg {

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

// ---------------------------------------------------------------------------
// Moore-neighbor contour tracing
// ---------------------------------------------------------------------------

namespace detail {

// Clockwise on screen (y grows downward), starting west.
inline constexpr std::array<Point, 8> kMoore{{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1},
}};

inline int moore_direction(int dx, int dy) noexcept {
    for (int i = 0; i < 8; ++i) {
        if (kMoore[i].x == dx && kMoore[i].y == dy) return i;
    }
    return -1;
}

/// Traces the outer boundary of the component containing `start`, which must
/// be its first pixel in row-major order (so its west neighbor is background).
/// Stops when the start pixel is about to be left toward the second contour
/// pixel again; the trace is deterministic in that state, so this closes the loop.
template <typename IsForeground>
std::vector<Point> moore_trace(int width, int height, Point start, IsForeground&& fg) {
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < width && y < height && fg(x, y);
    };
    struct Step {
        Point next;
        int backtrack;  // direction from `next` to the last background neighbor examined
        bool found;
    };
    auto advance = [&](Point p, int backtrack) -> Step {
        for (int i = 1; i <= 8; ++i) {
            const int d = (backtrack + i) % 8;
            const Point c{p.x + kMoore[d].x, p.y + kMoore[d].y};
            if (inside(c.x, c.y)) {
                const int prev = (d + 7) % 8;
                const Point b{p.x + kMoore[prev].x, p.y + kMoore[prev].y};
                return {c, moore_direction(b.x - c.x, b.y - c.y), true};
            }
        }
        return {p, backtrack, false};
    };

    std::vector<Point> contour{start};
    const Step first = advance(start, 0);
    if (!first.found) return contour;
    const Point second = first.next;
    Point cur = first.next;
    int back = first.backtrack;
    const std::size_t limit = static_cast<std::size_t>(width) * height * 4 + 16;
    while (true) {
        const Step s = advance(cur, back);
        if (cur == start && s.next == second) break;
        contour.push_back(cur);
        cur = s.next;
        back = s.backtrack;
        if (contour.size() > limit) throw Error("contour trace failed to close");
    }
    return contour;
}

}  // namespace detail

/// Clockwise Moore-neighbor boundary of a single 8-connected object, starting
/// at its top-most, then left-most pixel.
inline std::vector<Point> trace_contour(const BinaryMask& mask) {
    const auto comps = label_components(mask);
    if (comps.sizes.empty()) throw EmptyObjectError("trace_contour: mask has no foreground");
    if (comps.sizes.size() > 1) {
        throw PreconditionError("trace_contour: mask has " + std::to_string(comps.sizes.size()) +
                                " components, expected exactly one");
    }
    const auto first = comps.first_pixel.front();
    const Point start{static_cast<int>(first % mask.width()),
                      static_cast<int>(first / mask.width())};
    return detail::moore_trace(mask.width(), mask.height(), start,
                               [&](int x, int y) { return mask(x, y) != 0; });
}

/// Closed step-length sum (1 per axis step, sqrt(2) per diagonal).
/// A single-pixel contour counts as a unit square: 4.
inline double perimeter(const std::vector<Point>& contour) {
    if (contour.empty()) return 0.0;
    if (contour.size() == 1) return 4.0;
    double total = 0.0;
    for (std::size_t i = 0; i < contour.size(); ++i) {
        const Point& a = contour[i];
        const Point& b = contour[(i + 1) % contour.size()];
        const bool diagonal = a.x != b.x && a.y != b.y;
        total += diagonal ? std::numbers::sqrt2 : 1.0;
    }
    return total;
}

/// Sum of outer-contour perimeters over all 8-connected components.
inline double mask_perimeter(const BinaryMask& mask) {
    const auto comps = label_components(mask);
    double total = 0.0;
    for (std::size_t id = 0; id < comps.sizes.size(); ++id) {
        const auto first = comps.first_pixel[id];
        const Point start{static_cast<int>(first % mask.width()),
                          static_cast<int>(first / mask.width())};
        const int label = static_cast<int>(id);
        total += perimeter(detail::moore_trace(
            mask.width(), mask.height(), start,
            [&](int x, int y) { return comps.labels(x, y) == label; }));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Per-frame morphometrics
// ---------------------------------------------------------------------------

/// 4*pi*area / perimeter^2; 1 for an ideal circle.
inline double circularity(double area, double perim) {
    if (!(perim > 0.0)) throw UndefinedMeasureError("circularity undefined for perimeter 0");
    return 4.0 * std::numbers::pi * area / (perim * perim);
}

struct CellMeasurement {
    int frame_index = 0;
    double timestamp = 0.0;  // minutes
    std::size_t area = 0;    // pixels
    double perimeter = 0.0;  // pixels
    double circularity = 0.0;
    bool detected = false;

    friend bool operator==(const CellMeasurement&, const CellMeasurement&) = default;
};

inline CellMeasurement measure_mask(const BinaryMask& mask, int frame_index, double timestamp) {
    CellMeasurement m;
    m.frame_index = frame_index;
    m.timestamp = timestamp;
    m.area = count_foreground(mask);
    if (m.area == 0) return m;
    m.perimeter = perimeter(trace_contour(mask));
    m.circularity = circularity(static_cast<double>(m.area), m.perimeter);
    m.detected = true;
    return m;
}

/// An empty mask yields detected=false with zeroed metrics.
inline CellMeasurement measure_frame(const SegmentationResult& result, int frame_index,
                                     double timestamp) {
    return measure_mask(result.mask, frame_index, timestamp);
}

// ---------------------------------------------------------------------------
// Population spreading curve
// ---------------------------------------------------------------------------

struct PopulationPoint {
    double timestamp = 0.0;
    double fraction_fully_spread = 0.0;
    friend bool operator==(const PopulationPoint&, const PopulationPoint&) = default;
};

struct PopulationCurve {
    std::vector<PopulationPoint> points;
    double spread_fraction_threshold = 0.95;
};

/// A cell counts as fully spread from the first time its area reaches
/// `fraction` of its own series maximum. Cells never detected never count.
/// Points are emitted at every timestamp present in any series.
inline PopulationCurve population_curve(const std::vector<std::vector<CellMeasurement>>& series,
                                        double fraction = 0.95) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ParameterError("spread fraction must lie in (0,1]");
    }
    if (series.empty()) throw ParameterError("population_curve: no cell series given");

    std::set<double> times;
    std::vector<std::optional<double>> reached;
    reached.reserve(series.size());
    for (const auto& cell : series) {
        if (cell.empty()) throw ParameterError("population_curve: empty cell series");
        auto ordered = cell;
        std::stable_sort(ordered.begin(), ordered.end(),
                         [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
        std::size_t peak = 0;
        for (const auto& m : ordered) {
            times.insert(m.timestamp);
            peak = std::max(peak, m.area);
        }
        std::optional<double> first;
        if (peak > 0) {
            const double target = fraction * static_cast<double>(peak);
            for (const auto& m : ordered) {
                if (static_cast<double>(m.area) >= target) {
                    first = m.timestamp;
                    break;
                }
            }
        }
        reached.push_back(first);
    }

    PopulationCurve curve;
    curve.spread_fraction_threshold = fraction;
    const double cells = static_cast<double>(series.size());
    for (double t : times) {
        const auto done = std::count_if(reached.begin(), reached.end(),
                                        [t](const auto& r) { return r && *r <= t; });
        curve.points.push_back({t, static_cast<double>(done) / cells});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Agreement with ground truth
// ---------------------------------------------------------------------------

struct EvalResult {
    double dice = 0.0;
    double iou = 0.0;
    /// |P(mask) - P(truth)| / P(truth); +inf when only the truth is empty.
    double perimeter_rel_error = 0.0;
};

inline EvalResult evaluate(const BinaryMask& mask, const BinaryMask& truth) {
    require_same_shape(mask, truth, "evaluate");
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t both = 0;
    auto pm = mask.pixels();
    auto pt = truth.pixels();
    for (std::size_t i = 0; i < pm.size(); ++i) {
        a += pm[i] != 0;
        b += pt[i] != 0;
        both += (pm[i] != 0) && (pt[i] != 0);
    }
    EvalResult r;
    if (a == 0 && b == 0) {
        r.dice = 1.0;
        r.iou = 1.0;
        r.perimeter_rel_error = 0.0;
        return r;
    }
    r.dice = 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
    r.iou = static_cast<double>(both) / static_cast<double>(a + b - both);
    const double p_truth = mask_perimeter(truth);
    const double p_mask = mask_perimeter(mask);
    if (p_truth > 0.0) {
        r.perimeter_rel_error = std::abs(p_mask - p_truth) / p_truth;
    } else {
        r.perimeter_rel_error = p_mask > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return r;
}

}  // namespace dicseg
