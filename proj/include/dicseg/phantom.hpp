#pragma once

// Synthetic DIC-like frames with known ground truth, for demos and tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "dicseg/raster.hpp"

namespace dicseg::phantom {

/// Boundary radius at angle theta: radius * (1 + lobe_amplitude * cos(lobes * theta + phase)).
struct CellShape {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 10.0;
    int lobes = 0;
    double lobe_amplitude = 0.0;
    double phase = 0.0;

    double boundary(double theta) const {
        return radius * (1.0 + lobe_amplitude * std::cos(lobes * theta + phase));
    }

    /// Radial coordinate in units of the local boundary radius (1 on the rim).
    double relative_radius(double x, double y) const {
        const double dx = x - cx;
        const double dy = y - cy;
        return std::hypot(dx, dy) / boundary(std::atan2(dy, dx));
    }

    BinaryMask mask(int width, int height) const {
        BinaryMask m(width, height, 0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) m(x, y) = relative_radius(x, y) <= 1.0 ? 1 : 0;
        }
        return m;
    }
};

/// Rasterized disk {(x-cx)^2 + (y-cy)^2 <= r^2}.
inline BinaryMask disk_mask(int width, int height, double cx, double cy, double r) {
    BinaryMask m(width, height, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            m(x, y) = dx * dx + dy * dy <= r * r ? 1 : 0;
        }
    }
    return m;
}

struct Imaging {
    double background = 0.35;
    double noise_sigma = 0.03;
    double ramp = 0.15;  // total shading change across the frame diagonal
    std::uint64_t seed = 1;
};

namespace detail {

inline GrayImage background_field(int width, int height, const Imaging& im) {
    GrayImage img(width, height);
    const double span = static_cast<double>(width + height - 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img(x, y) = im.background + im.ramp * ((x + y) / span - 0.5);
        }
    }
    return img;
}

inline void add_noise_and_clamp(GrayImage& img, const Imaging& im) {
    std::mt19937_64 rng(im.seed);
    std::normal_distribution<double> noise(0.0, im.noise_sigma);
    for (auto& v : img.pixels()) {
        v += im.noise_sigma > 0.0 ? noise(rng) : 0.0;
        v = std::clamp(v, 0.0, 1.0);
    }
}

}  // namespace detail

/// Positive-meniscus (lens) cell: height sqrt(1 - rho^2) inside the rim.
inline GrayImage lens_cell(int width, int height, const CellShape& shape, double amplitude,
                           const Imaging& im) {
    GrayImage img = detail::background_field(width, height, im);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double rho = shape.relative_radius(x, y);
            if (rho <= 1.0) img(x, y) += amplitude * std::sqrt(1.0 - rho * rho);
        }
    }
    detail::add_noise_and_clamp(img, im);
    return img;
}

/// "Sombrero" cell: a bright compact core over a faint, wide body whose
/// intensity sits close to the background.
struct Sombrero {
    CellShape body;
    double core_fraction = 0.3;    // core radius relative to the body
    double core_amplitude = 0.3;
    double body_amplitude = 0.03;
    double collar_amplitude = 0.05;  // dark lamella rim (subtracted)
    double collar_width = 3.0;      // pixels
};

inline GrayImage sombrero_cell(int width, int height, const Sombrero& s, const Imaging& im) {
    GrayImage img = detail::background_field(width, height, im);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double rho = s.body.relative_radius(x, y);
            if (rho > 1.0) continue;
            img(x, y) += s.body_amplitude * std::sqrt(1.0 - rho * rho);
            const double from_rim = (1.0 - rho) * s.body.boundary(std::atan2(y - s.body.cy, x - s.body.cx));
            if (from_rim <= s.collar_width) img(x, y) -= s.collar_amplitude;
            const double rc = rho / s.core_fraction;
            if (rc <= 1.0) img(x, y) += s.core_amplitude * std::sqrt(1.0 - rc * rc);
        }
    }
    detail::add_noise_and_clamp(img, im);
    return img;
}

struct SpreadingFrame {
    GrayImage image;
    BinaryMask truth;
    CellShape shape;
};

/// A cell spreading over `frames` frames: the rim radius grows from r0 to r1
/// along a saturating curve while the lobes slowly rotate.
inline std::vector<SpreadingFrame> spreading_sequence(int frames, int width, int height,
                                                      double r0, double r1, double amplitude,
                                                      const Imaging& im) {
    std::vector<SpreadingFrame> out;
    out.reserve(frames);
    for (int i = 0; i < frames; ++i) {
        const double t = frames > 1 ? static_cast<double>(i) / (frames - 1) : 1.0;
        CellShape shape;
        shape.cx = width / 2.0;
        shape.cy = height / 2.0;
        shape.radius = r0 + (r1 - r0) * (1.0 - std::exp(-4.0 * t)) / (1.0 - std::exp(-4.0));
        shape.lobes = 3;
        shape.lobe_amplitude = 0.08;
        shape.phase = 0.3 * t * std::numbers::pi;
        Imaging frame_im = im;
        frame_im.seed = im.seed * 1000003ULL + static_cast<std::uint64_t>(i);
        out.push_back({lens_cell(width, height, shape, amplitude, frame_im), shape.mask(width, height),
                       shape});
    }
    return out;
}

}  // namespace dicseg::phantom
