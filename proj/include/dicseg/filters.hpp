#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dicseg/error.hpp"
#include "dicseg/fft.hpp"
#include "dicseg/image_io.hpp"
#include "dicseg/raster.hpp"

namespace dicseg {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct FlatFieldParams {
    double sigma_small = 3.0;
    double sigma_large = 40.0;

    void validate() const {
        if (!(sigma_small > 0.0) || !(sigma_large > sigma_small) || !std::isfinite(sigma_large)) {
            throw ParameterError("flat field sigmas must satisfy 0 < sigma_small < sigma_large (got " +
                                 std::to_string(sigma_small) + ", " + std::to_string(sigma_large) +
                                 ")");
        }
    }
    friend bool operator==(const FlatFieldParams&, const FlatFieldParams&) = default;
};

struct GNeighborParams {
    /// Similarity bound; computed per image when absent.
    std::optional<double> threshold_override;

    void validate() const {
        if (threshold_override && !(*threshold_override >= 0.0)) {
            throw ParameterError("G-neighbor threshold must be >= 0");
        }
    }
    friend bool operator==(const GNeighborParams&, const GNeighborParams&) = default;
};

/// Frequency-domain pass-band radii in spectrum pixels: d1 outer, d2 inner.
struct BandPassParams {
    double d1 = 0.0;
    double d2 = 0.0;

    void validate() const {
        if (!std::isfinite(d1) || !std::isfinite(d2) || !(d2 >= 0.0) || !(d1 > d2)) {
            throw ParameterError("band-pass radii must satisfy d1 > d2 >= 0 (got d1=" +
                                 std::to_string(d1) + ", d2=" + std::to_string(d2) + ")");
        }
    }
    friend bool operator==(const BandPassParams&, const BandPassParams&) = default;
};

// ---------------------------------------------------------------------------
// Gaussian blur and flat-field correction
// ---------------------------------------------------------------------------

namespace detail {

/// Ranges at round-off level are treated as flat so that filters which
/// annihilate an input do not rescale arithmetic noise up to [0,1].
inline constexpr double kFlatRange = 1e-12;

inline GrayImage normalize_or_flat(const GrayImage& img) {
    if (img.empty()) return img;
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    if (*hi - *lo <= kFlatRange) return GrayImage(img.width(), img.height(), 0.0);
    return normalize(img);
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

}  // namespace detail

/// Separable Gaussian blur with symmetric reflection at the borders.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("Gaussian sigma must be positive");
    const auto kernel = detail::gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = img.width();
    const int h = img.height();

    GrayImage tmp(w, h);
    std::vector<int> xmap(w + 2 * radius);
    for (int i = 0; i < static_cast<int>(xmap.size()); ++i) xmap[i] = reflect_index(i - radius, w);
    for (int y = 0; y < h; ++y) {
        auto src = img.row(y);
        auto dst = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * src[xmap[x + k]];
            dst[x] = acc;
        }
    }

    GrayImage out(w, h);
    std::vector<int> ymap(h + 2 * radius);
    for (int i = 0; i < static_cast<int>(ymap.size()); ++i) ymap[i] = reflect_index(i - radius, h);
    std::vector<double> acc(w);
    for (int y = 0; y < h; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int k = 0; k <= 2 * radius; ++k) {
            const double c = kernel[k];
            auto src = tmp.row(ymap[y + k]);
            for (int x = 0; x < w; ++x) acc[x] += c * src[x];
        }
        std::copy(acc.begin(), acc.end(), out.row(y).begin());
    }
    return out;
}

/// Difference of Gaussians (small minus large) followed by normalization.
inline GrayImage flat_field_correct(const GrayImage& img, const FlatFieldParams& p) {
    require_filterable(img, "flat_field_correct");
    p.validate();
    const auto fine = gaussian_blur(img, p.sigma_small);
    const auto coarse = gaussian_blur(img, p.sigma_large);
    GrayImage diff(img.width(), img.height());
    auto d = diff.pixels();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fine.pixels()[i] - coarse.pixels()[i];
    return detail::normalize_or_flat(diff);
}

// ---------------------------------------------------------------------------
// G-neighbor smoothing
// ---------------------------------------------------------------------------

/// (mean of 3x3 window maxima - mean of 3x3 window minima)^2 over interior windows.
inline double g_neighbor_threshold(const GrayImage& img) {
    require_filterable(img, "g_neighbor_threshold");
    const int w = img.width();
    const int h = img.height();
    // Horizontal 3-extrema per row, then vertical 3-extrema over those.
    GrayImage row_max(w - 2, h);
    GrayImage row_min(w - 2, h);
    for (int y = 0; y < h; ++y) {
        auto src = img.row(y);
        for (int x = 1; x < w - 1; ++x) {
            row_max(x - 1, y) = std::max({src[x - 1], src[x], src[x + 1]});
            row_min(x - 1, y) = std::min({src[x - 1], src[x], src[x + 1]});
        }
    }
    double sum_max = 0.0;
    double sum_min = 0.0;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 0; x < w - 2; ++x) {
            sum_max += std::max({row_max(x, y - 1), row_max(x, y), row_max(x, y + 1)});
            sum_min += std::min({row_min(x, y - 1), row_min(x, y), row_min(x, y + 1)});
        }
    }
    const double windows = static_cast<double>(w - 2) * (h - 2);
    const double diff = sum_max / windows - sum_min / windows;
    return diff * diff;
}

/// Each interior pixel becomes the uniform mean of itself and the 8-neighbors
/// within the similarity bound; the one-pixel border is copied.
inline GrayImage g_neighbor_smooth(const GrayImage& img, const GNeighborParams& p = {}) {
    require_filterable(img, "g_neighbor_smooth");
    p.validate();
    const double bound = p.threshold_override ? *p.threshold_override : g_neighbor_threshold(img);
    GrayImage out = img;
    for (int y = 1; y < img.height() - 1; ++y) {
        for (int x = 1; x < img.width() - 1; ++x) {
            const double c = img(x, y);
            // Accumulate offsets from the center so a uniform window is exact.
            double offset = 0.0;
            int count = 1;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double n = img(x + dx, y + dy);
                    if (std::abs(n - c) <= bound) {
                        offset += n - c;
                        ++count;
                    }
                }
            }
            out(x, y) = c + offset / count;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kuwahara
// ---------------------------------------------------------------------------

namespace detail {

/// Summed-area tables of x and x^2 over a reflect-padded copy.
struct PaddedMoments {
    int pad;
    int stride;  // padded width + 1
    std::vector<double> s1;
    std::vector<double> s2;

    PaddedMoments(const GrayImage& img, int pad_) : pad(pad_) {
        const int pw = img.width() + 2 * pad;
        const int ph = img.height() + 2 * pad;
        stride = pw + 1;
        s1.assign(static_cast<std::size_t>(stride) * (ph + 1), 0.0);
        s2.assign(s1.size(), 0.0);
        for (int y = 0; y < ph; ++y) {
            const int sy = reflect_index(y - pad, img.height());
            double r1 = 0.0;
            double r2 = 0.0;
            for (int x = 0; x < pw; ++x) {
                const double v = img(reflect_index(x - pad, img.width()), sy);
                r1 += v;
                r2 += v * v;
                const std::size_t at = static_cast<std::size_t>(y + 1) * stride + (x + 1);
                s1[at] = s1[at - stride] + r1;
                s2[at] = s2[at - stride] + r2;
            }
        }
    }

    /// Sums over the inclusive image-coordinate box [x0,x1]x[y0,y1].
    std::pair<double, double> box(int x0, int y0, int x1, int y1) const noexcept {
        const std::size_t a = static_cast<std::size_t>(y0 + pad) * stride + (x0 + pad);
        const std::size_t b = static_cast<std::size_t>(y0 + pad) * stride + (x1 + pad + 1);
        const std::size_t c = static_cast<std::size_t>(y1 + pad + 1) * stride + (x0 + pad);
        const std::size_t d = static_cast<std::size_t>(y1 + pad + 1) * stride + (x1 + pad + 1);
        return {s1[d] - s1[b] - s1[c] + s1[a], s2[d] - s2[b] - s2[c] + s2[a]};
    }
};

}  // namespace detail

/// Classic four-quadrant Kuwahara filter. Each (k+1)x(k+1) quadrant shares the
/// center row/column; the least-variance quadrant's mean wins, ties resolved
/// NW, NE, SW, SE. Borders are reflected.
inline GrayImage kuwahara(const GrayImage& img, int window = 5) {
    if (window < 5 || window % 2 == 0) {
        throw ParameterError("Kuwahara window must be odd and >= 5, got " + std::to_string(window));
    }
    if (img.width() <= window || img.height() <= window) {
        throw ParameterError("Kuwahara window " + std::to_string(window) +
                             " does not fit inside a " + std::to_string(img.width()) + "x" +
                             std::to_string(img.height()) + " image");
    }
    const int k = window / 2;
    const double n = static_cast<double>((k + 1) * (k + 1));
    const detail::PaddedMoments m(img, k);
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const std::array<std::array<int, 4>, 4> quads{{
                {x - k, y - k, x, y},  // NW
                {x, y - k, x + k, y},  // NE
                {x - k, y, x, y + k},  // SW
                {x, y, x + k, y + k},  // SE
            }};
            double best_var = std::numeric_limits<double>::infinity();
            double best_mean = 0.0;
            for (const auto& q : quads) {
                const auto [s1, s2] = m.box(q[0], q[1], q[2], q[3]);
                const double mean = s1 / n;
                const double var = std::max(0.0, s2 / n - mean * mean);
                if (var < best_var) {
                    best_var = var;
                    best_mean = mean;
                }
            }
            out(x, y) = best_mean;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Local standard deviation
// ---------------------------------------------------------------------------

/// Population standard deviation over a reflected window, then normalized.
inline GrayImage local_stddev(const GrayImage& img, int window = 3) {
    if (window < 3 || window % 2 == 0) {
        throw ParameterError("local stddev window must be odd and >= 3, got " +
                             std::to_string(window));
    }
    require_filterable(img, "local_stddev");
    const int r = window / 2;
    const int w = img.width();
    const int h = img.height();
    const double count = static_cast<double>(window) * window;
    std::vector<int> xmap(w + 2 * r);
    std::vector<int> ymap(h + 2 * r);
    for (int i = 0; i < static_cast<int>(xmap.size()); ++i) xmap[i] = reflect_index(i - r, w);
    for (int i = 0; i < static_cast<int>(ymap.size()); ++i) ymap[i] = reflect_index(i - r, h);

    GrayImage sd(w, h);
    std::vector<double> vals(static_cast<std::size_t>(window) * window);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t n = 0;
            double sum = 0.0;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (int dy = 0; dy < window; ++dy) {
                auto src = img.row(ymap[y + dy]);
                for (int dx = 0; dx < window; ++dx) {
                    const double v = src[xmap[x + dx]];
                    vals[n++] = v;
                    sum += v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
            if (lo == hi) {
                sd(x, y) = 0.0;
                continue;
            }
            const double mean = sum / count;
            double ss = 0.0;
            for (double v : vals) ss += (v - mean) * (v - mean);
            sd(x, y) = std::sqrt(ss / count);
        }
    }
    return normalize(sd);
}

// ---------------------------------------------------------------------------
// Frequency-domain band-pass
// ---------------------------------------------------------------------------

/// H(D) = exp(-D^2 / 2 d1^2) - exp(-D^2 / 2 d2^2); the d2 = 0 term is the
/// unit impulse at D = 0, so H(0) = 0 for every valid parameter pair.
inline double bandpass_response(double distance, const BandPassParams& p) {
    const double d2sq = distance * distance;
    const double outer = std::exp(-d2sq / (2.0 * p.d1 * p.d1));
    double inner;
    if (p.d2 == 0.0) {
        inner = distance == 0.0 ? 1.0 : 0.0;
    } else {
        inner = std::exp(-d2sq / (2.0 * p.d2 * p.d2));
    }
    return outer - inner;
}

/// Band-pass without the final rescale. Odd dimensions are padded to even by
/// repeating the last row/column, then cropped back afterwards.
inline GrayImage fft_bandpass_unnormalized(const GrayImage& img, const BandPassParams& p) {
    p.validate();
    if (img.empty()) throw ShapeError("fft_bandpass: empty image");
    const int w = img.width();
    const int h = img.height();
    const int pw = w + (w % 2);
    const int ph = h + (h % 2);

    fft::Spectrum2D spec(pw, ph);
    auto data = spec.data();
    for (int y = 0; y < ph; ++y) {
        auto src = img.row(std::min(y, h - 1));
        for (int x = 0; x < pw; ++x) data[static_cast<std::size_t>(y) * pw + x] = src[std::min(x, w - 1)];
    }
    spec.forward();
    for (int v = 0; v < ph; ++v) {
        const double fv = fft::signed_frequency(v, ph);
        for (int u = 0; u < pw; ++u) {
            const double fu = fft::signed_frequency(u, pw);
            data[static_cast<std::size_t>(v) * pw + u] *= bandpass_response(std::hypot(fu, fv), p);
        }
    }
    spec.inverse();
    const double scale = 1.0 / (static_cast<double>(pw) * ph);
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        auto dst = out.row(y);
        for (int x = 0; x < w; ++x) dst[x] = data[static_cast<std::size_t>(y) * pw + x].real() * scale;
    }
    return out;
}

inline GrayImage fft_bandpass(const GrayImage& img, const BandPassParams& p) {
    return detail::normalize_or_flat(fft_bandpass_unnormalized(img, p));
}

}  // namespace dicseg
