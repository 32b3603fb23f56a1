#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dicseg/error.hpp"

namespace dicseg {

/// Dense row-major 2-D raster. Value type; copying copies the pixels.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;

    Raster(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        if (width < 0 || height < 0) {
            throw ShapeError("negative raster dimensions " + std::to_string(width) + "x" +
                             std::to_string(height));
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Raster(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 0 || height < 0 ||
            data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw ShapeError("raster data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(width) + "x" +
                             std::to_string(height));
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int x, int y) noexcept {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }
    const T& operator()(int x, int y) const noexcept {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::span<T> pixels() noexcept { return data_; }
    std::span<const T> pixels() const noexcept { return data_; }

    std::span<T> row(int y) noexcept {
        return std::span<T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
    }
    std::span<const T> row(int y) const noexcept {
        return std::span<const T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Normalized intensities, nominally in [0,1].
using GrayImage = Raster<double>;

/// Foreground = 1, background = 0. Stored as bytes to avoid vector<bool>.
using BinaryMask = Raster<std::uint8_t>;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};
using RgbImage = Raster<Rgb>;

template <typename A, typename B>
bool same_shape(const Raster<A>& a, const Raster<B>& b) noexcept {
    return a.width() == b.width() && a.height() == b.height();
}

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* what) {
    if (!same_shape(a, b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.width()) +
                         "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                         "x" + std::to_string(b.height()));
    }
}

/// Neighborhood filters need at least one full 3x3 window.
inline void require_filterable(const GrayImage& img, const char* what) {
    if (img.width() < 3 || img.height() < 3) {
        throw ShapeError(std::string(what) + ": image must be at least 3x3, got " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
}

/// Half-sample symmetric reflection (..cba|abc|cba..), valid for any offset.
inline int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

inline std::size_t count_foreground(const BinaryMask& mask) noexcept {
    std::size_t n = 0;
    for (auto v : mask.pixels()) n += v != 0;
    return n;
}

}  // namespace dicseg
