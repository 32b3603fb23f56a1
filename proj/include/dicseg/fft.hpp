#pragma once

// RAII wrapper over FFTW complex-to-complex 2-D transforms.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <span>

namespace dicseg::fft {

namespace detail {

/// FFTW's planner is not thread-safe; execution is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

struct PlanDestroy {
    void operator()(fftw_plan_s* p) const noexcept {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};

}  // namespace detail

/// Complex row-major buffer of height x width with forward/inverse plans.
///
/// Buffers come from fftw_malloc so alignment (and therefore the chosen
/// codelets) is the same on every call; FFTW_ESTIMATE plans are deterministic.
class Spectrum2D {
public:
    Spectrum2D(int width, int height) : width_(width), height_(height) {
        const std::size_t n = static_cast<std::size_t>(width) * height;
        buffer_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
        if (!buffer_) throw std::bad_alloc();
        std::lock_guard lock(detail::planner_mutex());
        forward_.reset(fftw_plan_dft_2d(height, width, buffer_.get(), buffer_.get(),
                                        FFTW_FORWARD, FFTW_ESTIMATE));
        inverse_.reset(fftw_plan_dft_2d(height, width, buffer_.get(), buffer_.get(),
                                        FFTW_BACKWARD, FFTW_ESTIMATE));
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    std::span<std::complex<double>> data() noexcept {
        // fftw_complex is layout-compatible with std::complex<double>.
        return {reinterpret_cast<std::complex<double>*>(buffer_.get()),
                static_cast<std::size_t>(width_) * height_};
    }

    void forward() { fftw_execute(forward_.get()); }

    /// Unnormalized inverse (caller divides by width*height).
    void inverse() { fftw_execute(inverse_.get()); }

private:
    int width_;
    int height_;
    std::unique_ptr<fftw_complex, detail::FftwFree> buffer_;
    std::unique_ptr<fftw_plan_s, detail::PlanDestroy> forward_;
    std::unique_ptr<fftw_plan_s, detail::PlanDestroy> inverse_;
};

/// Signed frequency of DFT bin k out of n (k >= n/2 wraps negative).
inline int signed_frequency(int k, int n) noexcept { return k < (n + 1) / 2 ? k : k - n; }

}  // namespace dicseg::fft
