/// @file fft.hpp
/// @brief Thin RAII wrapper over FFTW for 2-D complex transforms on a torus grid.
#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <vector>

#include "nkflex/error.hpp"

namespace nkflex {

class Fft2 {
public:
    Fft2(int nx, int ny) : nx_(nx), ny_(ny), n_(static_cast<std::size_t>(nx) * ny) {
        buf_ = fftw_alloc_complex(n_);
        if (!buf_) throw Error("FFTW allocation failed");
        fwd_ = fftw_plan_dft_2d(ny_, nx_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(ny_, nx_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;
    ~Fft2() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }

    /// In place, unnormalized forward transform.
    void forward(std::vector<std::complex<double>>& data) { run(fwd_, data, 1.0); }
    /// In place inverse transform including the 1/N normalization.
    void inverse(std::vector<std::complex<double>>& data) { run(bwd_, data, 1.0 / static_cast<double>(n_)); }

    /// Signed integer frequency of index k on an axis with n samples.
    static int frequency(int k, int n) { return k <= n / 2 ? k : k - n; }

private:
    void run(fftw_plan p, std::vector<std::complex<double>>& data, double scale) {
        if (data.size() != n_) throw PreconditionError("FFT size mismatch");
        std::memcpy(buf_, data.data(), n_ * sizeof(fftw_complex));
        fftw_execute(p);
        const auto* out = reinterpret_cast<const std::complex<double>*>(buf_);
        for (std::size_t k = 0; k < n_; ++k) data[k] = out[k] * scale;
    }

    int nx_, ny_;
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

}  // namespace nkflex
