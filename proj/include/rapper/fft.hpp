#pragma once

#include "rapper/trace.hpp"

#include <complex>
#include <vector>

namespace rapper {

// Per-event amplitude spectrum of a time-domain window. Same W x E shape as
// the input; entry [k][e] = |DFT_k of channel e| / W, bin 0 is DC.
struct SpectrumWindow {
    Eigen::MatrixXd magnitudes;  // W rows (bins), E cols
    std::size_t start_index = 0;

    int bins() const { return static_cast<int>(magnitudes.rows()); }
    int events() const { return static_cast<int>(magnitudes.cols()); }
};

// Per-bin, per-event affine scaling fitted on a training spectrum population.
struct SpectrumNormStats {
    Eigen::MatrixXd mean;   // W x E
    Eigen::MatrixXd scale;  // W x E, strictly positive
};

// Full-length DFT of one real channel (no padding; bin frequencies are k/W).
std::vector<std::complex<double>> dft_channel(const Eigen::VectorXd& x);

SpectrumWindow dft_magnitudes(const Window& window);

// Divides each channel by its mean bin magnitude, making the spectrum a
// scale-free shape: a workload that is a scaled copy of another maps to the
// same shape, while periodic bursts keep their harmonic structure.
SpectrumWindow shape_normalize(const SpectrumWindow& spectrum, double eps = 1e-12);

SpectrumNormStats spectrum_normalizer(const std::vector<SpectrumWindow>& spectra);
SpectrumWindow normalize_spectrum(const SpectrumWindow& spectrum, const SpectrumNormStats& stats);
SpectrumWindow denormalize_spectrum(const SpectrumWindow& spectrum, const SpectrumNormStats& stats);

}  // namespace rapper
