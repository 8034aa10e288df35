#pragma once

#include <vector>

#include "pantcr/raster.hpp"

namespace pantcr {

// Per-channel amplitude/phase of the orthonormal 2-D DFT. Planes are stored
// channel-major (plane b is h*w doubles). Phase lies in (-pi, pi].
struct FrequencyPair {
    int h = 0, w = 0, c = 0;
    std::vector<double> amp;
    std::vector<double> phase;

    double& a(int b, int y, int x) { return amp[(size_t(b) * h + y) * w + x]; }
    double a(int b, int y, int x) const { return amp[(size_t(b) * h + y) * w + x]; }
    double& p(int b, int y, int x) { return phase[(size_t(b) * h + y) * w + x]; }
    double p(int b, int y, int x) const { return phase[(size_t(b) * h + y) * w + x]; }
};

FrequencyPair decompose(const MultiBandRaster& img);
FrequencyPair decompose(const Tensor& grid);

// Inverse transform of amp*exp(i*phase); returns the real part.
// max_imag, when given, receives the largest |imaginary| residue.
Tensor recompose_tensor(const FrequencyPair& fp, double* max_imag = nullptr);
MultiBandRaster recompose(const FrequencyPair& fp, const std::vector<double>& wavelengths_nm,
                          double gsd_m, double* max_imag = nullptr);

// x * sigmoid(|x - avgpool(x)|), stride-1 window of side 2*pool_radius+1,
// reflect padding. Applied per band.
MultiBandRaster highpass_contrast_filter(const MultiBandRaster& x, int pool_radius);

// Recompose with amplitude from one image and phase from another.
MultiBandRaster swap_amplitude(const MultiBandRaster& amp_from, const MultiBandRaster& phase_from);

}  // namespace pantcr
