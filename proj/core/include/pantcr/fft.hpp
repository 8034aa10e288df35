#pragma once

#include <cstddef>

namespace pantcr {

// Orthonormal 2-D complex DFT (scale 1/sqrt(h*w) in both directions).
// Buffers are h*w doubles each, row-major. In-place (in == out) is allowed.
// Thread-safe; plans are cached per (h, w).
void fft2_ortho(int h, int w, const double* re_in, const double* im_in,
                double* re_out, double* im_out, bool inverse);

}  // namespace pantcr
