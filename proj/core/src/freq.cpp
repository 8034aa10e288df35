#include "pantcr/freq.hpp"

#include <algorithm>
#include <cmath>

#include "pantcr/fft.hpp"

namespace pantcr {

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

}  // namespace

FrequencyPair decompose(const Tensor& grid) {
    for (double v : grid.v)
        if (!std::isfinite(v)) throw NumericError("decompose: non-finite input");
    FrequencyPair fp;
    fp.h = grid.h;
    fp.w = grid.w;
    fp.c = grid.c;
    const size_t plane = size_t(grid.h) * grid.w;
    fp.amp.resize(plane * grid.c);
    fp.phase.resize(plane * grid.c);

    std::vector<double> re(plane), im(plane);
    for (int b = 0; b < grid.c; ++b) {
        const double* src = grid.v.data() + b * plane;
        fft2_ortho(grid.h, grid.w, src, nullptr, re.data(), im.data(), false);
        for (size_t i = 0; i < plane; ++i) {
            fp.amp[b * plane + i] = std::hypot(re[i], im[i]);
            fp.phase[b * plane + i] = std::atan2(im[i], re[i]);
        }
    }
    return fp;
}

FrequencyPair decompose(const MultiBandRaster& img) {
    return decompose(raster_to_tensor(img));
}

Tensor recompose_tensor(const FrequencyPair& fp, double* max_imag) {
    if (fp.h < 1 || fp.w < 1 || fp.c < 1) throw ValidationError("recompose: empty pair");
    const size_t plane = size_t(fp.h) * fp.w;
    if (fp.amp.size() != plane * fp.c || fp.phase.size() != plane * fp.c)
        throw ValidationError("recompose: inconsistent dims");

    Tensor out(fp.c, fp.h, fp.w);
    std::vector<double> re(plane), im(plane);
    double worst = 0.0;
    for (int b = 0; b < fp.c; ++b) {
        for (size_t i = 0; i < plane; ++i) {
            const double a = fp.amp[b * plane + i];
            const double p = fp.phase[b * plane + i];
            re[i] = a * std::cos(p);
            im[i] = a * std::sin(p);
        }
        fft2_ortho(fp.h, fp.w, re.data(), im.data(), re.data(), im.data(), true);
        for (size_t i = 0; i < plane; ++i) {
            out.v[b * plane + i] = re[i];
            worst = std::max(worst, std::fabs(im[i]));
        }
    }
    if (max_imag) *max_imag = worst;
    return out;
}

MultiBandRaster recompose(const FrequencyPair& fp, const std::vector<double>& wavelengths_nm,
                          double gsd_m, double* max_imag) {
    Tensor t = recompose_tensor(fp, max_imag);
    return tensor_to_raster(t, wavelengths_nm, gsd_m, true);
}

MultiBandRaster highpass_contrast_filter(const MultiBandRaster& x, int pool_radius) {
    if (pool_radius < 1) throw ArgumentError("pool_radius must be >= 1");
    MultiBandRaster out = x;
    const int side = 2 * pool_radius + 1;
    const double inv_area = 1.0 / (double(side) * side);
    for (int b = 0; b < x.c; ++b) {
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double acc = 0.0;
                for (int dy = -pool_radius; dy <= pool_radius; ++dy)
                    for (int dx = -pool_radius; dx <= pool_radius; ++dx)
                        acc += x.at(reflect101(y + dy, x.h), reflect101(xx + dx, x.w), b);
                const double pooled = acc * inv_area;
                const double d = std::fabs(double(x.at(y, xx, b)) - pooled);
                const double gate = 1.0 / (1.0 + std::exp(-d));
                out.at(y, xx, b) = float(double(x.at(y, xx, b)) * gate);
            }
    }
    return out;
}

MultiBandRaster swap_amplitude(const MultiBandRaster& amp_from,
                               const MultiBandRaster& phase_from) {
    if (amp_from.h != phase_from.h || amp_from.w != phase_from.w || amp_from.c != phase_from.c)
        throw ValidationError("swap_amplitude: dims differ");
    FrequencyPair fa = decompose(amp_from);
    FrequencyPair fb = decompose(phase_from);
    fa.phase = fb.phase;
    return recompose(fa, amp_from.wavelengths_nm, amp_from.gsd_m, nullptr);
}

}  // namespace pantcr
