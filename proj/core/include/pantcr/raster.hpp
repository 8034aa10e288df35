#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pantcr/common.hpp"
#include "pantcr/tensor.hpp"

namespace pantcr {

// Reflectance grid in [0,1], stored row-major h*w*c (band index fastest).
// On-disk container: one-line JSON header + raw f32le payload (".mbr").
struct MultiBandRaster {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;
    std::vector<double> wavelengths_nm;
    double gsd_m = 1.0;
    std::map<std::string, std::string> tags;

    MultiBandRaster() = default;
    MultiBandRaster(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), data(size_t(h_) * w_ * c_, 0.0f),
          wavelengths_nm(c_, 550.0) {}

    float& at(int y, int x, int b) { return data[(size_t(y) * w + x) * c + b]; }
    float at(int y, int x, int b) const { return data[(size_t(y) * w + x) * c + b]; }

    void validate() const;
    MultiBandRaster band(int b) const;                       // single-band copy
    MultiBandRaster crop(int y0, int x0, int ch, int cw) const;
};

MultiBandRaster load_raster(const std::string& path);
void save_raster(const MultiBandRaster& img, const std::string& path);

// Catmull-Rom bicubic (a = -0.5), reflect boundary, half-pixel centers.
// Output clipped to [0,1]; band metadata preserved.
MultiBandRaster bicubic_resample(const MultiBandRaster& img, double factor);

// 256-bin per-band CDF matching (mid-rank forward lookup, linear inverse).
MultiBandRaster histogram_match(const MultiBandRaster& src, const MultiBandRaster& ref);

// Band whose center wavelength falls in [760, 900] nm.
int nir_band_index(const MultiBandRaster& img);

// Tensor bridge (CHW double <-> HWC float).
Tensor raster_to_tensor(const MultiBandRaster& img);
MultiBandRaster tensor_to_raster(const Tensor& t, const std::vector<double>& wavelengths_nm,
                                 double gsd_m, bool clip01);

// Input/target tuple for one training or evaluation item.
struct SamplePair {
    MultiBandRaster cloudy_lrmsi;      // (h/r, w/r, c)
    MultiBandRaster cloudy_pan;        // (h, w, 1)
    MultiBandRaster clean_hrmsi;       // (h, w, c)
    std::optional<MultiBandRaster> clean_lrmsi;
    std::optional<MultiBandRaster> clean_pan;
    int r = 4;
    std::string id;

    void validate() const;
};

}  // namespace pantcr
