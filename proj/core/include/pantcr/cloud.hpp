#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pantcr/raster.hpp"

namespace pantcr {

enum class CloudMorphology { stratiform, cumuliform, wispy, banded };

CloudMorphology morphology_from_string(const std::string& name);
std::string morphology_to_string(CloudMorphology m);

// k(lambda) = k0 * (lambda/lambda0)^(-q); non-increasing in lambda for q >= 0,
// which makes NIR the least attenuated band.
struct ExtinctionLaw {
    double k0 = 1.0;
    double lambda0_nm = 550.0;
    double q = 1.3;
    double k(double lambda_nm) const;
};

struct Airlight {
    double base = 0.85;
    double blue_tilt = 0.0;  // L(lambda) = clamp(base + blue_tilt*(550/lambda - 1))
    double at(double lambda_nm) const;
};

// Per-pixel optical path-length map plus the extinction law driving
// transmittance exp(-k(lambda) * d).
struct CloudField {
    int h = 0, w = 0;
    std::vector<float> depth;  // d >= 0, already scaled by thickness
    ExtinctionLaw law;
    Airlight airlight;
    CloudMorphology morphology = CloudMorphology::stratiform;
    double thickness_scale = 1.0;

    float d(int y, int x) const { return depth[size_t(y) * w + x]; }
    CloudField block_downsample(int r) const;  // r x r mean, dims must divide
};

// PAN band reference wavelength for the scattering law.
constexpr double kPanWavelengthNm = 675.0;

// Octave value-noise depth map; deterministic in (seed, morphology, dims).
// depth lies in [0, thickness_scale].
CloudField generate_cloud_field(uint64_t seed, CloudMorphology morphology,
                                double thickness_scale, int h, int w);

// out = clean * t + L(lambda) * (1 - t), t = exp(-k(lambda) * d).
MultiBandRaster apply_scattering(const MultiBandRaster& clean, const CloudField& cloud);

MultiBandRaster gaussian_blur(const MultiBandRaster& img, double sigma);

// Reduced-resolution degradation: Gaussian blur (sigma = r/pi) then decimate.
std::pair<MultiBandRaster, MultiBandRaster> wald_degrade(const MultiBandRaster& clean_hrmsi,
                                                         const MultiBandRaster& clean_hr_pan,
                                                         int r);

// Compose resolution + cloud degradation; both sensors see one cloud field
// (depth block-averaged for the low-resolution path).
SamplePair make_sample(const MultiBandRaster& clean_hrmsi, const MultiBandRaster& clean_pan,
                       uint64_t cloud_seed, CloudMorphology morphology, double thickness_scale,
                       int r, const std::string& id);

// Procedural piecewise-smooth land-cover mosaic with correlated band spectra.
MultiBandRaster generate_scene(uint64_t seed, int h, int w,
                               const std::vector<double>& wavelengths_nm);

// Fixed-weight band mix standing in for the wide panchromatic response.
MultiBandRaster pan_from_msi(const MultiBandRaster& msi);

std::vector<double> default_wavelengths_nm();

}  // namespace pantcr
