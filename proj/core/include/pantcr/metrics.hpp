#pragma once

#include <optional>
#include <string>

#include "pantcr/raster.hpp"

namespace pantcr {

struct MetricReport {
    std::optional<double> psnr_db;
    std::optional<double> ssim;
    std::optional<double> sam_deg;
    std::optional<double> ergas;
    std::optional<double> d_lambda;
    std::optional<double> d_s;
    std::optional<double> hqnr;

    std::string to_json_string() const;
};

// 10*log10(1/MSE) over all bands jointly, peak 1.0, capped at 100 dB.
double psnr(const MultiBandRaster& pred, const MultiBandRaster& target);

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03,
// valid windows only, mean over bands.
double ssim(const MultiBandRaster& pred, const MultiBandRaster& target);

// Mean per-pixel spectral angle in degrees; degenerate pixels skipped.
double sam_degrees(const MultiBandRaster& pred, const MultiBandRaster& target);

// (100/r) * sqrt(mean_b (RMSE_b / mean_b(target))^2).
double ergas(const MultiBandRaster& pred, const MultiBandRaster& target, int r);

struct QnrResult {
    double d_lambda = 0.0;
    double d_s = 0.0;
    double hqnr = 1.0;
};

// No-reference protocol: UIQI on 32x32 blocks (partial edge blocks included),
// D_lambda over band pairs, D_s against pan and its Wald-degraded copy.
QnrResult qnr_family(const MultiBandRaster& fused, const MultiBandRaster& lrmsi,
                     const MultiBandRaster& pan, int r);

}  // namespace pantcr
