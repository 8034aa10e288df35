#pragma once

#include <string>
#include <vector>

#include "pantcr/raster.hpp"

namespace pantcr {

// 8-bit PNG export for visualization. bands holds 1 index (grayscale) or
// 3 indices (RGB). Values are clipped to [0,1] and scaled to 0..255.
void export_png(const MultiBandRaster& img, const std::string& path,
                const std::vector<int>& bands);

// Writes a horizontal strip of equally sized panels.
void export_png_strip(const std::vector<MultiBandRaster>& panels, const std::string& path,
                      const std::vector<int>& bands);

}  // namespace pantcr
