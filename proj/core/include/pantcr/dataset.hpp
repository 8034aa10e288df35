#pragma once

#include <map>
#include <string>
#include <vector>

#include "pantcr/cloud.hpp"
#include "pantcr/raster.hpp"

namespace pantcr {

struct SynthCounts {
    int train = 0;
    int val = 0;
    int test_reduced = 0;
    int test_full = 0;
};

struct SynthConfig {
    int scenes = 4;
    int scene_size = 512;       // source scenes are square
    int r = 4;
    int patch = 128;            // train/val/test_reduced target size
    int full_size = 512;        // test_full scene size
    double thickness_lo = 0.3;
    double thickness_hi = 1.0;
    std::vector<double> wavelengths_nm = default_wavelengths_nm();
};

struct CloudSpec {
    uint64_t seed = 0;
    std::string morphology;
    double thickness = 0.0;
};

struct BBox {
    std::string scene;
    int x = 0, y = 0, w = 0, h = 0;
};

struct ManifestEntry {
    std::string id;
    std::map<std::string, std::string> files;  // role -> relative path
    CloudSpec cloud;
    BBox bbox;
};

struct Manifest {
    int version = 1;
    int r = 4;
    std::map<std::string, std::vector<ManifestEntry>> splits;

    const std::vector<ManifestEntry>& split(const std::string& name) const;
    std::string to_json_string() const;
};

// Generates source scenes, tiles split-exclusive patches, degrades each with
// one cloud field, writes .mbr files plus dataset.json under out_dir.
Manifest synth_dataset(const SynthConfig& cfg, const SynthCounts& counts, uint64_t seed,
                       const std::string& out_dir);

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

SamplePair load_sample(const ManifestEntry& entry, const std::string& root, int r);

}  // namespace pantcr
