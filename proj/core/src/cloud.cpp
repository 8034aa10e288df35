#include "pantcr/cloud.hpp"

#include <algorithm>
#include <cmath>

namespace pantcr {

CloudMorphology morphology_from_string(const std::string& name) {
    if (name == "stratiform") return CloudMorphology::stratiform;
    if (name == "cumuliform") return CloudMorphology::cumuliform;
    if (name == "wispy") return CloudMorphology::wispy;
    if (name == "banded") return CloudMorphology::banded;
    throw ArgumentError("unknown cloud morphology: " + name);
}

std::string morphology_to_string(CloudMorphology m) {
    switch (m) {
        case CloudMorphology::stratiform: return "stratiform";
        case CloudMorphology::cumuliform: return "cumuliform";
        case CloudMorphology::wispy: return "wispy";
        case CloudMorphology::banded: return "banded";
    }
    throw ArgumentError("bad morphology enum");
}

double ExtinctionLaw::k(double lambda_nm) const {
    if (!(lambda_nm > 0.0)) throw ValidationError("wavelength must be positive");
    return k0 * std::pow(lambda_nm / lambda0_nm, -q);
}

double Airlight::at(double lambda_nm) const {
    return std::clamp(base + blue_tilt * (550.0 / lambda_nm - 1.0), 0.0, 1.0);
}

CloudField CloudField::block_downsample(int r) const {
    if (r < 1) throw ArgumentError("downsample ratio must be >= 1");
    if (h % r != 0 || w % r != 0) throw ArgumentError("cloud dims not divisible by r");
    CloudField out = *this;
    out.h = h / r;
    out.w = w / r;
    out.depth.assign(size_t(out.h) * out.w, 0.0f);
    const double inv = 1.0 / (double(r) * r);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) acc += d(y * r + dy, x * r + dx);
            out.depth[size_t(y) * out.w + x] = float(acc * inv);
        }
    return out;
}

namespace {

// lattice value in [0,1), deterministic in (seed, octave, xi, yi)
double lattice_value(uint64_t seed, int octave, int64_t xi, int64_t yi) {
    uint64_t hx = mix64(uint64_t(xi) * 0x9ddfea08eb382d69ull + uint64_t(octave) + 1);
    uint64_t hy = mix64(uint64_t(yi) * 0xc2b2ae3d27d4eb4full + uint64_t(octave) * 31 + 7);
    uint64_t v = mix64(seed ^ hx ^ (hy << 1));
    return double(v >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(uint64_t seed, int octave, double u, double v) {
    const double fu = std::floor(u), fv = std::floor(v);
    const int64_t xi = int64_t(fu), yi = int64_t(fv);
    const double tu = fade(u - fu), tv = fade(v - fv);
    const double v00 = lattice_value(seed, octave, xi, yi);
    const double v10 = lattice_value(seed, octave, xi + 1, yi);
    const double v01 = lattice_value(seed, octave, xi, yi + 1);
    const double v11 = lattice_value(seed, octave, xi + 1, yi + 1);
    const double a = v00 + (v10 - v00) * tu;
    const double b = v01 + (v11 - v01) * tu;
    return a + (b - a) * tv;
}

struct MorphologyPreset {
    double base_cells;          // lattice cells across the image at octave 0
    std::vector<double> octave_weights;
    double fx, fy;              // anisotropy
    double rotate_deg;
    double gain;                // depth mean control
    bool puffy;                 // extra smoothstep contrast shaping
};

MorphologyPreset preset_for(CloudMorphology m) {
    switch (m) {
        case CloudMorphology::stratiform:
            return {4.0, {1.0, 0.35, 0.12, 0.04}, 1.0, 1.0, 0.0, 0.95, false};
        case CloudMorphology::cumuliform:
            return {6.0, {0.7, 1.0, 0.5, 0.2}, 1.0, 1.0, 0.0, 0.9, true};
        case CloudMorphology::wispy:
            return {8.0, {0.4, 0.7, 1.0, 0.6}, 1.6, 0.7, 15.0, 0.7, false};
        case CloudMorphology::banded:
            return {5.0, {1.0, 0.5, 0.2, 0.1}, 4.0, 0.9, 30.0, 0.9, false};
    }
    throw ArgumentError("bad morphology enum");
}

}  // namespace

CloudField generate_cloud_field(uint64_t seed, CloudMorphology morphology,
                                double thickness_scale, int h, int w) {
    if (h < 1 || w < 1) throw ArgumentError("cloud dims must be positive");
    if (thickness_scale < 0.0) throw ArgumentError("thickness_scale must be >= 0");

    const MorphologyPreset ps = preset_for(morphology);
    const double theta = ps.rotate_deg * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    double wsum = 0.0;
    for (double wgt : ps.octave_weights) wsum += wgt;

    CloudField field;
    field.h = h;
    field.w = w;
    field.morphology = morphology;
    field.thickness_scale = thickness_scale;
    field.depth.resize(size_t(h) * w);

    const uint64_t noise_seed = derive_seed(seed, morphology_to_string(morphology));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double nx = (x + 0.5) / double(w);
            const double ny = (y + 0.5) / double(h);
            const double rx = ct * nx + st * ny;
            const double ry = -st * nx + ct * ny;
            double acc = 0.0;
            double cells = ps.base_cells;
            for (size_t o = 0; o < ps.octave_weights.size(); ++o) {
                acc += ps.octave_weights[o] *
                       value_noise(noise_seed, int(o), rx * ps.fx * cells, ry * ps.fy * cells);
                cells *= 2.0;
            }
            double d = acc / wsum;  // [0,1]
            if (ps.puffy) d = fade(d);
            d *= ps.gain * thickness_scale;
            field.depth[size_t(y) * w + x] = float(std::max(0.0, d));
        }
    }
    return field;
}

MultiBandRaster apply_scattering(const MultiBandRaster& clean, const CloudField& cloud) {
    clean.validate();
    if (clean.h != cloud.h || clean.w != cloud.w)
        throw ValidationError("cloud field dims != image dims");
    if (int(clean.wavelengths_nm.size()) != clean.c)
        throw ValidationError("missing band wavelengths");

    std::vector<double> kb(clean.c), lb(clean.c);
    for (int b = 0; b < clean.c; ++b) {
        kb[b] = cloud.law.k(clean.wavelengths_nm[b]);
        lb[b] = cloud.airlight.at(clean.wavelengths_nm[b]);
    }

    MultiBandRaster out = clean;
    for (int y = 0; y < clean.h; ++y)
        for (int x = 0; x < clean.w; ++x) {
            const double d = cloud.d(y, x);
            for (int b = 0; b < clean.c; ++b) {
                const double t = std::exp(-kb[b] * d);
                const double v = double(clean.at(y, x, b)) * t + lb[b] * (1.0 - t);
                out.at(y, x, b) = float(std::clamp(v, 0.0, 1.0));
            }
        }
    return out;
}

MultiBandRaster gaussian_blur(const MultiBandRaster& img, double sigma) {
    if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
    const int radius = std::max(1, int(std::ceil(3.5 * sigma)));
    std::vector<double> kern(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kern[i + radius] = std::exp(-0.5 * (double(i) / sigma) * (double(i) / sigma));
        ksum += kern[i + radius];
    }
    for (auto& k : kern) k /= ksum;

    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    };

    // horizontal pass into double buffer, then vertical
    std::vector<double> mid(size_t(img.h) * img.w * img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int b = 0; b < img.c; ++b) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[i + radius] * img.at(y, reflect(x + i, img.w), b);
                mid[(size_t(y) * img.w + x) * img.c + b] = acc;
            }
    MultiBandRaster out = img;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int b = 0; b < img.c; ++b) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kern[i + radius] *
                           mid[(size_t(reflect(y + i, img.h)) * img.w + x) * img.c + b];
                out.at(y, x, b) = float(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

namespace {

MultiBandRaster decimate(const MultiBandRaster& img, int r) {
    MultiBandRaster out(img.h / r, img.w / r, img.c);
    out.wavelengths_nm = img.wavelengths_nm;
    out.gsd_m = img.gsd_m * r;
    out.tags = img.tags;
    const int off = r / 2;
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int b = 0; b < img.c; ++b)
                out.at(y, x, b) = img.at(y * r + off, x * r + off, b);
    return out;
}

}  // namespace

std::pair<MultiBandRaster, MultiBandRaster> wald_degrade(const MultiBandRaster& clean_hrmsi,
                                                         const MultiBandRaster& clean_hr_pan,
                                                         int r) {
    if (r < 1) throw ArgumentError("ratio must be >= 1");
    if (clean_hrmsi.h % r != 0 || clean_hrmsi.w % r != 0 || clean_hr_pan.h % r != 0 ||
        clean_hr_pan.w % r != 0)
        throw ArgumentError("dims not divisible by ratio");
    if (r == 1) return {clean_hrmsi, clean_hr_pan};
    const double sigma = double(r) / M_PI;
    MultiBandRaster lrmsi = decimate(gaussian_blur(clean_hrmsi, sigma), r);
    MultiBandRaster lr_pan = decimate(gaussian_blur(clean_hr_pan, sigma), r);
    return {std::move(lrmsi), std::move(lr_pan)};
}

SamplePair make_sample(const MultiBandRaster& clean_hrmsi, const MultiBandRaster& clean_pan,
                       uint64_t cloud_seed, CloudMorphology morphology, double thickness_scale,
                       int r, const std::string& id) {
    clean_hrmsi.validate();
    clean_pan.validate();
    if (clean_pan.h != clean_hrmsi.h || clean_pan.w != clean_hrmsi.w || clean_pan.c != 1)
        throw ValidationError("make_sample: pan must be single-band and aligned");

    CloudField cloud =
        generate_cloud_field(cloud_seed, morphology, thickness_scale, clean_hrmsi.h, clean_hrmsi.w);

    SamplePair s;
    s.id = id;
    s.r = r;
    s.clean_hrmsi = clean_hrmsi;
    auto [lrmsi, lr_pan] = wald_degrade(clean_hrmsi, clean_pan, r);
    (void)lr_pan;
    s.clean_lrmsi = lrmsi;
    s.clean_pan = clean_pan;
    s.cloudy_pan = apply_scattering(clean_pan, cloud);
    s.cloudy_lrmsi = apply_scattering(lrmsi, cloud.block_downsample(r));
    s.validate();
    return s;
}

std::vector<double> default_wavelengths_nm() { return {485.0, 555.0, 660.0, 830.0}; }

namespace {

// reflectance bank (B, G, R, NIR); values stay well below typical airlight
struct Material {
    double refl[4];
};

const Material kMaterials[] = {
    {{0.05, 0.10, 0.08, 0.50}},  // vegetation
    {{0.08, 0.06, 0.04, 0.02}},  // water
    {{0.20, 0.28, 0.34, 0.42}},  // bare soil
    {{0.28, 0.30, 0.31, 0.36}},  // built-up
    {{0.34, 0.42, 0.48, 0.55}},  // sand
    {{0.12, 0.18, 0.14, 0.38}},  // shrubland
    {{0.16, 0.20, 0.24, 0.30}},  // rock
};

}  // namespace

MultiBandRaster generate_scene(uint64_t seed, int h, int w,
                               const std::vector<double>& wavelengths_nm) {
    if (h < 1 || w < 1) throw ArgumentError("scene dims must be positive");
    const int bands = int(wavelengths_nm.size());
    if (bands < 1) throw ArgumentError("need at least one wavelength");

    Rng rng(derive_seed(seed, "scene"));
    const int sites = 10 + rng.integer(10);
    struct Site {
        double x, y;
        double refl[4];
    };
    std::vector<Site> site_list(sites);
    for (auto& s : site_list) {
        s.x = rng.uniform() * w;
        s.y = rng.uniform() * h;
        const Material& m = kMaterials[rng.integer(int(std::size(kMaterials)))];
        for (int b = 0; b < 4; ++b)
            s.refl[b] = std::clamp(m.refl[b] + rng.range(-0.04, 0.04), 0.03, 0.62);
    }

    const uint64_t warp_seed = derive_seed(seed, "warp");
    const uint64_t tex_seed = derive_seed(seed, "texture");

    MultiBandRaster img(h, w, bands);
    img.wavelengths_nm = wavelengths_nm;
    img.gsd_m = 1.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // domain warp gives the mosaic organic region boundaries
            const double wx = x + 18.0 * (value_noise(warp_seed, 0, x * 6.0 / w, y * 6.0 / h) - 0.5);
            const double wy = y + 18.0 * (value_noise(warp_seed, 1, x * 6.0 / w, y * 6.0 / h) - 0.5);
            const Site* best = &site_list[0];
            double best_d = 1e30;
            for (const auto& s : site_list) {
                const double dx = wx - s.x, dy = wy - s.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d) {
                    best_d = d2;
                    best = &s;
                }
            }
            // shared multiplicative texture keeps bands correlated
            const double tex = 0.82 + 0.36 * (0.6 * value_noise(tex_seed, 0, x * 10.0 / w, y * 10.0 / h) +
                                              0.4 * value_noise(tex_seed, 1, x * 28.0 / w, y * 28.0 / h));
            for (int b = 0; b < bands; ++b) {
                const double base = best->refl[std::min(b, 3)];
                img.at(y, x, b) = float(std::clamp(base * tex, 0.02, 0.68));
            }
        }
    }
    return img;
}

MultiBandRaster pan_from_msi(const MultiBandRaster& msi) {
    msi.validate();
    const double kWeights[4] = {0.16, 0.26, 0.28, 0.30};
    MultiBandRaster pan(msi.h, msi.w, 1);
    pan.wavelengths_nm = {kPanWavelengthNm};
    pan.gsd_m = msi.gsd_m;
    double wsum = 0.0;
    const int nb = std::min(msi.c, 4);
    for (int b = 0; b < nb; ++b) wsum += kWeights[b];
    for (int y = 0; y < msi.h; ++y)
        for (int x = 0; x < msi.w; ++x) {
            double acc = 0.0;
            for (int b = 0; b < nb; ++b) acc += kWeights[b] * msi.at(y, x, b);
            pan.at(y, x, 0) = float(std::clamp(acc / wsum, 0.0, 1.0));
        }
    return pan;
}

}  // namespace pantcr
