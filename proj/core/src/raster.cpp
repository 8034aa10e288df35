#include "pantcr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pantcr {

using nlohmann::json;

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

// Catmull-Rom kernel (a = -0.5).
double cr_weight(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return ((1.5 * t - 2.5) * t) * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

}  // namespace

void MultiBandRaster::validate() const {
    if (h < 1 || w < 1 || c < 1) throw ValidationError("raster dims must be >= 1");
    if (data.size() != size_t(h) * w * c) throw ValidationError("raster payload size mismatch");
    if (int(wavelengths_nm.size()) != c)
        throw ValidationError("wavelength count != band count");
    for (double lam : wavelengths_nm)
        if (!(lam > 0.0)) throw ValidationError("wavelengths must be positive");
    for (float v : data) {
        if (!std::isfinite(v)) throw ValidationError("raster holds non-finite values");
        if (v < 0.0f || v > 1.0f) throw ValidationError("raster values outside [0,1]");
    }
}

MultiBandRaster MultiBandRaster::band(int b) const {
    if (b < 0 || b >= c) throw ArgumentError("band index out of range");
    MultiBandRaster out(h, w, 1);
    out.wavelengths_nm = {wavelengths_nm[b]};
    out.gsd_m = gsd_m;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = at(y, x, b);
    return out;
}

MultiBandRaster MultiBandRaster::crop(int y0, int x0, int ch, int cw) const {
    if (y0 < 0 || x0 < 0 || ch < 1 || cw < 1 || y0 + ch > h || x0 + cw > w)
        throw ArgumentError("crop rectangle out of bounds");
    MultiBandRaster out(ch, cw, c);
    out.wavelengths_nm = wavelengths_nm;
    out.gsd_m = gsd_m;
    out.tags = tags;
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int b = 0; b < c; ++b) out.at(y, x, b) = at(y0 + y, x0 + x, b);
    return out;
}

MultiBandRaster load_raster(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    size_t nl = all.find('\n');
    if (nl == std::string::npos) throw FormatError("missing header newline: " + path);

    json hdr;
    try {
        hdr = json::parse(all.substr(0, nl));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad header json: ") + e.what());
    }
    if (!hdr.is_object()) throw FormatError("header is not a json object");
    for (const char* key : {"h", "w", "c", "dtype", "wavelengths_nm"})
        if (!hdr.contains(key)) throw FormatError(std::string("header missing key: ") + key);

    MultiBandRaster img;
    img.h = hdr["h"].get<int>();
    img.w = hdr["w"].get<int>();
    img.c = hdr["c"].get<int>();
    if (img.h < 1 || img.w < 1 || img.c < 1) throw ValidationError("non-positive dims in header");
    img.wavelengths_nm = hdr["wavelengths_nm"].get<std::vector<double>>();
    img.gsd_m = hdr.value("gsd_m", 1.0);
    if (hdr.contains("tags")) {
        for (auto& [k, v] : hdr["tags"].items()) img.tags[k] = v.get<std::string>();
    }
    for (auto& [k, v] : hdr.items()) {
        static const std::vector<std::string> known = {"h", "w", "c", "dtype", "wavelengths_nm",
                                                       "gsd_m", "tags", "max_count"};
        if (std::find(known.begin(), known.end(), k) == known.end() && v.is_string())
            img.tags[k] = v.get<std::string>();
    }

    const std::string dtype = hdr["dtype"].get<std::string>();
    const size_t n = size_t(img.h) * img.w * img.c;
    const char* payload = all.data() + nl + 1;
    const size_t payload_bytes = all.size() - nl - 1;
    img.data.resize(n);

    if (dtype == "f32le") {
        if (payload_bytes != n * 4)
            throw ValidationError("payload size mismatch: header declares " + std::to_string(n) +
                                  " samples, file stores " + std::to_string(payload_bytes / 4));
        std::memcpy(img.data.data(), payload, n * 4);
    } else if (dtype == "u16le") {
        if (!hdr.contains("max_count")) throw FormatError("u16le payload requires max_count");
        double maxc = hdr["max_count"].get<double>();
        if (!(maxc > 0)) throw ValidationError("max_count must be positive");
        if (payload_bytes != n * 2) throw ValidationError("u16 payload size mismatch");
        for (size_t i = 0; i < n; ++i) {
            uint16_t u;
            std::memcpy(&u, payload + 2 * i, 2);
            img.data[i] = float(std::min(double(u), maxc) / maxc);
        }
    } else {
        throw FormatError("unsupported dtype: " + dtype);
    }

    for (auto& v : img.data) {
        if (std::isnan(v)) throw ValidationError("NaN in payload");
        v = std::clamp(v, 0.0f, 1.0f);
    }
    if (int(img.wavelengths_nm.size()) != img.c)
        throw ValidationError("wavelength count != band count");
    img.validate();
    return img;
}

void save_raster(const MultiBandRaster& img, const std::string& path) {
    img.validate();
    json hdr;
    hdr["h"] = img.h;
    hdr["w"] = img.w;
    hdr["c"] = img.c;
    hdr["dtype"] = "f32le";
    hdr["wavelengths_nm"] = img.wavelengths_nm;
    hdr["gsd_m"] = img.gsd_m;
    hdr["tags"] = img.tags;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write: " + path);
    f << hdr.dump() << '\n';
    f.write(reinterpret_cast<const char*>(img.data.data()),
            std::streamsize(img.data.size() * 4));
    if (!f) throw IoError("short write: " + path);
}

MultiBandRaster bicubic_resample(const MultiBandRaster& img, double factor) {
    img.validate();
    if (!(factor > 0.0)) throw ArgumentError("resample factor must be positive");
    const int oh = std::max<int>(1, int(std::llround(img.h * factor)));
    const int ow = std::max<int>(1, int(std::llround(img.w * factor)));

    // separable: rows first (h x ow), then columns
    std::vector<double> mid(size_t(img.h) * ow * img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double sx = (x + 0.5) / factor - 0.5;
            const int ix = int(std::floor(sx));
            const double fx = sx - ix;
            double wt[4] = {cr_weight(fx + 1.0), cr_weight(fx), cr_weight(1.0 - fx),
                            cr_weight(2.0 - fx)};
            for (int b = 0; b < img.c; ++b) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += wt[k] * img.at(y, reflect101(ix - 1 + k, img.w), b);
                mid[(size_t(y) * ow + x) * img.c + b] = acc;
            }
        }
    }

    MultiBandRaster out(oh, ow, img.c);
    out.wavelengths_nm = img.wavelengths_nm;
    out.gsd_m = img.gsd_m / factor;
    out.tags = img.tags;
    for (int y = 0; y < oh; ++y) {
        const double sy = (y + 0.5) / factor - 0.5;
        const int iy = int(std::floor(sy));
        const double fy = sy - iy;
        double wt[4] = {cr_weight(fy + 1.0), cr_weight(fy), cr_weight(1.0 - fy),
                        cr_weight(2.0 - fy)};
        for (int x = 0; x < ow; ++x) {
            for (int b = 0; b < img.c; ++b) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += wt[k] * mid[(size_t(reflect101(iy - 1 + k, img.h)) * ow + x) * img.c + b];
                out.at(y, x, b) = float(std::clamp(acc, 0.0, 1.0));
            }
        }
    }
    return out;
}

namespace {

constexpr int kHistBins = 256;

int value_bin(float v) {
    int k = int(double(v) * kHistBins);
    return std::clamp(k, 0, kHistBins - 1);
}

}  // namespace

MultiBandRaster histogram_match(const MultiBandRaster& src, const MultiBandRaster& ref) {
    src.validate();
    ref.validate();
    if (src.c != ref.c) throw ValidationError("histogram_match: band count mismatch");

    MultiBandRaster out = src;
    const size_t ns = size_t(src.h) * src.w;
    const size_t nr = size_t(ref.h) * ref.w;

    for (int b = 0; b < src.c; ++b) {
        std::vector<double> hist_s(kHistBins, 0.0), hist_r(kHistBins, 0.0);
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) hist_s[value_bin(src.at(y, x, b))] += 1.0;
        for (int y = 0; y < ref.h; ++y)
            for (int x = 0; x < ref.w; ++x) hist_r[value_bin(ref.at(y, x, b))] += 1.0;

        // mid-rank CDF per bin
        std::vector<double> cdf_s(kHistBins), cdf_r(kHistBins);
        double acc = 0.0;
        for (int k = 0; k < kHistBins; ++k) {
            cdf_s[k] = (acc + 0.5 * hist_s[k]) / double(ns);
            acc += hist_s[k];
        }
        acc = 0.0;
        for (int k = 0; k < kHistBins; ++k) {
            cdf_r[k] = (acc + 0.5 * hist_r[k]) / double(nr);
            acc += hist_r[k];
        }

        auto bin_value = [](int k) { return (k + 0.5) / double(kHistBins); };
        auto invert = [&](double cprob) {
            int m = int(std::lower_bound(cdf_r.begin(), cdf_r.end(), cprob) - cdf_r.begin());
            if (m >= kHistBins) return bin_value(kHistBins - 1);
            if (m == 0) return bin_value(0);
            const double lo = cdf_r[m - 1], hi = cdf_r[m];
            if (hi - lo < 1e-12) return bin_value(m);
            const double t = (cprob - lo) / (hi - lo);
            return bin_value(m - 1) + t * (bin_value(m) - bin_value(m - 1));
        };

        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) {
                const double cprob = cdf_s[value_bin(src.at(y, x, b))];
                out.at(y, x, b) = float(std::clamp(invert(cprob), 0.0, 1.0));
            }
    }
    return out;
}

int nir_band_index(const MultiBandRaster& img) {
    for (int b = 0; b < img.c; ++b) {
        double lam = img.wavelengths_nm[b];
        if (lam >= 760.0 && lam <= 900.0) return b;
    }
    throw ValidationError("no band with wavelength in [760, 900] nm");
}

Tensor raster_to_tensor(const MultiBandRaster& img) {
    Tensor t(img.c, img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int b = 0; b < img.c; ++b) t.at(b, y, x) = img.at(y, x, b);
    return t;
}

MultiBandRaster tensor_to_raster(const Tensor& t, const std::vector<double>& wavelengths_nm,
                                 double gsd_m, bool clip01) {
    MultiBandRaster img(t.h, t.w, t.c);
    img.wavelengths_nm = wavelengths_nm;
    img.gsd_m = gsd_m;
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int b = 0; b < t.c; ++b) {
                double v = t.at(b, y, x);
                if (clip01) v = std::clamp(v, 0.0, 1.0);
                img.at(y, x, b) = float(v);
            }
    return img;
}

void SamplePair::validate() const {
    cloudy_lrmsi.validate();
    cloudy_pan.validate();
    clean_hrmsi.validate();
    if (r < 1) throw ValidationError("scale ratio must be positive");
    if (cloudy_pan.c != 1) throw ValidationError("pan must be single band");
    if (cloudy_pan.h != r * cloudy_lrmsi.h || cloudy_pan.w != r * cloudy_lrmsi.w)
        throw ValidationError("pan dims must be r x lrmsi dims");
    if (clean_hrmsi.h != cloudy_pan.h || clean_hrmsi.w != cloudy_pan.w)
        throw ValidationError("target must match pan spatially");
    if (clean_hrmsi.c != cloudy_lrmsi.c)
        throw ValidationError("target must match lrmsi spectrally");
    if (clean_lrmsi) clean_lrmsi->validate();
    if (clean_pan) clean_pan->validate();
}

}  // namespace pantcr
