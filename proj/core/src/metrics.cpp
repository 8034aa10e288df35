#include "pantcr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "pantcr/cloud.hpp"

namespace pantcr {

namespace {

void require_same_dims(const MultiBandRaster& a, const MultiBandRaster& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw ValidationError("metric inputs must share dims");
}

}  // namespace

std::string MetricReport::to_json_string() const {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("psnr_db", psnr_db);
    put("ssim", ssim);
    put("sam_deg", sam_deg);
    put("ergas", ergas);
    put("d_lambda", d_lambda);
    put("d_s", d_s);
    put("hqnr", hqnr);
    return j.dump();
}

double psnr(const MultiBandRaster& pred, const MultiBandRaster& target) {
    require_same_dims(pred, target);
    double se = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = double(pred.data[i]) - double(target.data[i]);
        se += d * d;
    }
    const double mse = se / double(pred.data.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const MultiBandRaster& pred, const MultiBandRaster& target) {
    require_same_dims(pred, target);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (pred.h < kWin || pred.w < kWin) throw ValidationError("image smaller than ssim window");

    double kern[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        kern[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
        ksum += kern[i];
    }
    for (auto& k : kern) k /= ksum;

    double total = 0.0;
    for (int b = 0; b < pred.c; ++b) {
        double acc = 0.0;
        long cnt = 0;
        for (int y = 0; y + kWin <= pred.h; ++y)
            for (int x = 0; x + kWin <= pred.w; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        const double wgt = kern[i] * kern[j];
                        const double px = pred.at(y + i, x + j, b);
                        const double tx = target.at(y + i, x + j, b);
                        mx += wgt * px;
                        my += wgt * tx;
                        mxx += wgt * px * px;
                        myy += wgt * tx * tx;
                        mxy += wgt * px * tx;
                    }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cxy = mxy - mx * my;
                const double s = ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                acc += s;
                ++cnt;
            }
        total += acc / double(cnt);
    }
    return total / double(pred.c);
}

double sam_degrees(const MultiBandRaster& pred, const MultiBandRaster& target) {
    require_same_dims(pred, target);
    if (pred.c < 2) throw ValidationError("sam needs at least two bands");
    constexpr double kEps = 1e-8;
    double acc = 0.0;
    long cnt = 0;
    for (int y = 0; y < pred.h; ++y)
        for (int x = 0; x < pred.w; ++x) {
            double dot = 0, np = 0, nt = 0;
            for (int b = 0; b < pred.c; ++b) {
                const double p = pred.at(y, x, b);
                const double t = target.at(y, x, b);
                dot += p * t;
                np += p * p;
                nt += t * t;
            }
            const double denom = std::sqrt(np) * std::sqrt(nt);
            if (denom <= kEps) continue;
            const double cosang = std::clamp(dot / denom, -1.0, 1.0);
            acc += std::acos(cosang);
            ++cnt;
        }
    if (cnt == 0) return 0.0;
    return acc / double(cnt) * 180.0 / M_PI;
}

double ergas(const MultiBandRaster& pred, const MultiBandRaster& target, int r) {
    require_same_dims(pred, target);
    if (r < 1) throw ArgumentError("ergas ratio must be >= 1");
    const double n = double(target.h) * target.w;
    double acc = 0.0;
    for (int b = 0; b < pred.c; ++b) {
        double mu = 0.0, se = 0.0;
        for (int y = 0; y < pred.h; ++y)
            for (int x = 0; x < pred.w; ++x) {
                mu += target.at(y, x, b);
                const double d = double(pred.at(y, x, b)) - double(target.at(y, x, b));
                se += d * d;
            }
        mu /= n;
        if (!(mu > 0.0)) throw ValidationError("ergas: zero-mean target band");
        const double rmse = std::sqrt(se / n);
        acc += (rmse / mu) * (rmse / mu);
    }
    return (100.0 / double(r)) * std::sqrt(acc / double(pred.c));
}

namespace {

constexpr int kQBlock = 32;

// UIQI over one block pair; returns false for degenerate denominators.
bool uiqi_block(const MultiBandRaster& a, int ba, const MultiBandRaster& b, int bb, int y0,
                int x0, int bh, int bw, double* out) {
    const double n = double(bh) * bw;
    if (n < 2) return false;
    double ma = 0, mb = 0;
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x) {
            ma += a.at(y0 + y, x0 + x, ba);
            mb += b.at(y0 + y, x0 + x, bb);
        }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cab = 0;
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x) {
            const double da = a.at(y0 + y, x0 + x, ba) - ma;
            const double db = b.at(y0 + y, x0 + x, bb) - mb;
            va += da * da;
            vb += db * db;
            cab += da * db;
        }
    va /= (n - 1);
    vb /= (n - 1);
    cab /= (n - 1);
    const double denom = (va + vb) * (ma * ma + mb * mb);
    if (denom < 1e-12) return false;
    *out = 4.0 * cab * ma * mb / denom;
    return true;
}

// mean UIQI over a 32x32 tiling (partial blocks at the edges included)
double uiqi_mean(const MultiBandRaster& a, int ba, const MultiBandRaster& b, int bb) {
    if (a.h != b.h || a.w != b.w) throw ValidationError("uiqi inputs must share dims");
    double acc = 0.0;
    long cnt = 0;
    for (int y0 = 0; y0 < a.h; y0 += kQBlock)
        for (int x0 = 0; x0 < a.w; x0 += kQBlock) {
            const int bh = std::min(kQBlock, a.h - y0);
            const int bw = std::min(kQBlock, a.w - x0);
            double q;
            if (uiqi_block(a, ba, b, bb, y0, x0, bh, bw, &q)) {
                acc += q;
                ++cnt;
            }
        }
    return cnt ? acc / double(cnt) : 0.0;
}

}  // namespace

QnrResult qnr_family(const MultiBandRaster& fused, const MultiBandRaster& lrmsi,
                     const MultiBandRaster& pan, int r) {
    if (fused.c != lrmsi.c) throw ValidationError("qnr: band count mismatch");
    if (fused.h != pan.h || fused.w != pan.w) throw ValidationError("qnr: fused/pan dims differ");
    if (fused.h != lrmsi.h * r || fused.w != lrmsi.w * r)
        throw ValidationError("qnr: lrmsi dims inconsistent with ratio");
    if (pan.c != 1) throw ValidationError("qnr: pan must be single band");

    const int c = fused.c;
    QnrResult res;

    // spectral distortion: inter-band UIQI drift, p = 1
    double dl = 0.0;
    long pairs = 0;
    for (int b = 0; b < c; ++b)
        for (int b2 = 0; b2 < c; ++b2) {
            if (b == b2) continue;
            const double qf = uiqi_mean(fused, b, fused, b2);
            const double ql = uiqi_mean(lrmsi, b, lrmsi, b2);
            dl += std::fabs(qf - ql);
            ++pairs;
        }
    res.d_lambda = pairs ? dl / double(pairs) : 0.0;

    // spatial distortion against pan and its reduced-resolution copy, q = 1
    auto [pan_lr_unused, pan_lr] = wald_degrade(pan, pan, r);
    (void)pan_lr_unused;
    double ds = 0.0;
    for (int b = 0; b < c; ++b) {
        const double qf = uiqi_mean(fused, b, pan, 0);
        const double ql = uiqi_mean(lrmsi, b, pan_lr, 0);
        ds += std::fabs(qf - ql);
    }
    res.d_s = ds / double(c);

    res.hqnr = (1.0 - res.d_lambda) * (1.0 - res.d_s);
    return res;
}

}  // namespace pantcr
