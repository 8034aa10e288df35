#include "pantcr/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pantcr {

namespace {

void put_u32be(std::string& s, uint32_t v) {
    s.push_back(char((v >> 24) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char(v & 0xff));
}

void write_chunk(std::ofstream& f, const char type[4], const std::string& data) {
    std::string head;
    put_u32be(head, uint32_t(data.size()));
    f.write(head.data(), 4);
    f.write(type, 4);
    f.write(data.data(), std::streamsize(data.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), uInt(data.size()));
    std::string tail;
    put_u32be(tail, uint32_t(crc));
    f.write(tail.data(), 4);
}

uint8_t to_byte(float v) {
    double x = std::clamp(double(v), 0.0, 1.0);
    return uint8_t(std::lround(x * 255.0));
}

void write_png(const std::string& path, int h, int w, int channels,
               const std::vector<uint8_t>& pixels) {
    std::string raw;
    raw.reserve(size_t(h) * (size_t(w) * channels + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back('\0');  // filter: none
        raw.append(reinterpret_cast<const char*>(pixels.data() + size_t(y) * w * channels),
                   size_t(w) * channels);
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<Bytef> compressed(bound);
    if (compress2(compressed.data(), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                  uLong(raw.size()), 6) != Z_OK)
        throw IoError("png deflate failed");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::string ihdr;
    put_u32be(ihdr, uint32_t(w));
    put_u32be(ihdr, uint32_t(h));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);            // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", std::string(reinterpret_cast<char*>(compressed.data()), bound));
    write_chunk(f, "IEND", "");
    if (!f) throw IoError("short write: " + path);
}

}  // namespace

void export_png(const MultiBandRaster& img, const std::string& path,
                const std::vector<int>& bands) {
    if (bands.size() != 1 && bands.size() != 3)
        throw ArgumentError("export_png: need 1 or 3 band indices");
    for (int b : bands)
        if (b < 0 || b >= img.c) throw ArgumentError("export_png: band index out of range");
    const int ch = int(bands.size());
    std::vector<uint8_t> px(size_t(img.h) * img.w * ch);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int k = 0; k < ch; ++k)
                px[(size_t(y) * img.w + x) * ch + k] = to_byte(img.at(y, x, bands[k]));
    write_png(path, img.h, img.w, ch, px);
}

void export_png_strip(const std::vector<MultiBandRaster>& panels, const std::string& path,
                      const std::vector<int>& bands) {
    if (panels.empty()) throw ArgumentError("export_png_strip: no panels");
    const int h = panels[0].h, w = panels[0].w;
    const int ch = int(bands.size());
    if (ch != 1 && ch != 3) throw ArgumentError("export_png_strip: need 1 or 3 bands");
    for (const auto& p : panels)
        if (p.h != h || p.w != w) throw ValidationError("panel dims differ");

    const int gap = 2;
    const int total_w = int(panels.size()) * w + (int(panels.size()) - 1) * gap;
    std::vector<uint8_t> px(size_t(h) * total_w * ch, 255);
    for (size_t p = 0; p < panels.size(); ++p) {
        const int x0 = int(p) * (w + gap);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int k = 0; k < ch; ++k)
                    px[(size_t(y) * total_w + x0 + x) * ch + k] =
                        to_byte(panels[p].at(y, x, bands[k]));
    }
    write_png(path, h, total_w, ch, px);
}

}  // namespace pantcr
