#include "hyperaod/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hyperaod/common.hpp"

namespace hyperaod {

namespace {

void append_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
    v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    append_u32be(out, static_cast<std::uint32_t>(payload.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    const auto crc =
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    append_u32be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_rgb(const std::string& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != width * height * 3)
        throw DataError("write_png_rgb: buffer size does not match dimensions");

    // raw scanlines, filter byte 0 per row
    std::vector<std::uint8_t> raw;
    raw.reserve(height * (1 + width * 3));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), rgb.begin() + static_cast<long>(y * width * 3),
                   rgb.begin() + static_cast<long>((y + 1) * width * 3));
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw NumericError("write_png_rgb: zlib compression failed");
    comp.resize(comp_len);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    append_u32be(ihdr, static_cast<std::uint32_t>(width));
    append_u32be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // no interlace
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", comp);
    append_chunk(png, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_png_rgb: cannot open '" + path + "'");
    os.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!os) throw DataError("write_png_rgb: write failed for '" + path + "'");
}

std::array<std::uint8_t, 3> aod_color(double t) {
    // compact viridis-style ramp
    static const double stops[7][3] = {{68, 1, 84},    {71, 44, 122},  {59, 81, 139},
                                       {44, 113, 142}, {33, 144, 141}, {94, 201, 98},
                                       {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0);
    const double x = t * 6.0;
    const int i = std::min(5, static_cast<int>(x));
    const double f = x - i;
    std::array<std::uint8_t, 3> c{};
    for (int k = 0; k < 3; ++k)
        c[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(
            std::lround(stops[i][k] * (1.0 - f) + stops[i + 1][k] * f));
    return c;
}

void write_aod_quicklook(const std::string& path, const ArrayD& values, const MaskGrid& valid,
                         double lo, double hi) {
    const std::size_t h = values.dim(0), w = values.dim(1);
    std::vector<std::uint8_t> rgb(h * w * 3);
    for (std::size_t p = 0; p < h * w; ++p) {
        if (!valid[p]) {
            rgb[3 * p] = rgb[3 * p + 1] = rgb[3 * p + 2] = 48;
            continue;
        }
        const auto c = aod_color((values[p] - lo) / (hi - lo));
        rgb[3 * p] = c[0];
        rgb[3 * p + 1] = c[1];
        rgb[3 * p + 2] = c[2];
    }
    write_png_rgb(path, w, h, rgb);
}

void write_scatter_png(const std::string& path, const ScatterData& s) {
    const std::size_t n = s.bins;
    std::uint32_t peak = 0;
    for (auto c : s.counts.data) peak = std::max(peak, c);
    const double log_peak = std::log1p(static_cast<double>(peak));

    std::vector<std::uint8_t> rgb(n * n * 3);
    for (std::size_t i = 0; i < n; ++i) {      // obs bin
        for (std::size_t j = 0; j < n; ++j) {  // pred bin
            // image row 0 is the top: flip obs axis so it grows upward
            const std::size_t px = (n - 1 - i) * n + j;
            const std::uint32_t c = s.counts.at(i, j);
            if (c == 0) {
                rgb[3 * px] = rgb[3 * px + 1] = rgb[3 * px + 2] = 255;
            } else {
                const auto col = aod_color(log_peak > 0.0
                                               ? std::log1p(static_cast<double>(c)) / log_peak
                                               : 1.0);
                rgb[3 * px] = col[0];
                rgb[3 * px + 1] = col[1];
                rgb[3 * px + 2] = col[2];
            }
        }
    }
    // identity line
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t px = (n - 1 - k) * n + k;
        rgb[3 * px] = 220;
        rgb[3 * px + 1] = 60;
        rgb[3 * px + 2] = 60;
    }
    write_png_rgb(path, n, n, rgb);
}

void write_points_map_png(const std::string& path, const std::vector<double>& lats,
                          const std::vector<double>& lons, const std::vector<double>& values,
                          double lo, double hi) {
    if (lats.size() != lons.size() || lats.size() != values.size())
        throw DataError("write_points_map_png: length mismatch");
    const std::size_t w = 720, h = 360;
    std::vector<std::uint8_t> rgb(w * h * 3, 18);  // dark background
    // coarse graticule every 30 degrees
    for (std::size_t y = 0; y < h; y += 60)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t p = y * w + x;
            rgb[3 * p] = rgb[3 * p + 1] = rgb[3 * p + 2] = 40;
        }
    for (std::size_t x = 0; x < w; x += 60)
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t p = y * w + x;
            rgb[3 * p] = rgb[3 * p + 1] = rgb[3 * p + 2] = 40;
        }
    for (std::size_t k = 0; k < lats.size(); ++k) {
        const long cx = static_cast<long>((lons[k] + 180.0) / 360.0 * static_cast<double>(w));
        const long cy = static_cast<long>((90.0 - lats[k]) / 180.0 * static_cast<double>(h));
        const auto col = aod_color((values[k] - lo) / (hi - lo));
        for (long dy = -2; dy <= 2; ++dy)
            for (long dx = -2; dx <= 2; ++dx) {
                if (dy * dy + dx * dx > 5) continue;
                const long x = cx + dx, y = cy + dy;
                if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h))
                    continue;
                const std::size_t p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
                rgb[3 * p] = col[0];
                rgb[3 * p + 1] = col[1];
                rgb[3 * p + 2] = col[2];
            }
    }
    write_png_rgb(path, w, h, rgb);
}

}  // namespace hyperaod
