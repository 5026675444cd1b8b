#include "hyperaod/datapipe.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "hyperaod/common.hpp"

namespace hyperaod {

// --------------------------------------------------------------- quality

MaskGrid filter_quality(const ArrayF& radiance, const ArrayF& aod,
                        const Array<std::uint32_t>& flags, std::uint32_t bad_bit_mask) {
    if (radiance.rank() != 3) throw DataError("filter_quality: radiance must be C x H x W");
    const std::size_t h = radiance.dim(1), w = radiance.dim(2);
    if (aod.rank() != 2 || aod.dim(0) != h || aod.dim(1) != w)
        throw DataError("filter_quality: aod grid incongruent with radiance");
    if (flags.rank() != 2 || flags.dim(0) != h || flags.dim(1) != w)
        throw DataError("filter_quality: flags grid incongruent with radiance");

    const std::size_t n = h * w;
    MaskGrid valid({h, w}, 1);
    for (std::size_t p = 0; p < n; ++p) {
        if ((flags[p] & bad_bit_mask) != 0 || !std::isfinite(aod[p])) valid[p] = 0;
    }
    const std::size_t c = radiance.dim(0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* band = &radiance.data[ch * n];
        for (std::size_t p = 0; p < n; ++p)
            if (!std::isfinite(band[p])) valid[p] = 0;
    }
    return valid;
}

// -------------------------------------------------------------- resample

double bilinear_at(const ArrayF& field, double row, double col) {
    const long h = static_cast<long>(field.dim(0)), w = static_cast<long>(field.dim(1));
    auto clampi = [](long v, long hi) { return std::max(0L, std::min(v, hi - 1)); };
    const double fr = std::floor(row), fc = std::floor(col);
    const double ty = row - fr, tx = col - fc;
    const long r0 = clampi(static_cast<long>(fr), h), r1 = clampi(static_cast<long>(fr) + 1, h);
    const long c0 = clampi(static_cast<long>(fc), w), c1 = clampi(static_cast<long>(fc) + 1, w);
    const double top = (1.0 - tx) * field.at(static_cast<std::size_t>(r0), static_cast<std::size_t>(c0)) +
                       tx * field.at(static_cast<std::size_t>(r0), static_cast<std::size_t>(c1));
    const double bot = (1.0 - tx) * field.at(static_cast<std::size_t>(r1), static_cast<std::size_t>(c0)) +
                       tx * field.at(static_cast<std::size_t>(r1), static_cast<std::size_t>(c1));
    return (1.0 - ty) * top + ty * bot;
}

ResampleResult resample_aod(const ArrayF& coarse, const MaskGrid& coarse_valid,
                            double coarse_res_km, double fine_res_km) {
    if (coarse.rank() != 2 || !coarse_valid.same_shape(coarse))
        throw DataError("resample_aod: coarse field and mask must share a 2-d shape");
    if (!(coarse_res_km > 0.0) || !(fine_res_km > 0.0))
        throw ConfigError("resample_aod: resolutions must be positive");
    const double ratio = coarse_res_km / fine_res_km;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 || rounded < 1.0)
        throw ConfigError("resample_aod: resolution ratio " + std::to_string(ratio) +
                          " is not a whole number");
    const std::size_t f = static_cast<std::size_t>(rounded);
    const std::size_t hc = coarse.dim(0), wc = coarse.dim(1);
    const std::size_t hf = hc * f, wf = wc * f;

    ResampleResult out;
    out.values = ArrayF({hf, wf});
    out.valid = MaskGrid({hf, wf});

    auto clampi = [](long v, long hi) { return std::max(0L, std::min(v, hi - 1)); };
    for (std::size_t i = 0; i < hf; ++i) {
        const double sy = (static_cast<double>(i) + 0.5) / static_cast<double>(f) - 0.5;
        const double fy = std::floor(sy);
        const double ty = sy - fy;
        const std::size_t y0 = static_cast<std::size_t>(clampi(static_cast<long>(fy), static_cast<long>(hc)));
        const std::size_t y1 = static_cast<std::size_t>(clampi(static_cast<long>(fy) + 1, static_cast<long>(hc)));
        for (std::size_t j = 0; j < wf; ++j) {
            const double sx = (static_cast<double>(j) + 0.5) / static_cast<double>(f) - 0.5;
            const double fx = std::floor(sx);
            const double tx = sx - fx;
            const std::size_t x0 = static_cast<std::size_t>(clampi(static_cast<long>(fx), static_cast<long>(wc)));
            const std::size_t x1 = static_cast<std::size_t>(clampi(static_cast<long>(fx) + 1, static_cast<long>(wc)));

            bool ok = true;
            if (ty < 1.0) {
                if (tx < 1.0 && !coarse_valid.at(y0, x0)) ok = false;
                if (tx > 0.0 && !coarse_valid.at(y0, x1)) ok = false;
            }
            if (ty > 0.0) {
                if (tx < 1.0 && !coarse_valid.at(y1, x0)) ok = false;
                if (tx > 0.0 && !coarse_valid.at(y1, x1)) ok = false;
            }
            if (!ok) {
                out.values.at(i, j) = std::numeric_limits<float>::quiet_NaN();
                out.valid.at(i, j) = 0;
                continue;
            }
            const double top = (1.0 - tx) * coarse.at(y0, x0) + tx * coarse.at(y0, x1);
            const double bot = (1.0 - tx) * coarse.at(y1, x0) + tx * coarse.at(y1, x1);
            out.values.at(i, j) = static_cast<float>((1.0 - ty) * top + ty * bot);
            out.valid.at(i, j) = 1;
        }
    }
    return out;
}

// --------------------------------------------------------------- patches

std::vector<PatchSample> extract_patches(const GranuleScene& scene, std::size_t patch,
                                         double max_invalid_fraction) {
    if (patch == 0) throw ConfigError("extract_patches: patch size must be positive");
    const std::size_t hs = scene.height(), ws = scene.width(), c = scene.channels();
    const std::size_t budget = static_cast<std::size_t>(
        std::floor(max_invalid_fraction * static_cast<double>(patch * patch)));

    std::vector<PatchSample> out;
    for (std::size_t oy = 0; oy + patch <= hs; oy += patch) {
        for (std::size_t ox = 0; ox + patch <= ws; ox += patch) {
            std::size_t invalid = 0;
            for (std::size_t i = 0; i < patch; ++i)
                for (std::size_t j = 0; j < patch; ++j)
                    if (!scene.valid.at(oy + i, ox + j)) ++invalid;
            if (invalid > budget) continue;

            PatchSample s;
            s.granule_id = scene.granule_id;
            s.radiance.values = ArrayF({c, patch, patch});
            s.radiance.valid = MaskGrid({patch, patch});
            s.radiance.wavelengths = scene.wavelengths;
            s.aod.values = ArrayF({patch, patch});
            s.aod.valid = MaskGrid({patch, patch});
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < patch; ++i)
                    for (std::size_t j = 0; j < patch; ++j)
                        s.radiance.values.at(ch, i, j) = scene.radiance.at(ch, oy + i, ox + j);
            for (std::size_t i = 0; i < patch; ++i)
                for (std::size_t j = 0; j < patch; ++j) {
                    s.radiance.valid.at(i, j) = scene.valid.at(oy + i, ox + j);
                    s.aod.valid.at(i, j) = scene.valid.at(oy + i, ox + j);
                    s.aod.values.at(i, j) = scene.aod.at(oy + i, ox + j);
                }
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------- splits

SplitAssignment split_granules(const std::vector<std::string>& granule_ids,
                               std::array<double, 3> ratios, std::uint64_t seed) {
    if (granule_ids.empty()) throw DataError("split_granules: no granules");
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("split_granules: negative ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split_granules: ratios must sum to 1");

    std::vector<std::string> ids = granule_ids;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw DataError("split_granules: duplicate granule id");

    Rng rng(seed);
    rng.shuffle(ids);

    const std::size_t n = ids.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = ratios[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        remainder[k] = exact - std::floor(exact);
        assigned += counts[k];
    }
    // largest remainder, ties resolved in split order
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k)
            if (remainder[k] > remainder[best]) best = k;
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }

    SplitAssignment out;
    out.seed = seed;
    out.ratios = ratios;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const Split tag = k == 0 ? Split::train : (k == 1 ? Split::val : Split::test);
        for (std::size_t i = 0; i < counts[k]; ++i, ++idx) out.by_granule[ids[idx]] = tag;
    }
    return out;
}

// ------------------------------------------------------------ band stats

BandStats compute_band_stats(const PatchPack& pack) {
    const auto train = pack.of_split(Split::train);
    if (train.empty()) throw DataError("compute_band_stats: no training patches");
    const std::size_t c = train.front()->radiance.channels();

    std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
    std::vector<std::size_t> count(c, 0);
    for (const auto* s : train) {
        if (s->radiance.channels() != c)
            throw DataError("compute_band_stats: inconsistent channel counts");
        const std::size_t n = s->radiance.height() * s->radiance.width();
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float* band = &s->radiance.values.data[ch * n];
            for (std::size_t p = 0; p < n; ++p) {
                if (!s->radiance.valid[p]) continue;
                const double v = band[p];
                sum[ch] += v;
                sumsq[ch] += v * v;
                ++count[ch];
            }
        }
    }

    BandStats stats;
    stats.mean.resize(c);
    stats.stddev.resize(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        if (count[ch] == 0)
            throw DataError("compute_band_stats: band " + std::to_string(ch) +
                            " has no valid pixels");
        const double m = sum[ch] / static_cast<double>(count[ch]);
        double var = sumsq[ch] / static_cast<double>(count[ch]) - m * m;
        if (var < 0.0) var = 0.0;
        stats.mean[ch] = m;
        stats.stddev[ch] = std::max(std::sqrt(var), 1e-8);
    }
    return stats;
}

RadiancePatch standardize(const RadiancePatch& raw, const BandStats& stats) {
    if (stats.bands() != raw.channels())
        throw DataError("standardize: stats cover " + std::to_string(stats.bands()) +
                        " bands, patch has " + std::to_string(raw.channels()));
    RadiancePatch out;
    out.valid = raw.valid;
    out.wavelengths = raw.wavelengths;
    out.values = ArrayF(raw.values.shape);
    const std::size_t c = raw.channels(), n = raw.height() * raw.width();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double m = stats.mean[ch], inv = 1.0 / stats.stddev[ch];
        const float* src = &raw.values.data[ch * n];
        float* dst = &out.values.data[ch * n];
        for (std::size_t p = 0; p < n; ++p) {
            if (!raw.valid[p] || !std::isfinite(src[p])) {
                dst[p] = 0.0f;
            } else {
                dst[p] = static_cast<float>((static_cast<double>(src[p]) - m) * inv);
            }
        }
    }
    return out;
}

// ------------------------------------------------------------- APK1 pack

namespace {

constexpr char kPackMagic[4] = {'A', 'P', 'K', '1'};

void append_u32le(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}

}  // namespace

void write_pack(const PatchPack& pack, const std::string& path) {
    if (pack.samples.empty()) throw DataError("write_pack: empty pack");
    const auto& first = pack.samples.front();
    const std::size_t n = pack.samples.size();
    const std::size_t c = first.radiance.channels();
    const std::size_t h = first.radiance.height();
    const std::size_t w = first.radiance.width();
    for (const auto& s : pack.samples)
        if (s.radiance.channels() != c || s.radiance.height() != h || s.radiance.width() != w)
            throw DataError("write_pack: heterogeneous patch shapes");

    nlohmann::json header;
    header["version"] = 1;
    header["N"] = n;
    header["C"] = c;
    header["H"] = h;
    header["W"] = w;
    header["wavelengths"] = first.radiance.wavelengths;
    header["dtype"] = "f32";
    auto ids = nlohmann::json::array();
    auto tags = nlohmann::json::array();
    for (const auto& s : pack.samples) {
        ids.push_back(s.granule_id);
        tags.push_back(to_string(s.split));
    }
    header["granule_ids"] = std::move(ids);
    header["split_tags"] = std::move(tags);
    if (pack.band_stats)
        header["band_stats"] = {{"mean", pack.band_stats->mean}, {"std", pack.band_stats->stddev}};
    else
        header["band_stats"] = nullptr;

    std::string head = header.dump();
    std::string prefix(kPackMagic, 4);
    append_u32le(prefix, static_cast<std::uint32_t>(head.size()));

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_pack: cannot open '" + path + "' for writing");
    os.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    os.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& s : pack.samples)
        os.write(reinterpret_cast<const char*>(s.radiance.values.data.data()),
                 static_cast<std::streamsize>(c * h * w * sizeof(float)));
    for (const auto& s : pack.samples)
        os.write(reinterpret_cast<const char*>(s.aod.values.data.data()),
                 static_cast<std::streamsize>(h * w * sizeof(float)));
    for (const auto& s : pack.samples)
        os.write(reinterpret_cast<const char*>(s.radiance.valid.data.data()),
                 static_cast<std::streamsize>(h * w));
    if (!os) throw DataError("write_pack: write failed for '" + path + "'");
}

PatchPack read_pack(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_pack: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kPackMagic, 4) != 0)
        throw DataError("read_pack: bad magic in '" + path + "'");
    unsigned char lenb[4];
    is.read(reinterpret_cast<char*>(lenb), 4);
    if (!is) throw DataError("read_pack: truncated header length");
    const std::uint32_t hlen = static_cast<std::uint32_t>(lenb[0]) |
                               (static_cast<std::uint32_t>(lenb[1]) << 8) |
                               (static_cast<std::uint32_t>(lenb[2]) << 16) |
                               (static_cast<std::uint32_t>(lenb[3]) << 24);
    std::string head(hlen, '\0');
    is.read(head.data(), hlen);
    if (!is) throw DataError("read_pack: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("read_pack: header is not valid JSON: ") + e.what());
    }
    if (header.value("version", -1) != 1)
        throw DataError("read_pack: unsupported pack version");
    if (header.value("dtype", std::string()) != "f32")
        throw DataError("read_pack: unsupported dtype");

    std::size_t n, c, h, w;
    std::vector<double> wavelengths;
    std::vector<std::string> ids, tags;
    try {
        n = header.at("N").get<std::size_t>();
        c = header.at("C").get<std::size_t>();
        h = header.at("H").get<std::size_t>();
        w = header.at("W").get<std::size_t>();
        wavelengths = header.at("wavelengths").get<std::vector<double>>();
        ids = header.at("granule_ids").get<std::vector<std::string>>();
        tags = header.at("split_tags").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("read_pack: header field missing or mistyped: ") + e.what());
    }
    if (wavelengths.size() != c || ids.size() != n || tags.size() != n)
        throw DataError("read_pack: header lengths inconsistent with N/C");

    PatchPack pack;
    if (!header.at("band_stats").is_null()) {
        BandStats bs;
        bs.mean = header["band_stats"].at("mean").get<std::vector<double>>();
        bs.stddev = header["band_stats"].at("std").get<std::vector<double>>();
        if (bs.mean.size() != c || bs.stddev.size() != c)
            throw DataError("read_pack: band_stats length inconsistent with C");
        pack.band_stats = std::move(bs);
    }

    pack.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = pack.samples[i];
        s.granule_id = ids[i];
        s.split = split_from_string(tags[i]);
        s.radiance.values = ArrayF({c, h, w});
        s.radiance.wavelengths = wavelengths;
        s.aod.values = ArrayF({h, w});
        is.read(reinterpret_cast<char*>(s.radiance.values.data.data()),
                static_cast<std::streamsize>(c * h * w * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(c * h * w * sizeof(float)))
            throw DataError("read_pack: truncated radiance payload at sample " + std::to_string(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = pack.samples[i];
        is.read(reinterpret_cast<char*>(s.aod.values.data.data()),
                static_cast<std::streamsize>(h * w * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(h * w * sizeof(float)))
            throw DataError("read_pack: truncated aod payload at sample " + std::to_string(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = pack.samples[i];
        s.radiance.valid = MaskGrid({h, w});
        is.read(reinterpret_cast<char*>(s.radiance.valid.data.data()),
                static_cast<std::streamsize>(h * w));
        if (is.gcount() != static_cast<std::streamsize>(h * w))
            throw DataError("read_pack: truncated mask payload at sample " + std::to_string(i));
        s.aod.valid = s.radiance.valid;
    }
    return pack;
}

// ------------------------------------------------------ synthetic granule

namespace {

ArrayD gaussian_blur(const ArrayD& in, double sigma) {
    const long h = static_cast<long>(in.dim(0)), w = static_cast<long>(in.dim(1));
    const long radius = std::max(1L, static_cast<long>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (long k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = v;
        ksum += v;
    }
    for (auto& v : kernel) v /= ksum;

    auto reflect = [](long i, long n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };

    ArrayD tmp(in.shape), out(in.shape);
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       in.at(static_cast<std::size_t>(i), static_cast<std::size_t>(reflect(j + k, w)));
            tmp.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
        }
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp.at(static_cast<std::size_t>(reflect(i + k, h)), static_cast<std::size_t>(j));
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
        }
    return out;
}

}  // namespace

GranuleScene synth_granule(std::uint64_t seed, std::size_t scene_height,
                           std::size_t scene_width, std::size_t channels) {
    if (channels < 2) throw ConfigError("synth_granule: need at least 2 channels");
    if (scene_height < 8 || scene_width < 8)
        throw ConfigError("synth_granule: scene too small");

    Rng rng(seed);
    const std::size_t hs = scene_height, ws = scene_width, n = hs * ws;

    // AOD: squared blurred white noise, scaled to [0, 1.5]
    ArrayD noise({hs, ws});
    for (auto& v : noise.data) v = rng.normal();
    ArrayD smooth = gaussian_blur(noise, 6.0);
    double mx = 0.0;
    for (auto& v : smooth.data) {
        v = v * v;
        mx = std::max(mx, v);
    }
    const double scale = mx > 0.0 ? 1.5 / mx : 0.0;

    GranuleScene scene;
    scene.granule_id = "SYN-" + std::to_string(seed);
    scene.acquisition_time =
        parse_utc("2025-02-20T00:00:00Z") +
        static_cast<std::int64_t>(rng.uniform() * 86400.0 * 28.0);
    scene.aod = ArrayF({hs, ws});
    for (std::size_t p = 0; p < n; ++p)
        scene.aod[p] = static_cast<float>(smooth[p] * scale);

    // large-scale scene trend, normalized to [0, 1]; a confounder that a
    // pixel-wise retrieval cannot separate from the aerosol signal
    ArrayD tnoise({hs, ws});
    for (auto& v : tnoise.data) v = rng.normal();
    ArrayD trend = gaussian_blur(tnoise, 32.0);
    double tmin = trend[0], tmax = trend[0];
    for (double v : trend.data) {
        tmin = std::min(tmin, v);
        tmax = std::max(tmax, v);
    }
    const double tspan = tmax - tmin > 1e-12 ? tmax - tmin : 1.0;
    for (auto& v : trend.data) v = (v - tmin) / tspan;

    scene.wavelengths.resize(channels);
    for (std::size_t c = 0; c < channels; ++c)
        scene.wavelengths[c] =
            340.0 + 555.0 * static_cast<double>(c) / static_cast<double>(channels - 1);

    // fixed spectral signature (seed independent): radiance_c = a_c exp(-b_c aod)
    // + s_c trend + noise. The trend coefficient follows the first-order AOD
    // sensitivity a_c b_c exp(-b_c tau0), so a pixel-wise inversion cannot
    // separate the two latents; spatial context can, via their different
    // correlation lengths.
    scene.radiance = ArrayF({channels, hs, ws});
    for (std::size_t c = 0; c < channels; ++c) {
        const double u = static_cast<double>(c) / static_cast<double>(channels - 1);
        const double ac = 0.90 + 0.35 * std::sin(2.2 * M_PI * u + 0.4);
        const double bc = 1.25 + 0.01 * std::sin(1.4 * M_PI * u + 1.0);
        const double sc = 0.80 * ac * bc * std::exp(-0.5 * bc);
        float* band = &scene.radiance.data[c * n];
        for (std::size_t p = 0; p < n; ++p) {
            const double v = ac * std::exp(-bc * static_cast<double>(scene.aod[p])) +
                             sc * trend[p] + 0.01 * rng.normal();
            band[p] = static_cast<float>(v);
        }
    }

    // ~0.5% invalid pixels in small blobs; NaN-filled like real fill values
    scene.valid = MaskGrid({hs, ws}, 1);
    const double target = 0.005 * static_cast<double>(n);
    const std::size_t blobs = std::max<std::size_t>(1, static_cast<std::size_t>(target / 30.0));
    for (std::size_t b = 0; b < blobs; ++b) {
        const long cy = static_cast<long>(rng.index(hs));
        const long cx = static_cast<long>(rng.index(ws));
        const long r = 2 + static_cast<long>(rng.index(3));
        for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx) {
                if (dy * dy + dx * dx > r * r) continue;
                const long y = cy + dy, x = cx + dx;
                if (y < 0 || x < 0 || y >= static_cast<long>(hs) || x >= static_cast<long>(ws))
                    continue;
                scene.valid.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 0;
            }
    }
    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (std::size_t p = 0; p < n; ++p) {
        if (scene.valid[p]) continue;
        scene.aod[p] = nan;
        for (std::size_t c = 0; c < channels; ++c) scene.radiance.data[c * n + p] = nan;
    }

    // geolocation: regular 1.2 km grid around a seeded center
    const double lat0 = rng.uniform(-55.0, 55.0);
    const double lon0 = rng.uniform(-160.0, 160.0);
    const double step = 0.0108;  // ~1.2 km in latitude degrees
    scene.lat = ArrayF({hs, ws});
    scene.lon = ArrayF({hs, ws});
    for (std::size_t i = 0; i < hs; ++i)
        for (std::size_t j = 0; j < ws; ++j) {
            double la = lat0 + (static_cast<double>(i) - static_cast<double>(hs) / 2.0) * step;
            double lo = lon0 + (static_cast<double>(j) - static_cast<double>(ws) / 2.0) * step;
            scene.lat.at(i, j) = static_cast<float>(std::clamp(la, -90.0, 90.0));
            scene.lon.at(i, j) = static_cast<float>(std::clamp(lo, -180.0, 180.0));
        }
    return scene;
}

}  // namespace hyperaod
