#include "hyperaod/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hyperaod/baselines.hpp"
#include "hyperaod/model.hpp"

namespace hyperaod {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'P', '1'};

void write_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const Regressor& model, const BandStats& stats) {
    if (stats.mean.size() != stats.stddev.size())
        throw DataError("save_checkpoint: band stats mean/std length mismatch");

    nlohmann::json header;
    header["format"] = kCheckpointFormat;
    header["model_kind"] = model.kind();
    header["config"] = model.config_json();
    header["band_stats"] = {{"mean", stats.mean}, {"std", stats.stddev}};
    header["dtype"] = "f64";
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto* p : model.params().items())
        tensors.push_back({{"name", p->name}, {"shape", p->value.shape}});
    header["tensors"] = tensors;

    const std::string hs = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_u32le(os, static_cast<std::uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto* p : model.params().items())
        os.write(reinterpret_cast<const char*>(p->value.data.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!os) throw DataError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("read_checkpoint: bad magic in '" + path + "'");
    const std::uint32_t hlen = read_u32le(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    if (!is) throw DataError("read_checkpoint: truncated header in '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("read_checkpoint: header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    ck.format_version = header.value("format", std::string());
    if (ck.format_version != kCheckpointFormat)
        throw DataError("read_checkpoint: unsupported format '" + ck.format_version +
                        "' (expected '" + kCheckpointFormat + "')");
    if (header.value("dtype", std::string()) != "f64")
        throw DataError("read_checkpoint: unsupported tensor dtype");
    ck.model_kind = header.at("model_kind").get<std::string>();
    ck.config = header.at("config");
    ck.stats.mean = header.at("band_stats").at("mean").get<std::vector<double>>();
    ck.stats.stddev = header.at("band_stats").at("std").get<std::vector<double>>();

    for (const auto& t : header.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        ArrayD a(shape);
        is.read(reinterpret_cast<char*>(a.data.data()),
                static_cast<std::streamsize>(a.size() * sizeof(double)));
        if (is.gcount() != static_cast<std::streamsize>(a.size() * sizeof(double)))
            throw DataError("read_checkpoint: truncated payload for tensor '" + name + "'");
        ck.tensors.emplace_back(name, std::move(a));
    }
    return ck;
}

std::unique_ptr<Regressor> build_model(const Checkpoint& ck) {
    std::unique_ptr<Regressor> model;
    if (ck.model_kind == "vitcg") {
        model = std::make_unique<ViTCG>(ViTCGConfig::from_json(ck.config), /*seed=*/0);
    } else if (ck.model_kind == "pixel_dnn") {
        model = std::make_unique<PixelDnn>(PixelDNNConfig::from_json(ck.config), /*seed=*/0);
    } else {
        throw DataError("build_model: unknown model kind '" + ck.model_kind + "'");
    }

    auto& reg = model->params();
    if (ck.tensors.size() != reg.items().size())
        throw DataError("build_model: checkpoint has " + std::to_string(ck.tensors.size()) +
                        " tensors, model expects " + std::to_string(reg.items().size()));
    for (const auto& [name, tensor] : ck.tensors) {
        auto* p = reg.find(name);
        if (!p) throw DataError("build_model: unknown tensor '" + name + "'");
        if (p->value.shape != tensor.shape)
            throw DataError("build_model: shape mismatch for '" + name + "': checkpoint " +
                            tensor.shape_str() + " vs model " + p->value.shape_str());
        p->value = tensor;
    }
    return model;
}

}  // namespace hyperaod
