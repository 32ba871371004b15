#include "arbsr/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include <json.hpp>

namespace arbsr {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'B', 'S', 'R', '0', '0', '1'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u64le(std::FILE* f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    if (std::fwrite(b, 1, 8, f) != 8) throw io_error("checkpoint: short write");
}

std::uint64_t get_u64le(std::FILE* f, const std::string& path) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw io_error("truncated checkpoint " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

int require_int(const nlohmann::json& j, const char* section, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw io_error(std::string("checkpoint header: missing or non-integer field '") +
                       section + "." + key + "'");
    return j[key].get<int>();
}

}  // namespace

void save_checkpoint(ArbNet& model, const std::string& path) {
    nlohmann::json header;
    header["config"] = {
        {"blocks", model.cfg.blocks},       {"channels", model.cfg.channels},
        {"adapt_every", model.cfg.adapt_every}, {"experts", model.cfg.experts},
        {"kernel", model.cfg.kernel},       {"hidden", model.cfg.hidden},
        {"variant", variant_name(model.cfg.variant)},
    };
    auto params = model.parameters();
    nlohmann::json manifest = nlohmann::json::array();
    for (const Parameter* p : params) {
        const Shape4& s = p->value.shape;
        manifest.push_back({{"name", p->name}, {"shape", {s.n, s.c, s.h, s.w}}});
    }
    header["manifest"] = std::move(manifest);
    const std::string text = header.dump();

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw io_error("cannot write checkpoint " + path);
    if (std::fwrite(kMagic, 1, 8, f.get()) != 8) throw io_error("checkpoint: short write");
    put_u64le(f.get(), text.size());
    if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
        throw io_error("checkpoint: short write");
    // Blob section: weights flattened in manifest order, 32-bit.
    std::vector<unsigned char> buf;
    for (const Parameter* p : params) {
        buf.clear();
        buf.reserve(p->value.data.size() * 4);
        for (const real v : p->value.data) {
            const float fv = (float)v;
            std::uint32_t bits;
            std::memcpy(&bits, &fv, 4);
            for (int i = 0; i < 4; ++i) buf.push_back((unsigned char)(bits >> (8 * i)));
        }
        if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
            throw io_error("checkpoint: short write");
    }
    if (std::fflush(f.get()) != 0) throw io_error("cannot flush checkpoint " + path);
}

ArbNet load_checkpoint(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw io_error("cannot open checkpoint " + path);
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8) throw io_error("truncated checkpoint " + path);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw io_error("bad checkpoint magic in " + path);
    const std::uint64_t len = get_u64le(f.get(), path);
    if (len == 0 || len > (1ull << 30)) throw io_error("implausible header length in " + path);
    std::string text(len, '\0');
    if (std::fread(text.data(), 1, len, f.get()) != len)
        throw io_error("truncated checkpoint header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw io_error("checkpoint header is not valid JSON (" + std::string(e.what()) + ")");
    }
    if (!header.contains("config") || !header["config"].is_object())
        throw io_error("checkpoint header: missing field 'config'");
    const nlohmann::json& jc = header["config"];
    ModelConfig cfg;
    cfg.blocks = require_int(jc, "config", "blocks");
    cfg.channels = require_int(jc, "config", "channels");
    cfg.adapt_every = require_int(jc, "config", "adapt_every");
    cfg.experts = require_int(jc, "config", "experts");
    cfg.kernel = require_int(jc, "config", "kernel");
    cfg.hidden = require_int(jc, "config", "hidden");
    if (!jc.contains("variant") || !jc["variant"].is_string())
        throw io_error("checkpoint header: missing field 'config.variant'");
    cfg.variant = parse_variant(jc["variant"].get<std::string>());
    cfg.validate();

    ArbNet model(cfg);
    auto params = model.parameters();
    if (!header.contains("manifest") || !header["manifest"].is_array())
        throw io_error("checkpoint header: missing field 'manifest'");
    const nlohmann::json& jm = header["manifest"];
    if (jm.size() != params.size())
        throw io_error("checkpoint manifest: has " + std::to_string(jm.size()) +
                       " entries, model needs " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const nlohmann::json& e = jm[i];
        if (!e.contains("name") || !e["name"].is_string() || !e.contains("shape") ||
            !e["shape"].is_array() || e["shape"].size() != 4)
            throw io_error("checkpoint manifest entry " + std::to_string(i) +
                           ": malformed (need name + 4-component shape)");
        const std::string name = e["name"].get<std::string>();
        if (name != params[i]->name)
            throw io_error("checkpoint manifest entry " + std::to_string(i) + ": name '" +
                           name + "' does not match expected '" + params[i]->name + "'");
        const Shape4& want = params[i]->value.shape;
        const int got[4] = {e["shape"][0].get<int>(), e["shape"][1].get<int>(),
                            e["shape"][2].get<int>(), e["shape"][3].get<int>()};
        if (got[0] != want.n || got[1] != want.c || got[2] != want.h || got[3] != want.w)
            throw io_error("checkpoint manifest entry '" + name + "': shape " +
                           Shape4{got[0], got[1], got[2], got[3]}.str() + " does not match " +
                           want.str());
    }

    std::vector<unsigned char> buf;
    for (Parameter* p : params) {
        const std::size_t bytes = p->value.data.size() * 4;
        buf.resize(bytes);
        if (std::fread(buf.data(), 1, bytes, f.get()) != bytes)
            throw io_error("checkpoint blob for '" + p->name + "' is truncated");
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= std::uint32_t(buf[i * 4 + k]) << (8 * k);
            float fv;
            std::memcpy(&fv, &bits, 4);
            p->value.data[i] = (real)fv;
        }
    }
    return model;
}

}  // namespace arbsr
