#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctxnet/kvconfig.hpp"
#include "ctxnet/network.hpp"
#include "ctxnet/optimizer.hpp"
#include "ctxnet/pointcloud.hpp"

namespace ctxnet {

// Layout (little-endian):
//   "3DCP"  u8 version=1
//   u32 len, UTF-8 key-value text: the network config ("net.*") plus run
//            metadata ("meta.*")
//   u32 record count
//   per record: u32 len, path; u8 rank; u32 extents[rank]; f32 data
// Optimizer moments, when present, are records named "opt.m/<path>" and
// "opt.v/<path>"; the step count lives in "meta.opt_step".

inline constexpr std::array<char, 4> kCheckpointMagic{'3', 'D', 'C', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
    NetworkConfig config;
    ModelParams<float> params;
    KeyValues meta;  // "meta.*" keys only
    bool has_optimizer = false;
    std::uint64_t opt_step = 0;
    std::map<std::string, std::vector<float>> opt_m, opt_v;
};

namespace detail {

inline void write_record(std::ostream& os, const std::string& path, const ad::Extents& shape,
                         std::span<const float> data) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(path.size()));
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(shape.size()));
    for (auto e : shape) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    for (float v : data) put_le<float>(os, v);
}

inline std::string read_string(std::istream& is, std::uint32_t len, const char* what) {
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) fail("format", std::string("truncated file while reading ") + what);
    return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    os.write(kCheckpointMagic.data(), 4);
    detail::put_le<std::uint8_t>(os, kCheckpointVersion);
    KeyValues kv = ck.config.to_kv();
    kv.merge(ck.meta);
    if (ck.has_optimizer) kv.set("meta.opt_step", std::to_string(ck.opt_step));
    const std::string text = kv.to_text();
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    std::size_t records = ck.params.tensors.size();
    if (ck.has_optimizer) records += ck.opt_m.size() + ck.opt_v.size();
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(records));
    for (const auto& [key, t] : ck.params.tensors) detail::write_record(os, key, t.shape(), t.value());
    if (ck.has_optimizer) {
        for (const auto& [key, m] : ck.opt_m) detail::write_record(os, "opt.m/" + key, {m.size()}, m);
        for (const auto& [key, v] : ck.opt_v) detail::write_record(os, "opt.v/" + key, {v.size()}, v);
    }
}

inline Checkpoint read_checkpoint(std::istream& is) {
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    require(is && magic == kCheckpointMagic, "format", "bad magic, not a checkpoint");
    const auto version = detail::get_le<std::uint8_t>(is, "version");
    require(version == kCheckpointVersion, "format", "unsupported checkpoint version " + std::to_string(version));
    const auto text_len = detail::get_le<std::uint32_t>(is, "config length");
    const auto kv = KeyValues::parse(detail::read_string(is, text_len, "config"));

    Checkpoint ck;
    ck.config = NetworkConfig::from_kv(kv);
    for (const auto& [k, v] : kv.entries())
        if (k.rfind("meta.", 0) == 0 && k != "meta.opt_step") ck.meta.set(k, v);
    if (kv.has("meta.opt_step")) {
        ck.has_optimizer = true;
        ck.opt_step = kv.get_as<std::uint64_t>("meta.opt_step");
    }

    const auto records = detail::get_le<std::uint32_t>(is, "record count");
    for (std::uint32_t r = 0; r < records; ++r) {
        const auto len = detail::get_le<std::uint32_t>(is, "path length");
        require(len < (1u << 16), "format", "implausible parameter path length");
        const auto path = detail::read_string(is, len, "parameter path");
        const auto rank = detail::get_le<std::uint8_t>(is, "rank");
        require(rank >= 1 && rank <= 4, "format", "bad rank for '" + path + "'");
        ad::Extents shape(rank);
        for (auto& e : shape) {
            e = detail::get_le<std::uint32_t>(is, "extent");
            require(e > 0, "format", "zero extent for '" + path + "'");
        }
        std::vector<float> data(ad::extent_product(shape));
        for (auto& v : data) v = detail::get_le<float>(is, "parameter data");
        if (path.rfind("opt.m/", 0) == 0) ck.opt_m[path.substr(6)] = std::move(data);
        else if (path.rfind("opt.v/", 0) == 0) ck.opt_v[path.substr(6)] = std::move(data);
        else ck.params.tensors.emplace(path, ad::Tensorf::parameter(shape, std::move(data)));
    }

    // the record set must be exactly what the config declares
    const auto specs = param_specs(ck.config);
    require(specs.size() == ck.params.tensors.size(), "format",
            "checkpoint has " + std::to_string(ck.params.tensors.size()) + " parameters, config declares " +
                std::to_string(specs.size()));
    for (const auto& s : specs) {
        auto it = ck.params.tensors.find(s.key);
        require(it != ck.params.tensors.end(), "format", "checkpoint lacks parameter '" + s.key + "'");
        require(it->second.shape() == s.shape, "format", "parameter '" + s.key + "' has shape " +
                                                             ad::extents_str(it->second.shape()) + ", expected " +
                                                             ad::extents_str(s.shape));
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "io", "cannot write " + path);
    write_checkpoint(os, ck);
    require(static_cast<bool>(os), "io", "write failed for " + path);
}

inline void save_checkpoint(const ModelParams<float>& params, const NetworkConfig& cfg, const std::string& path) {
    Checkpoint ck;
    ck.config = cfg;
    ck.params = params;
    save_checkpoint(ck, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io", "cannot open " + path);
    return read_checkpoint(is);
}

inline std::size_t serialized_size(const Checkpoint& ck) {
    std::ostringstream os;
    write_checkpoint(os, ck);
    return os.str().size();
}

}  // namespace ctxnet
