#pragma once

// Self-describing binary checkpoint: magic, version, config echo (JSON),
// per-tensor name/shape/offset table, raw float64 payload, trailing CRC32.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "skvmn/errors.hpp"
#include "skvmn/model.hpp"

namespace skvmn {

namespace detail {

constexpr std::array<char, 8> kCkptMagic = {'S', 'K', 'V', 'M', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

inline std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct ByteWriter {
    std::vector<unsigned char> bytes;
    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;
    void raw(void* p, std::size_t n) {
        if (pos + n > bytes.size())
            throw FormatError("checkpoint truncated at offset " + std::to_string(pos));
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParameterStore& params,
                            const ModelConfig& config) {
    detail::ByteWriter w;
    w.raw(detail::kCkptMagic.data(), detail::kCkptMagic.size());
    w.u32(detail::kCkptVersion);
    w.str(config.to_json().dump());
    w.u32(static_cast<std::uint32_t>(params.size()));
    // name/shape/offset table, offsets relative to payload start
    std::uint64_t offset = 0;
    for (const auto& [name, t] : params.all()) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rows()));
        w.u32(static_cast<std::uint32_t>(t.cols()));
        w.u64(offset);
        offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
    }
    for (const auto& [name, t] : params.all())
        for (double v : t.data()) w.f64(v);
    w.u32(detail::crc32(w.bytes.data(), w.bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw FormatError("write failed for '" + path + "'");
}

inline std::pair<ParameterStore, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < detail::kCkptMagic.size() + 8)
        throw FormatError("checkpoint truncated at offset " + std::to_string(bytes.size()));

    std::uint32_t file_crc;
    std::memcpy(&file_crc, bytes.data() + bytes.size() - 4, 4);
    const std::uint32_t computed = detail::crc32(bytes.data(), bytes.size() - 4);
    if (file_crc != computed)
        throw FormatError("checkpoint checksum mismatch at offset " +
                          std::to_string(bytes.size() - 4));

    detail::ByteReader r{bytes};
    std::array<char, 8> magic;
    r.raw(magic.data(), magic.size());
    if (magic != detail::kCkptMagic) throw FormatError("bad magic at offset 0");
    const std::uint32_t version = r.u32();
    if (version != detail::kCkptVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    ModelConfig config = ModelConfig::from_json(nlohmann::json::parse(r.str()));
    const std::uint32_t count = r.u32();
    struct Entry {
        std::string name;
        int rows, cols;
        std::uint64_t offset;
    };
    std::vector<Entry> table;
    table.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = r.str();
        e.rows = static_cast<int>(r.u32());
        e.cols = static_cast<int>(r.u32());
        e.offset = r.u64();
        table.push_back(std::move(e));
    }
    const std::size_t payload_start = r.pos;
    ParameterStore params;
    for (const auto& e : table) {
        const std::size_t begin = payload_start + e.offset;
        const std::size_t n = static_cast<std::size_t>(e.rows) * e.cols;
        if (begin + n * sizeof(double) > bytes.size() - 4)
            throw FormatError("tensor '" + e.name + "' payload truncated at offset " +
                              std::to_string(begin));
        std::vector<double> data(n);
        std::memcpy(data.data(), bytes.data() + begin, n * sizeof(double));
        params.add(e.name, Tensor::from_data(e.rows, e.cols, std::move(data)));
    }
    return {std::move(params), std::move(config)};
}

}  // namespace skvmn
