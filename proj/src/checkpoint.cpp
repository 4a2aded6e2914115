#include "fashedit/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fashedit/image.hpp"

namespace fashedit {

namespace {

constexpr char kMagic[8] = {'F', 'E', 'D', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    size_t n = out.size();
    out.resize(n + sizeof(T));
    memcpy(out.data() + n, &v, sizeof(T));
}

template <typename T>
T get(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) fail(ErrorKind::Io, "checkpoint: truncated");
    T v;
    memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& store, const nlohmann::json& header) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    std::string hdr = header.dump();
    put<uint32_t>(out, (uint32_t)hdr.size());
    out.insert(out.end(), hdr.begin(), hdr.end());
    put<uint32_t>(out, (uint32_t)store.size());
    for (const auto& [name, p] : store) {
        put<uint16_t>(out, (uint16_t)name.size());
        out.insert(out.end(), name.begin(), name.end());
        put<uint8_t>(out, 0);  // dtype f32
        put<uint8_t>(out, (uint8_t)p.value.shape.size());
        for (int64_t d : p.value.shape) put<int64_t>(out, d);
        size_t n = out.size();
        size_t bytes = p.value.data.size() * sizeof(float);
        out.resize(n + bytes);
        memcpy(out.data() + n, p.value.data.data(), bytes);
    }
    // atomic: write_file_bytes goes through a temp file + rename
    write_file_bytes(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::Dependency, "checkpoint not found: " + path);
    std::vector<uint8_t> buf = read_file_bytes(path);
    if (buf.size() < 8 || memcmp(buf.data(), kMagic, 8) != 0)
        fail(ErrorKind::Io, "checkpoint: bad magic in " + path);
    size_t pos = 8;
    uint32_t hdrLen = get<uint32_t>(buf, pos);
    if (pos + hdrLen > buf.size()) fail(ErrorKind::Io, "checkpoint: truncated header");
    LoadedCheckpoint out;
    out.header = nlohmann::json::parse(std::string((const char*)buf.data() + pos, hdrLen));
    pos += hdrLen;
    uint32_t count = get<uint32_t>(buf, pos);
    for (uint32_t i = 0; i < count; i++) {
        uint16_t nameLen = get<uint16_t>(buf, pos);
        if (pos + nameLen > buf.size()) fail(ErrorKind::Io, "checkpoint: truncated name");
        std::string name((const char*)buf.data() + pos, nameLen);
        pos += nameLen;
        uint8_t dtype = get<uint8_t>(buf, pos);
        if (dtype != 0) fail(ErrorKind::Io, "checkpoint: unsupported dtype");
        uint8_t ndim = get<uint8_t>(buf, pos);
        std::vector<int64_t> shape(ndim);
        for (int d = 0; d < ndim; d++) shape[d] = get<int64_t>(buf, pos);
        auto& p = out.store.declare(name, shape);
        size_t bytes = p.value.data.size() * sizeof(float);
        if (pos + bytes > buf.size()) fail(ErrorKind::Io, "checkpoint: truncated tensor data");
        memcpy(p.value.data.data(), buf.data() + pos, bytes);
        pos += bytes;
    }
    return out;
}

}  // namespace fashedit
