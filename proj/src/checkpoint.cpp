#include "nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace nn {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'C', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

struct Reader {
    const std::vector<unsigned char>& b;
    size_t pos = 0;
    std::string path;

    void need(size_t n) {
        if (pos + n > b.size()) throw CheckpointError("truncated checkpoint: " + path);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = uint32_t(b[pos]) | (uint32_t(b[pos + 1]) << 8) | (uint32_t(b[pos + 2]) << 16) |
                     (uint32_t(b[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        const uint64_t lo = u32();
        return lo | (uint64_t(u32()) << 32);
    }
    uint8_t u8() {
        need(1);
        return b[pos++];
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<SavedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const SavedTensor& t : tensors) {
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        out.put(static_cast<char>(t.dtype));
        out.put(static_cast<char>(t.shape.size()));
        for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
        put_u64(out, t.bytes.size());
        out.write(reinterpret_cast<const char*>(t.bytes.data()),
                  static_cast<std::streamsize>(t.bytes.size()));
    }
    if (!out) throw CheckpointError("write failed: " + path);
}

std::vector<SavedTensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    Reader r{bytes, 0, path};

    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointError("bad magic in " + path + " (not an NNCP checkpoint)");
    r.pos = 4;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    const uint32_t count = r.u32();
    std::vector<SavedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        SavedTensor t;
        const uint32_t name_len = r.u32();
        r.need(name_len);
        t.name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
        r.pos += name_len;
        const uint8_t dtype = r.u8();
        if (dtype > 1) throw CheckpointError("unknown dtype in " + path);
        t.dtype = static_cast<DType>(dtype);
        const uint8_t ndim = r.u8();
        t.shape.resize(ndim);
        int64_t elems = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            t.shape[d] = static_cast<int>(r.u32());
            elems *= t.shape[d];
        }
        const uint64_t payload = r.u64();
        const size_t elem_size = t.dtype == DType::f32 ? 4 : 8;
        if (payload != uint64_t(elems) * elem_size)
            throw CheckpointError("tensor '" + t.name + "' payload size does not match shape");
        r.need(payload);
        t.bytes.assign(bytes.begin() + std::ptrdiff_t(r.pos),
                       bytes.begin() + std::ptrdiff_t(r.pos + payload));
        r.pos += payload;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace nn
