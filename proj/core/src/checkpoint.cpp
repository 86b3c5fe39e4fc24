#include "uniid/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace uniid {

namespace {

constexpr char kMagic[4] = {'U', 'I', 'D', 'C'};

template <typename T>
void write_le(std::ofstream& os, T v) {
    // host is little-endian; raw bytes are the wire format
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t seed) {
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

CheckpointEntry& Checkpoint::emplace(const std::string& name) {
    if (index_.count(name)) throw std::runtime_error("checkpoint: duplicate entry " + name);
    index_[name] = entries_.size();
    entries_.emplace_back();
    entries_.back().name = name;
    return entries_.back();
}

void Checkpoint::put_f32(const std::string& name, const std::vector<uint64_t>& dims,
                         std::vector<float> data) {
    CheckpointEntry& e = emplace(name);
    e.dtype = 1;
    e.dims = dims;
    e.f32 = std::move(data);
    if (e.numel() != (int64_t)e.f32.size())
        throw std::runtime_error("checkpoint: dims/payload mismatch for " + name);
}

void Checkpoint::put_f64(const std::string& name, const std::vector<uint64_t>& dims,
                         std::vector<double> data) {
    CheckpointEntry& e = emplace(name);
    e.dtype = 2;
    e.dims = dims;
    e.f64 = std::move(data);
    if (e.numel() != (int64_t)e.f64.size())
        throw std::runtime_error("checkpoint: dims/payload mismatch for " + name);
}

void Checkpoint::put_text(const std::string& name, const std::string& text) {
    std::vector<float> data(text.size());
    for (size_t i = 0; i < text.size(); ++i) data[i] = (float)(uint8_t)text[i];
    put_f32(name, {(uint64_t)text.size()}, std::move(data));
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("checkpoint: missing entry " + name);
    return entries_[it->second];
}

std::string Checkpoint::get_text(const std::string& name) const {
    const CheckpointEntry& e = at(name);
    std::string s(e.f32.size(), '\0');
    for (size_t i = 0; i < e.f32.size(); ++i) s[i] = (char)(uint8_t)e.f32[i];
    return s;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    write_le<uint32_t>(os, kFormatVersion);
    write_le<uint32_t>(os, (uint32_t)entries_.size());

    uint64_t checksum = 0xcbf29ce484222325ull;
    for (const auto& e : entries_) {
        write_le<uint32_t>(os, (uint32_t)e.name.size());
        os.write(e.name.data(), (std::streamsize)e.name.size());
        write_le<uint8_t>(os, e.dtype);
        write_le<uint32_t>(os, (uint32_t)e.dims.size());
        for (uint64_t d : e.dims) write_le<uint64_t>(os, d);
        const uint8_t* payload;
        size_t nbytes;
        if (e.dtype == 1) {
            payload = reinterpret_cast<const uint8_t*>(e.f32.data());
            nbytes = e.f32.size() * sizeof(float);
        } else {
            payload = reinterpret_cast<const uint8_t*>(e.f64.data());
            nbytes = e.f64.size() * sizeof(double);
        }
        os.write(reinterpret_cast<const char*>(payload), (std::streamsize)nbytes);
        checksum = fnv1a64(payload, nbytes, checksum);
    }
    write_le<uint64_t>(os, checksum);
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_le<uint32_t>(is);
    if (version != kFormatVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = read_le<uint32_t>(is);

    Checkpoint ckpt;
    uint64_t checksum = 0xcbf29ce484222325ull;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_le<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint8_t dtype = read_le<uint8_t>(is);
        const uint32_t rank = read_le<uint32_t>(is);
        std::vector<uint64_t> dims(rank);
        for (uint32_t d = 0; d < rank; ++d) dims[d] = read_le<uint64_t>(is);
        int64_t n = 1;
        for (uint64_t d : dims) n *= (int64_t)d;
        if (dtype == 1) {
            std::vector<float> data(n);
            is.read(reinterpret_cast<char*>(data.data()), n * (int64_t)sizeof(float));
            checksum = fnv1a64(reinterpret_cast<const uint8_t*>(data.data()),
                               (size_t)n * sizeof(float), checksum);
            ckpt.put_f32(name, dims, std::move(data));
        } else if (dtype == 2) {
            std::vector<double> data(n);
            is.read(reinterpret_cast<char*>(data.data()), n * (int64_t)sizeof(double));
            checksum = fnv1a64(reinterpret_cast<const uint8_t*>(data.data()),
                               (size_t)n * sizeof(double), checksum);
            ckpt.put_f64(name, dims, std::move(data));
        } else {
            throw std::runtime_error("checkpoint: unknown dtype code " + std::to_string(dtype));
        }
        if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    }
    const uint64_t stored = read_le<uint64_t>(is);
    if (!is || stored != checksum) throw std::runtime_error("checkpoint: checksum mismatch in " + path);
    return ckpt;
}

} // namespace uniid
