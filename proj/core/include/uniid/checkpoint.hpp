#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uniid/optim.hpp"
#include "uniid/tensor.hpp"

namespace uniid {

// Project-wide checkpoint container.
//
// File layout (all integers little-endian):
//   magic "UIDC" | version u32 | entry_count u32
//   per entry: name_len u32, name bytes (UTF-8), dtype u8 (1 = float32,
//              2 = float64), rank u32, dims u64 each, row-major payload
//   trailing u64 FNV-1a checksum over all payload bytes in file order
struct CheckpointEntry {
    std::string name;
    uint8_t dtype = 1; // 1 = f32, 2 = f64
    std::vector<uint64_t> dims;
    std::vector<float> f32;
    std::vector<double> f64;

    int64_t numel() const {
        int64_t n = 1;
        for (uint64_t d : dims) n *= (int64_t)d;
        return n;
    }
};

class Checkpoint {
public:
    static constexpr uint32_t kFormatVersion = 1;

    void put_f32(const std::string& name, const std::vector<uint64_t>& dims,
                 std::vector<float> data);
    void put_f64(const std::string& name, const std::vector<uint64_t>& dims,
                 std::vector<double> data);
    // Byte string stored as a float32 vector of code units; used for vocab
    // and run metadata so the container stays pure-tensor.
    void put_text(const std::string& name, const std::string& text);

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    const CheckpointEntry& at(const std::string& name) const;
    std::string get_text(const std::string& name) const;
    const std::vector<CheckpointEntry>& entries() const { return entries_; }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // Store round-trips. Saving writes parameters in registration order;
    // loading matches by name and validates shapes.
    template <typename S>
    void put_store(const std::string& prefix, const ParamStoreT<S>& store) {
        for (const auto& p : store) {
            std::vector<uint64_t> dims(p->tensor.shape().begin(), p->tensor.shape().end());
            if constexpr (std::is_same_v<S, float>)
                put_f32(prefix + p->name, dims, p->tensor.data());
            else
                put_f64(prefix + p->name, dims, p->tensor.data());
        }
    }

    template <typename S>
    void load_store(const std::string& prefix, ParamStoreT<S>& store) const {
        for (auto& p : store) {
            const CheckpointEntry& e = at(prefix + p->name);
            if (e.numel() != p->tensor.numel())
                throw std::runtime_error("checkpoint: size mismatch for " + p->name);
            auto& dst = p->tensor.data();
            if (e.dtype == 1)
                for (int64_t i = 0; i < e.numel(); ++i) dst[i] = (S)e.f32[i];
            else
                for (int64_t i = 0; i < e.numel(); ++i) dst[i] = (S)e.f64[i];
        }
    }

private:
    CheckpointEntry& emplace(const std::string& name);

    std::vector<CheckpointEntry> entries_;
    std::map<std::string, size_t> index_;
};

uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);

} // namespace uniid
