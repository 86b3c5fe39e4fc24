#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uniid {

// key=value run configuration. Lines starting with '#' and blank lines are
// ignored; later assignments override earlier ones.
class KvConfig {
public:
    static KvConfig load(const std::string& path);
    static KvConfig parse(const std::string& text);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& items() const { return values_; }

    // Canonical serialized form (sorted keys), used for manifests.
    std::string echo() const;
    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

// Every CLI run writes one of these next to its outputs: the exact config it
// ran with, the seed, and the artifacts it produced.
struct RunManifest {
    std::string command;
    KvConfig config;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> outputs; // label -> path or value

    void add(const std::string& label, const std::string& value) { outputs.push_back({label, value}); }
    void save(const std::string& path) const;
};

} // namespace uniid
