#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mftk/errors.hpp"

namespace mftk {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over the file bytes; an integrity fingerprint for reproducibility
// checks, not a cryptographic digest.
inline std::uint64_t fnv1a64(const char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for digest");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

/// Reproducibility record written next to every command's outputs.
struct RunManifest {
    std::vector<std::string> command_line;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::string> notes;

    void write(const std::string& path) const {
        nlohmann::ordered_json j;
        j["tool"] = "mftk";
        j["version"] = kToolVersion;
        j["command_line"] = command_line;
        j["config"] = config;
        if (seed) j["seed"] = *seed;
        auto digest_list = [](const std::vector<std::string>& paths) {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& p : paths)
                arr.push_back({{"path", p}, {"digest", file_digest(p)}});
            return arr;
        };
        j["inputs"] = digest_list(inputs);
        j["outputs"] = digest_list(outputs);
        j["notes"] = notes;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << j.dump(2) << "\n";
        if (!out) throw IoError("write failed for '" + path + "'");
    }
};

} // namespace mftk
