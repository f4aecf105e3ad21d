// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run manifests and atomic artifact writes. A manifest records everything
// that determines a command's outputs, so equal manifests imply equal bytes.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gotok/error.hpp"
#include "gotok/random.hpp"

#ifndef GOTOK_VERSION
#define GOTOK_VERSION "0.0.0"
#endif

namespace gotok {

inline constexpr const char* kToolVersion = GOTOK_VERSION;

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return bytes;
}

/// FNV-1a of the file's bytes, as 16 hex digits.
inline std::string file_digest(const std::filesystem::path& path) { return hex64(fnv1a(read_file(path))); }

/// Writes through a sibling temp file and renames it over `path`, so readers
/// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill) {
    const auto parent = path.parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        try {
            fill(out);
        } catch (...) {
            out.close();
            std::filesystem::remove(tmp);
            throw;
        }
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw IoError("failed writing '" + path.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
    }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    write_file_atomic(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

/// Command, configuration snapshot, input digests and tool version. No
/// clock or host data, so reruns emit the same line.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<std::pair<std::string, std::string>> inputs;  ///< (path as given, digest)
    std::string version = kToolVersion;

    void add_input(const std::filesystem::path& path) { inputs.emplace_back(path.string(), file_digest(path)); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config"] = config;
        auto in = nlohmann::ordered_json::array();
        for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"fnv1a64", d}});
        j["inputs"] = in;
        j["version"] = version;
        return j;
    }

    /// One JSON line.
    std::string line() const { return to_json().dump() + "\n"; }
};

}  // namespace gotok
