#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fredformer::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct InputDigest {
    std::string role;  // "data", "checkpoint", ...
    std::filesystem::path path;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_text;  // every option, defaults included, in config-file syntax
    std::map<std::string, std::string> config;
    std::vector<InputDigest> inputs;
    unsigned long long seed = 0;
    std::filesystem::path out_dir;
    std::string tool_version;
    std::string replay;  // command line that reruns this invocation from the replay config

    std::string to_json() const;
};

inline constexpr const char* kManifestFile = "run_manifest.json";
inline constexpr const char* kReplayConfigFile = "run_config.toml";

/// Writes run_manifest.json and the replay config into `manifest.out_dir`.
void write_manifest(const RunManifest& manifest);

}  // namespace fredformer::cli
