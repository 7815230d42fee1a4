#pragma once

#include "fredformer/data.hpp"
#include "fredformer/model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace fredformer {

inline constexpr const char* kCheckpointFormat = "fredformer-checkpoint";
inline constexpr int kCheckpointVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

struct Checkpoint {
    FredformerConfig config;
    ModelParams params;
    std::optional<Scaler> scaler;
    std::map<std::string, std::string> metadata;  // free-form run details
};

/// Self-describing JSON archive: format tag, version, config, named arrays
/// with declared shapes. Doubles round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Every array must be present with the shape the stored config implies.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const FredformerConfig& config, int indent = 2);
FredformerConfig config_from_json(const std::string& text);

}  // namespace fredformer
