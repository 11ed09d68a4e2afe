#pragma once

#include <aerogym/dynamics.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aerogym {

inline constexpr int kPresetSchemaVersion = 1;

/// Identifiers of the built-in presets, sorted.
std::vector<std::string> preset_names();

/// Built-in preset by identifier. Throws PresetError for unknown names.
AircraftParams load_preset(std::string_view name);

/// Preset document from disk (same schema as the built-ins).
AircraftParams load_preset_file(const std::filesystem::path& path);

AircraftParams preset_from_json(const nlohmann::json& doc);
nlohmann::json preset_to_json(const AircraftParams& params);

}  // namespace aerogym
