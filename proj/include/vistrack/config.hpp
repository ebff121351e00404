#pragma once

#include <filesystem>
#include <string>

#include "vistrack/pipeline.hpp"

namespace vistrack {

// Strict JSON configuration: every PipelineConfig field is settable by its
// snake_case name; unknown keys raise DataError.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& config);

}  // namespace vistrack
