#pragma once

#include <string>

#include <json.hpp>

#include "schedlab/config.hpp"

namespace schedlab {

/// Every SystemConfig field under its snake_case name.
nlohmann::json config_to_json(const SystemConfig& cfg);

/// Starts from `base` and applies the keys present in `j`. Unknown keys and
/// wrongly typed values throw ConfigError naming the field; the result is
/// validated.
SystemConfig config_from_json(const nlohmann::json& j, const SystemConfig& base = {});

SystemConfig load_config(const std::string& path);
std::string dump_config(const SystemConfig& cfg);

/// "none", or any combination of mh, rs, is separated by commas or spaces.
TrainerFlags parse_flags(const std::string& s);
std::string flags_to_string(const TrainerFlags& f);

}  // namespace schedlab
