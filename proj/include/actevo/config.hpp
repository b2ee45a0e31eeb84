#pragma once

#include <string>

#include <json.hpp>

#include "actevo/search.hpp"

namespace actevo::config {

// Flat INI-style config: [search] / [train] / [net] / [data] / [policy]
// sections of key = value lines, # or ; comments. Every field has the
// documented default; offspring defaults to population - elite -
// random_inject and lr decay epochs default to 50/80/90% of the epoch
// count.
search::SearchConfig parse_ini(const std::string& text);
search::SearchConfig load_file(const std::string& path);

// Canonical JSON form with all derived defaults resolved. This is both the
// run_header payload and the digest input.
nlohmann::ordered_json to_json(const search::SearchConfig& cfg);
search::SearchConfig from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON text, as 16 hex digits.
std::string digest(const search::SearchConfig& cfg);

}  // namespace actevo::config
