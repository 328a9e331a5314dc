#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace deepspark {

// Reproducibility record written next to a run's outputs before any long
// work starts: the command, every resolved config value and seed, the start
// timestamp, and the artifact paths the run intends to produce.
nlohmann::json make_manifest(const std::string& command, nlohmann::json config,
                             std::vector<std::string> artifacts);

void write_manifest(const nlohmann::json& manifest, const std::string& path);

std::string timestamp_utc();      // ISO-8601, second resolution
std::string timestamp_compact();  // YYYYMMDD-HHMMSS, for default out dirs

}  // namespace deepspark
