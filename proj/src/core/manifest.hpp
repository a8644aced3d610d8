#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace struchis {

// Build version baked in at configure time (git describe, or "unknown").
std::string version_string();

// ISO 8601 UTC, second resolution.
std::string timestamp_now();

// Reproducibility record for one command invocation. Written into the output
// directory before long-running work begins, then rewritten with finished_at
// once every listed artifact exists.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;

  void write(const std::string& dir) const;
};

}  // namespace struchis
