#include "core/manifest.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>

#include "core/common.hpp"

#ifndef STRUCHIS_GIT_DESCRIBE
#define STRUCHIS_GIT_DESCRIBE "unknown"
#endif

namespace struchis {

std::string version_string() { return STRUCHIS_GIT_DESCRIBE; }

std::string timestamp_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["version"] = version_string();
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["outputs"] = outputs;
  std::ofstream f(dir + "/manifest.json");
  if (!f) fail(ErrorKind::io, "cannot write " + dir + "/manifest.json");
  f << j.dump(2) << '\n';
}

}  // namespace struchis
