#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Per-run bookkeeping: which stages completed, what they read and wrote, and
// a hash of the resolved config so a finished run is reproducible from the
// manifest alone. Writes are atomic (tmp + rename).

namespace vatlas {

std::uint64_t fnv1a(const void* data, std::size_t n);
std::string hash_file(const std::filesystem::path& path);  // 16 hex chars
std::string hash_string(const std::string& s);

struct StageRecord {
  bool completed = false;
  double wall_ms = 0.0;
  std::vector<std::string> outputs;                 // relative to the run dir
  std::map<std::string, std::string> input_hashes;  // relative path -> hash
};

struct RunManifest {
  std::string version = "1";
  std::string config_hash;
  std::map<std::string, StageRecord> stages;

  bool stage_done(const std::string& name) const {
    auto it = stages.find(name);
    return it != stages.end() && it->second.completed;
  }
};

// Missing file -> default-constructed manifest.
RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const RunManifest& m);

}  // namespace vatlas
