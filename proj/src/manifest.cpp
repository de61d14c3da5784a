#include "vatlas/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatlas/errors.hpp"

namespace vatlas {

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open for hashing: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return to_hex(fnv1a(bytes.data(), bytes.size()));
}

std::string hash_string(const std::string& s) { return to_hex(fnv1a(s.data(), s.size())); }

RunManifest load_manifest(const std::filesystem::path& path) {
  RunManifest m;
  std::ifstream in(path);
  if (!in) return m;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest: invalid JSON in " + path.string() + ": " + e.what());
  }
  m.version = j.value("version", "1");
  m.config_hash = j.value("config_hash", "");
  if (j.contains("stages")) {
    for (auto it = j["stages"].begin(); it != j["stages"].end(); ++it) {
      StageRecord rec;
      const nlohmann::json& s = it.value();
      rec.completed = s.value("completed", false);
      rec.wall_ms = s.value("wall_ms", 0.0);
      if (s.contains("outputs")) rec.outputs = s["outputs"].get<std::vector<std::string>>();
      if (s.contains("input_hashes")) {
        rec.input_hashes = s["input_hashes"].get<std::map<std::string, std::string>>();
      }
      m.stages[it.key()] = std::move(rec);
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["config_hash"] = m.config_hash;
  nlohmann::json stages(nlohmann::json::value_t::object);
  for (const auto& [name, rec] : m.stages) {
    stages[name] = {{"completed", rec.completed},
                    {"wall_ms", rec.wall_ms},
                    {"outputs", rec.outputs},
                    {"input_hashes", rec.input_hashes}};
  }
  j["stages"] = stages;

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("manifest: cannot write " + tmp.string());
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace vatlas
