#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vatlas/mlp.hpp"
#include "vatlas/tensor.hpp"

// Binary checkpoint container. Byte layout (all integers little-endian,
// doubles raw IEEE-754):
//
//   8  bytes  magic "VATLCKP1"
//   u64       rng seed the run was started with
//   u64       optimizer step count
//   u32       tensor count
//   repeated: u32 name length, name bytes, u32 rows, u32 cols,
//             rows*cols doubles (row-major)
//   u32       meta count
//   repeated: u32 key length, key bytes, u32 value length, value bytes
//
// Doubles round-trip bit for bit. Files are written to "<path>.tmp" and
// renamed into place so readers never observe a half-written checkpoint.

namespace vatlas {

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::map<std::string, std::string> meta;

  const Tensor* find(const std::string& name) const;
  void add(const std::string& name, Tensor t);

  // Store / rebuild a network as tensors "<prefix>.w0", "<prefix>.b0", ...
  // plus an activation tag under meta "<prefix>.out_act".
  void add_network(const std::string& prefix, const MlpNetwork& net);
  MlpNetwork network(const std::string& prefix) const;
  bool has_network(const std::string& prefix) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vatlas
