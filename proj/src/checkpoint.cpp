#include "vatlas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace vatlas {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'T', 'L', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string get_str(std::istream& is) {
  const std::uint32_t len = get_u32(is);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(len, '\0');
  is.read(s.data(), std::streamsize(len));
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void Checkpoint::add(const std::string& name, Tensor t) {
  tensors.emplace_back(name, std::move(t));
}

void Checkpoint::add_network(const std::string& prefix, const MlpNetwork& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    add(prefix + ".w" + std::to_string(i), net.layers[i].w);
    add(prefix + ".b" + std::to_string(i), net.layers[i].b);
  }
  meta[prefix + ".out_act"] = net.out_act == OutputActivation::Tanh ? "tanh" : "identity";
}

bool Checkpoint::has_network(const std::string& prefix) const {
  return meta.count(prefix + ".out_act") != 0;
}

MlpNetwork Checkpoint::network(const std::string& prefix) const {
  const auto act_it = meta.find(prefix + ".out_act");
  if (act_it == meta.end())
    throw std::runtime_error("checkpoint: no network stored under prefix " + prefix);
  MlpNetwork net;
  net.out_act = act_it->second == "tanh" ? OutputActivation::Tanh : OutputActivation::Identity;
  for (std::size_t i = 0;; ++i) {
    const Tensor* w = find(prefix + ".w" + std::to_string(i));
    const Tensor* b = find(prefix + ".b" + std::to_string(i));
    if (!w || !b) break;
    net.layers.push_back({*w, *b});
  }
  if (net.layers.empty())
    throw std::runtime_error("checkpoint: network " + prefix + " has no layers");
  net.in_width = net.layers.front().w.rows;
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put_u64(os, ckpt.seed);
    put_u64(os, ckpt.step);
    put_u32(os, std::uint32_t(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      put_str(os, name);
      put_u32(os, std::uint32_t(t.rows));
      put_u32(os, std::uint32_t(t.cols));
      os.write(reinterpret_cast<const char*>(t.data()),
               std::streamsize(sizeof(double) * t.size()));
    }
    put_u32(os, std::uint32_t(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
      put_str(os, k);
      put_str(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  Checkpoint ckpt;
  ckpt.seed = get_u64(is);
  ckpt.step = get_u64(is);
  const std::uint32_t tensor_count = get_u32(is);
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = get_str(is);
    const int rows = int(get_u32(is));
    const int cols = int(get_u32(is));
    Tensor t(rows, cols);
    is.read(reinterpret_cast<char*>(t.data()), std::streamsize(sizeof(double) * t.size()));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::uint32_t meta_count = get_u32(is);
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = get_str(is);
    ckpt.meta[k] = get_str(is);
  }
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path.string());
  return ckpt;
}

}  // namespace vatlas
