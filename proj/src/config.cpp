#include "vatlas/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatlas/errors.hpp"

namespace vatlas {
namespace {

using nlohmann::json;

// Reads one object level with a closed key set; `seen` collects the keys the
// callers consumed so leftovers can be reported by name.
class ObjectReader {
 public:
  ObjectReader(const json& j, const std::string& where) : j_(j), where_(where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong value type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key \"" + it.key() + "\"");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_scene(const json& j, SyntheticScene& s) {
  ObjectReader r(j, "scene");
  r.get("width", s.width);
  r.get("height", s.height);
  r.get("frames", s.frames);
  std::string bg = s.bg_pattern == BgPattern::Checker  ? "checker"
                   : s.bg_pattern == BgPattern::Stripes ? "stripes"
                                                        : "gradient";
  r.get("background", bg);
  if (bg == "checker") {
    s.bg_pattern = BgPattern::Checker;
  } else if (bg == "stripes") {
    s.bg_pattern = BgPattern::Stripes;
  } else if (bg == "gradient") {
    s.bg_pattern = BgPattern::Gradient;
  } else {
    throw ConfigError("scene.background: expected checker|stripes|gradient");
  }
  r.get("color_a", s.bg_color_a);
  r.get("color_b", s.bg_color_b);
  r.get("cell", s.bg_cell);
  r.get("softness", s.bg_softness);
  r.get("sprite_size", s.sprite_size);
  r.get("sprite_rings", s.sprite_rings);
  r.get("sprite_edge", s.sprite_edge);
  std::string motion = s.motion == MotionKind::Linear ? "linear" : "orbit";
  r.get("motion", motion);
  if (motion == "linear") {
    s.motion = MotionKind::Linear;
  } else if (motion == "orbit") {
    s.motion = MotionKind::Orbit;
  } else {
    throw ConfigError("scene.motion: expected linear|orbit");
  }
  r.get("center_x", s.center_x);
  r.get("center_y", s.center_y);
  r.get("vel_x", s.vel_x);
  r.get("vel_y", s.vel_y);
  r.get("orbit_rx", s.orbit_rx);
  r.get("orbit_ry", s.orbit_ry);
  r.get("rot_per_frame", s.rot_per_frame);
  r.get("sprite_scale", s.sprite_scale);
  r.get("seed", s.seed);
  r.finish();
  if (s.width <= 0 || s.height <= 0 || s.frames <= 0) {
    throw ConfigError("scene: dimensions must be positive");
  }
}

void read_decompose(const json& j, DecompositionConfig& d) {
  ObjectReader r(j, "decompose");
  r.get("pos_freqs", d.model.pos_freqs);
  r.get("hidden", d.model.hidden);
  r.get("depth", d.model.depth);
  r.get("iterations", d.iterations);
  r.get("batch", d.batch);
  r.get("lr", d.lr);
  r.get("alpha_weight", d.alpha_weight);
  r.get("bg_temporal_weight", d.bg_temporal_weight);
  r.get("pretrain_iterations", d.pretrain_iterations);
  r.get("pretrain_lr", d.pretrain_lr);
  r.get("identity_scale", d.identity_scale);
  r.get("fg_batch_fraction", d.fg_batch_fraction);
  r.get("anchor_weight", d.anchor_weight);
  r.get("log_every", d.log_every);
  r.get("seed", d.seed);
  r.finish();
  if (d.iterations < 0 || d.batch <= 0) throw ConfigError("decompose: bad iteration/batch count");
  if (d.fg_batch_fraction < 0.0 || d.fg_batch_fraction > 1.0) {
    throw ConfigError("decompose: fg_batch_fraction must lie in [0, 1]");
  }
  if (d.anchor_weight < 0.0) throw ConfigError("decompose: anchor_weight must be >= 0");
}

void read_diffusion(const json& j, DiffusionConfig& d) {
  ObjectReader r(j, "diffusion");
  r.get("image_size", d.net.image_size);
  r.get("hidden", d.net.hidden);
  r.get("hidden_layers", d.net.hidden_layers);
  r.get("time_freqs", d.net.time_freqs);
  r.get("text_dim", d.net.cond.text_dim);
  r.get("image_dim", d.net.cond.image_dim);
  r.get("patch", d.net.cond.patch);
  r.get("embed_seed", d.net.cond.embed_seed);
  r.get("schedule_steps", d.schedule_steps);
  r.get("beta_min", d.beta_min);
  r.get("beta_max", d.beta_max);
  if (const json* t = r.child("train")) {
    ObjectReader tr(*t, "diffusion.train");
    tr.get("steps", d.train.steps);
    tr.get("batch", d.train.batch);
    tr.get("lr", d.train.lr);
    tr.get("cond_dropout", d.train.cond_dropout);
    tr.get("seed", d.train.seed);
    tr.finish();
  }
  if (const json* f = r.child("finetune")) {
    ObjectReader fr(*f, "diffusion.finetune");
    fr.get("steps", d.finetune.steps);
    fr.get("lr", d.finetune.lr);
    fr.get("batch", d.finetune.batch);
    fr.get("noise_cap", d.finetune.noise_cap);
    fr.get("seed", d.finetune.seed);
    fr.finish();
  }
  r.finish();
  if (d.schedule_steps < 2) throw ConfigError("diffusion.schedule_steps: must be >= 2");
  if (!(d.beta_min > 0.0 && d.beta_min <= d.beta_max && d.beta_max < 1.0)) {
    throw ConfigError("diffusion: betas must satisfy 0 < beta_min <= beta_max < 1");
  }
}

void read_edit(const json& j, EditConfig& e) {
  ObjectReader r(j, "edit");
  r.get("mode", e.mode);
  r.get("caption", e.caption);
  r.get("bg_caption", e.bg_caption);
  r.get("bg_strength", e.bg_strength);
  r.get("cfg_scale", e.cfg_scale);
  r.get("seed", e.seed);
  r.finish();
  if (e.mode != "identity" && e.mode != "diffusion") {
    throw ConfigError("edit.mode: expected identity|diffusion");
  }
  if (!(e.bg_strength > 0.0 && e.bg_strength <= 1.0)) {
    throw ConfigError("edit.bg_strength: must lie in (0, 1]");
  }
  if (e.cfg_scale < 0.0) throw ConfigError("edit.cfg_scale: must be >= 0");
}

void read_uv(const json& j, UvOptimizeConfig& u) {
  ObjectReader r(j, "uv_optimize");
  r.get("batch", u.batch);
  r.get("iterations", u.iterations);
  r.get("sds_iterations", u.sds_iterations);
  r.get("pretrain_iters", u.pretrain_iters);
  r.get("lr", u.lr);
  r.get("pretrain_lr", u.pretrain_lr);
  r.get("delta_local", u.delta_local);
  r.get("delta_global", u.delta_global);
  r.get("crop_fraction", u.crop_fraction);
  r.get("sds_cfg_scale", u.sds_cfg_scale);
  if (const json* w = r.child("weights")) {
    ObjectReader wr(*w, "uv_optimize.weights");
    wr.get("rgb", u.weights.rgb);
    wr.get("alpha", u.weights.alpha);
    wr.get("offset", u.weights.offset);
    wr.get("offset_global", u.weights.offset_global);
    wr.finish();
  }
  r.get("seed", u.seed);
  r.get("log_every", u.log_every);
  r.finish();
  if (u.batch <= 0 || u.iterations < 0 || u.sds_iterations < 0 || u.pretrain_iters < 0) {
    throw ConfigError("uv_optimize: counts must be nonnegative");
  }
  if (u.weights.rgb < 0 || u.weights.alpha < 0 || u.weights.offset < 0 ||
      u.weights.offset_global < 0) {
    throw ConfigError("uv_optimize.weights: must be nonnegative");
  }
  if (u.crop_fraction < 0.0 || u.crop_fraction > 1.0) {
    throw ConfigError("uv_optimize.crop_fraction: must lie in [0,1]");
  }
  if (u.delta_local < 1.0 || u.delta_global < 1.0) {
    throw ConfigError("uv_optimize: offsets must be >= 1 px");
  }
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  ObjectReader r(j, "config");
  r.get("version", cfg.version);
  r.get("seed", cfg.seed);
  r.get("atlas_size", cfg.atlas_size);
  if (const json* s = r.child("scene")) read_scene(*s, cfg.scene);
  if (const json* d = r.child("decompose")) read_decompose(*d, cfg.decompose);
  if (const json* d = r.child("diffusion")) read_diffusion(*d, cfg.diffusion);
  if (const json* e = r.child("edit")) read_edit(*e, cfg.edit);
  if (const json* u = r.child("uv_optimize")) read_uv(*u, cfg.uv);
  r.finish();
  if (cfg.atlas_size < 4) throw ConfigError("atlas_size: must be >= 4");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  j["atlas_size"] = cfg.atlas_size;

  json s;
  s["width"] = cfg.scene.width;
  s["height"] = cfg.scene.height;
  s["frames"] = cfg.scene.frames;
  s["background"] = cfg.scene.bg_pattern == BgPattern::Checker  ? "checker"
                    : cfg.scene.bg_pattern == BgPattern::Stripes ? "stripes"
                                                                 : "gradient";
  s["color_a"] = cfg.scene.bg_color_a;
  s["color_b"] = cfg.scene.bg_color_b;
  s["cell"] = cfg.scene.bg_cell;
  s["softness"] = cfg.scene.bg_softness;
  s["sprite_size"] = cfg.scene.sprite_size;
  s["sprite_rings"] = cfg.scene.sprite_rings;
  s["sprite_edge"] = cfg.scene.sprite_edge;
  s["motion"] = cfg.scene.motion == MotionKind::Linear ? "linear" : "orbit";
  s["center_x"] = cfg.scene.center_x;
  s["center_y"] = cfg.scene.center_y;
  s["vel_x"] = cfg.scene.vel_x;
  s["vel_y"] = cfg.scene.vel_y;
  s["orbit_rx"] = cfg.scene.orbit_rx;
  s["orbit_ry"] = cfg.scene.orbit_ry;
  s["rot_per_frame"] = cfg.scene.rot_per_frame;
  s["sprite_scale"] = cfg.scene.sprite_scale;
  s["seed"] = cfg.scene.seed;
  j["scene"] = s;

  json d;
  d["pos_freqs"] = cfg.decompose.model.pos_freqs;
  d["hidden"] = cfg.decompose.model.hidden;
  d["depth"] = cfg.decompose.model.depth;
  d["iterations"] = cfg.decompose.iterations;
  d["batch"] = cfg.decompose.batch;
  d["lr"] = cfg.decompose.lr;
  d["alpha_weight"] = cfg.decompose.alpha_weight;
  d["bg_temporal_weight"] = cfg.decompose.bg_temporal_weight;
  d["pretrain_iterations"] = cfg.decompose.pretrain_iterations;
  d["pretrain_lr"] = cfg.decompose.pretrain_lr;
  d["identity_scale"] = cfg.decompose.identity_scale;
  d["fg_batch_fraction"] = cfg.decompose.fg_batch_fraction;
  d["anchor_weight"] = cfg.decompose.anchor_weight;
  d["log_every"] = cfg.decompose.log_every;
  d["seed"] = cfg.decompose.seed;
  j["decompose"] = d;

  json f;
  f["image_size"] = cfg.diffusion.net.image_size;
  f["hidden"] = cfg.diffusion.net.hidden;
  f["hidden_layers"] = cfg.diffusion.net.hidden_layers;
  f["time_freqs"] = cfg.diffusion.net.time_freqs;
  f["text_dim"] = cfg.diffusion.net.cond.text_dim;
  f["image_dim"] = cfg.diffusion.net.cond.image_dim;
  f["patch"] = cfg.diffusion.net.cond.patch;
  f["embed_seed"] = cfg.diffusion.net.cond.embed_seed;
  f["schedule_steps"] = cfg.diffusion.schedule_steps;
  f["beta_min"] = cfg.diffusion.beta_min;
  f["beta_max"] = cfg.diffusion.beta_max;
  f["train"] = {{"steps", cfg.diffusion.train.steps},
                {"batch", cfg.diffusion.train.batch},
                {"lr", cfg.diffusion.train.lr},
                {"cond_dropout", cfg.diffusion.train.cond_dropout},
                {"seed", cfg.diffusion.train.seed}};
  f["finetune"] = {{"steps", cfg.diffusion.finetune.steps},
                   {"lr", cfg.diffusion.finetune.lr},
                   {"batch", cfg.diffusion.finetune.batch},
                   {"noise_cap", cfg.diffusion.finetune.noise_cap},
                   {"seed", cfg.diffusion.finetune.seed}};
  j["diffusion"] = f;

  json e;
  e["mode"] = cfg.edit.mode;
  e["caption"] = cfg.edit.caption;
  e["bg_caption"] = cfg.edit.bg_caption;
  e["bg_strength"] = cfg.edit.bg_strength;
  e["cfg_scale"] = cfg.edit.cfg_scale;
  e["seed"] = cfg.edit.seed;
  j["edit"] = e;

  json u;
  u["batch"] = cfg.uv.batch;
  u["iterations"] = cfg.uv.iterations;
  u["sds_iterations"] = cfg.uv.sds_iterations;
  u["pretrain_iters"] = cfg.uv.pretrain_iters;
  u["lr"] = cfg.uv.lr;
  u["pretrain_lr"] = cfg.uv.pretrain_lr;
  u["delta_local"] = cfg.uv.delta_local;
  u["delta_global"] = cfg.uv.delta_global;
  u["crop_fraction"] = cfg.uv.crop_fraction;
  u["sds_cfg_scale"] = cfg.uv.sds_cfg_scale;
  u["weights"] = {{"rgb", cfg.uv.weights.rgb},
                  {"alpha", cfg.uv.weights.alpha},
                  {"offset", cfg.uv.weights.offset},
                  {"offset_global", cfg.uv.weights.offset_global}};
  u["seed"] = cfg.uv.seed;
  u["log_every"] = cfg.uv.log_every;
  j["uv_optimize"] = u;

  return j.dump(2) + "\n";
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("config: cannot write " + tmp.string());
    out << config_to_json(cfg);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace vatlas
