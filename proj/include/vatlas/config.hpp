#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vatlas/decomposition.hpp"
#include "vatlas/denoiser.hpp"
#include "vatlas/synth.hpp"
#include "vatlas/uv_optimize.hpp"

// One JSON config drives the whole pipeline. Every field has a default (the
// desk-scale fixture); unknown keys are rejected so typos fail loudly.
// Parsing problems throw ConfigError.

namespace vatlas {

struct DiffusionConfig {
  DenoiserConfig net;
  int schedule_steps = 50;
  double beta_min = 0.002;
  double beta_max = 0.35;
  DenoiserTrainConfig train;
  FinetuneConfig finetune;
};

struct EditConfig {
  // "identity" reuses the source atlases (the measurable end-to-end path);
  // "diffusion" restyles them with the toy denoiser.
  std::string mode = "identity";
  std::string caption = "bright ringed disc";
  std::string bg_caption = "smooth color field";
  double bg_strength = 0.5;   // image-to-image noise level for the background
  double cfg_scale = 1.5;     // guidance for the foreground resample
  std::uint64_t seed = 21;
};

struct PipelineConfig {
  std::string version = "1";
  std::uint64_t seed = 7;
  int atlas_size = 128;  // discretized atlas resolution G
  SyntheticScene scene;
  DecompositionConfig decompose;
  DiffusionConfig diffusion;
  EditConfig edit;
  UvOptimizeConfig uv;
};

PipelineConfig default_config();

// Strict JSON: unknown keys anywhere are errors; values are range-checked.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical serialization (stable key order and formatting); feeding it back
// through parse_config reproduces the same config.
std::string config_to_json(const PipelineConfig& cfg);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace vatlas
