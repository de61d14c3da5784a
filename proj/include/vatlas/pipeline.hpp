#pragma once

#include <filesystem>
#include <vector>

#include "vatlas/config.hpp"
#include "vatlas/denoiser.hpp"

// Stage runner over a run directory:
//
//   runs/<name>/
//     config.json            resolved config (written on first stage)
//     manifest.json          stage completion records + input hashes
//     frames_src/ masks_src/ synthetic video + opacity targets (png)
//     checkpoints/           decomposition / denoiser / edit mappings
//     atlases/               source + edited textures (exact .ckpt + .png)
//     frames_edit/           final propagated video
//     metrics/               loss traces and evaluation CSVs
//
// Completed stages are skipped on re-run unless `force` is set; failures
// remove the stage's partial outputs before rethrowing.

namespace vatlas {

enum class Stage { Synth, Decompose, EditAtlas, EditBg, OptimizeUv, Render, Eval };

const char* stage_name(Stage s);
const std::vector<Stage>& all_stages();

void run_stage(const PipelineConfig& cfg, const std::filesystem::path& run_dir, Stage stage,
               bool force = false);
void run_all(const PipelineConfig& cfg, const std::filesystem::path& run_dir, bool force = false);

// Deterministic texture corpus for base denoiser training: `per_class`
// variations of each background pattern plus as many black-background object
// crops, each paired with its caption/image conditioning.
std::vector<DenoiserExample> make_texture_corpus(const DenoiserConfig& net_cfg, int per_class,
                                                 std::uint64_t seed);

}  // namespace vatlas
