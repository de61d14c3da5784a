#include "vatlas/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vatlas/atlas_model.hpp"
#include "vatlas/checkpoint.hpp"
#include "vatlas/conditioning.hpp"
#include "vatlas/decomposition.hpp"
#include "vatlas/editing.hpp"
#include "vatlas/errors.hpp"
#include "vatlas/image.hpp"
#include "vatlas/manifest.hpp"
#include "vatlas/metrics.hpp"
#include "vatlas/schedule.hpp"
#include "vatlas/synth.hpp"
#include "vatlas/texture.hpp"
#include "vatlas/uv_optimize.hpp"

namespace vatlas {

namespace fs = std::filesystem;

namespace {

// ---- small file helpers -------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string g10(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string frame_name(const char* stem, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d.png", stem, k);
  return buf;
}

// ---- per-stage I/O bookkeeping ------------------------------------------

// Records every file a stage reads (with its hash) and writes (by relative
// path), so the manifest can prove what a completed stage depended on and a
// failed stage can clean up after itself.
struct StageIo {
  fs::path run_dir;
  StageRecord rec;

  fs::path in(const std::string& rel) {
    fs::path abs = run_dir / rel;
    if (!fs::exists(abs))
      throw MissingInputError("missing input '" + rel + "' in " + run_dir.string() +
                              " (run the earlier stages first)");
    rec.input_hashes[rel] = hash_file(abs);
    return abs;
  }

  fs::path out(const std::string& rel) {
    fs::path abs = run_dir / rel;
    fs::create_directories(abs.parent_path());
    if (std::find(rec.outputs.begin(), rec.outputs.end(), rel) == rec.outputs.end())
      rec.outputs.push_back(rel);
    return abs;
  }
};

// ---- texture <-> checkpoint ---------------------------------------------

// A texture is stored exactly: one rows=size, cols=size*channels tensor plus
// the uv rectangle in meta, so edited atlases round-trip bit for bit.
void add_texture(Checkpoint& ckpt, const std::string& name, const AtlasTexture& tex) {
  Tensor t(tex.size, tex.size * tex.channels);
  std::copy(tex.texels.begin(), tex.texels.end(), t.d.begin());
  ckpt.add(name + ".texels", std::move(t));
  ckpt.meta[name + ".channels"] = std::to_string(tex.channels);
  char rect[200];
  std::snprintf(rect, sizeof rect, "%.17g %.17g %.17g %.17g", tex.u0, tex.v0, tex.u1, tex.v1);
  ckpt.meta[name + ".rect"] = rect;
}

AtlasTexture texture_from_ckpt(const Checkpoint& ckpt, const std::string& name) {
  const Tensor* t = ckpt.find(name + ".texels");
  auto ch = ckpt.meta.find(name + ".channels");
  auto rect = ckpt.meta.find(name + ".rect");
  if (!t || ch == ckpt.meta.end() || rect == ckpt.meta.end())
    throw std::runtime_error("checkpoint has no texture '" + name + "'");
  AtlasTexture tex(t->rows, std::stoi(ch->second));
  if (t->cols != tex.size * tex.channels)
    throw std::runtime_error("texture '" + name + "' has inconsistent shape");
  std::copy(t->d.begin(), t->d.end(), tex.texels.begin());
  if (std::sscanf(rect->second.c_str(), "%lg %lg %lg %lg", &tex.u0, &tex.v0, &tex.u1, &tex.v1) !=
      4)
    throw std::runtime_error("texture '" + name + "' has a malformed uv rectangle");
  return tex;
}

void save_texture(const fs::path& path, const AtlasTexture& tex) {
  Checkpoint ckpt;
  add_texture(ckpt, "texture", tex);
  save_checkpoint(path, ckpt);
}

AtlasTexture load_texture(const fs::path& path) {
  return texture_from_ckpt(load_checkpoint(path), "texture");
}

// ---- CSV writers ---------------------------------------------------------

void write_loss_csv(const fs::path& path, const std::vector<LossLogRow>& rows) {
  std::string s = "step,loss\n";
  for (const auto& r : rows) s += std::to_string(r.step) + "," + g10(r.loss) + "\n";
  write_text(path, s);
}

void write_decompose_csv(const fs::path& path, const std::vector<DecompositionLossRow>& rows) {
  std::string s = "step,rgb,alpha,temporal,total\n";
  for (const auto& r : rows)
    s += std::to_string(r.step) + "," + g10(r.rgb) + "," + g10(r.alpha) + "," + g10(r.temporal) +
         "," + g10(r.total) + "\n";
  write_text(path, s);
}

void write_uv_csv(const fs::path& path, const std::vector<UvLossRow>& rows) {
  std::string s = "step,rgb,alpha,off_local,off_global,sds,total\n";
  for (const auto& r : rows)
    s += std::to_string(r.step) + "," + g10(r.rgb) + "," + g10(r.alpha) + "," + g10(r.off_local) +
         "," + g10(r.off_global) + "," + g10(r.sds) + "," + g10(r.total) + "\n";
  write_text(path, s);
}

// ---- shared loaders -------------------------------------------------------

std::vector<Image> load_frame_dir(StageIo& io, const char* dir, const char* stem, int count) {
  std::vector<Image> frames;
  frames.reserve(count);
  for (int k = 0; k < count; ++k)
    frames.push_back(load_image(io.in(std::string(dir) + "/" + frame_name(stem, k))));
  return frames;
}

AtlasModel load_model(StageIo& io) {
  return AtlasModel::from_checkpoint(load_checkpoint(io.in("checkpoints/decomposition.ckpt")));
}

NoiseSchedule make_schedule(const PipelineConfig& cfg) {
  return NoiseSchedule::linear_beta(cfg.diffusion.schedule_steps, cfg.diffusion.beta_min,
                                    cfg.diffusion.beta_max);
}

Image clamped01(Image img) {
  for (double& v : img.px) v = std::clamp(v, 0.0, 1.0);
  return img;
}

// Load the shared denoiser, training and checkpointing it first if this run
// has none yet.
DenoiserNetwork ensure_denoiser(const PipelineConfig& cfg, StageIo& io) {
  const std::string rel = "checkpoints/denoiser.ckpt";
  if (fs::exists(io.run_dir / rel))
    return DenoiserNetwork::from_checkpoint(load_checkpoint(io.in(rel)), "denoiser");

  std::vector<DenoiserExample> corpus =
      make_texture_corpus(cfg.diffusion.net, 6, cfg.diffusion.train.seed);
  NoiseSchedule sched = make_schedule(cfg);
  Rng rng(cfg.diffusion.train.seed);
  DenoiserNetwork net = DenoiserNetwork::make(cfg.diffusion.net, rng);
  std::vector<LossLogRow> rows = train_denoiser(net, corpus, sched, cfg.diffusion.train);

  Checkpoint ckpt;
  ckpt.seed = cfg.diffusion.train.seed;
  ckpt.step = std::uint64_t(cfg.diffusion.train.steps);
  net.add_to_checkpoint(ckpt, "denoiser");
  save_checkpoint(io.out(rel), ckpt);
  write_loss_csv(io.out("metrics/denoiser_losses.csv"), rows);
  return net;
}

// Premultiplied object crop of the edited foreground at the denoiser input
// size, used for reference-image conditioning.
Image edited_object_crop(const AtlasTexture& edited_fg, const AtlasTexture& mask, int out_size) {
  AtlasTexture rgb = edited_fg.channels > 3 ? edited_fg.channel_slice(0, 3) : edited_fg;
  Image img = texture_to_image(rgb);
  Image mask_img = texture_to_image(mask);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.c; ++c) img.at(y, x, c) *= mask_img.at(y, x, 0);
  CropSpec spec = compute_crop_spec(mask_img, out_size);
  return crop_window(img, spec);
}

// ---- stages ---------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg, StageIo& io) {
  auto [video, gt] = generate_synthetic_video(cfg.scene);
  for (int k = 0; k < int(video.frames.size()); ++k) {
    save_image(io.out("frames_src/" + frame_name("frame", k)), video.frames[k]);
    save_image(io.out("masks_src/" + frame_name("mask", k)), gt.alphas[k]);
  }
}

void stage_decompose(const PipelineConfig& cfg, StageIo& io) {
  std::vector<Image> frames = load_frame_dir(io, "frames_src", "frame", cfg.scene.frames);
  std::vector<Image> masks = load_frame_dir(io, "masks_src", "mask", cfg.scene.frames);

  DecompositionResult res = train_decomposition(frames, masks, cfg.decompose);

  Checkpoint ckpt;
  ckpt.seed = cfg.decompose.seed;
  ckpt.step = std::uint64_t(cfg.decompose.iterations);
  res.model.add_to_checkpoint(ckpt);
  save_checkpoint(io.out("checkpoints/decomposition.ckpt"), ckpt);
  write_decompose_csv(io.out("metrics/decompose_losses.csv"), res.losses);

  AtlasTexture fg = discretize_atlas(res.model, AtlasLayer::Foreground, cfg.atlas_size);
  AtlasTexture bg = discretize_atlas(res.model, AtlasLayer::Background, cfg.atlas_size);
  save_texture(io.out("atlases/source_fg.ckpt"), fg);
  save_texture(io.out("atlases/source_bg.ckpt"), bg);
  save_image(io.out("atlases/source_fg.png"), texture_to_image(fg));
  save_image(io.out("atlases/source_bg.png"), texture_to_image(bg));
}

void stage_edit_atlas(const PipelineConfig& cfg, StageIo& io) {
  AtlasTexture source_fg = load_texture(io.in("atlases/source_fg.ckpt"));
  AtlasTexture fg_rgb = source_fg.channel_slice(0, 3);
  Image fg_img = texture_to_image(fg_rgb);
  Image fg_alpha = texture_to_image(source_fg.channel_slice(3, 1));

  const int S = cfg.diffusion.net.image_size;
  auto [crop, spec] = center_crop_object(fg_img, fg_alpha, S);

  Image edited_crop;      // what the mask is extracted from
  AtlasTexture edited_rgb;  // full-resolution edited color
  if (cfg.edit.mode == "identity") {
    // The edit is the source appearance itself; the atlas keeps its full
    // resolution and only the mask goes through the crop.
    edited_crop = crop;
    edited_rgb = fg_rgb;
  } else {
    DenoiserNetwork net = ensure_denoiser(cfg, io);
    NoiseSchedule sched = make_schedule(cfg);
    std::vector<LossLogRow> ft_rows =
        finetune_denoiser(net, crop, cfg.edit.caption, {crop}, sched, cfg.diffusion.finetune);
    write_loss_csv(io.out("metrics/finetune_losses.csv"), ft_rows);

    ConditioningContext ctx;
    ctx.text = embed_caption(cfg.edit.caption, cfg.diffusion.net.cond);
    ctx.image = embed_reference_image(crop, cfg.diffusion.net.cond);

    Tensor z0 = latent_from_image(crop);
    Tensor zT = ddim_invert(net, z0, sched.steps, ctx, sched, 1.0);
    Tensor edited_z = ddim_sample(net, {zT, sched.steps}, ctx, sched, cfg.edit.cfg_scale);
    edited_crop = clamped01(image_from_latent(edited_z, S, cfg.diffusion.net.channels));
    edited_rgb = texture_from_image(uncrop(edited_crop, spec));
  }

  Image mask_full = uncrop(extract_mask(edited_crop), spec);
  AtlasTexture mask = texture_from_image(mask_full);
  AtlasTexture edited_fg = paste_and_inpaint(edited_rgb, source_fg, mask);

  save_texture(io.out("atlases/edited_fg.ckpt"), edited_fg);
  save_texture(io.out("atlases/mask.ckpt"), mask);
  save_image(io.out("atlases/edited_fg.png"), texture_to_image(edited_fg));
  save_image(io.out("atlases/mask.png"), texture_to_image(mask));
}

void stage_edit_bg(const PipelineConfig& cfg, StageIo& io) {
  AtlasTexture source_bg = load_texture(io.in("atlases/source_bg.ckpt"));

  AtlasTexture edited_bg;
  if (cfg.edit.mode == "identity") {
    edited_bg = source_bg;
  } else {
    DenoiserNetwork net = ensure_denoiser(cfg, io);
    NoiseSchedule sched = make_schedule(cfg);
    const int S = cfg.diffusion.net.image_size;
    AtlasTexture small = resize_texture(source_bg, S);

    ConditioningContext ctx;
    ctx.text = embed_caption(cfg.edit.bg_caption, cfg.diffusion.net.cond);
    ctx.image = embed_reference_image(texture_to_image(small), cfg.diffusion.net.cond);

    AtlasTexture edited_small = edit_background_atlas(net, small, ctx, cfg.edit.bg_strength,
                                                      sched, cfg.edit.cfg_scale, cfg.edit.seed);
    edited_bg = resize_texture(edited_small, cfg.atlas_size);
  }

  save_texture(io.out("atlases/edited_bg.ckpt"), edited_bg);
  save_image(io.out("atlases/edited_bg.png"), texture_to_image(edited_bg));
}

void stage_optimize_uv(const PipelineConfig& cfg, StageIo& io) {
  AtlasModel model = load_model(io);
  AtlasTexture edited_fg = load_texture(io.in("atlases/edited_fg.ckpt"));
  AtlasTexture edited_bg = load_texture(io.in("atlases/edited_bg.ckpt"));
  AtlasTexture mask = load_texture(io.in("atlases/mask.ckpt"));

  SdsSetup sds;
  DenoiserNetwork net;
  NoiseSchedule sched = make_schedule(cfg);
  const bool use_sds = cfg.edit.mode == "diffusion";
  if (use_sds) {
    net = DenoiserNetwork::from_checkpoint(load_checkpoint(io.in("checkpoints/denoiser.ckpt")),
                                           "denoiser");
    Image ref = edited_object_crop(edited_fg, mask, cfg.diffusion.net.image_size);
    sds.net = &net;
    sds.sched = &sched;
    sds.ctx.text = embed_caption(cfg.edit.caption, cfg.diffusion.net.cond);
    sds.ctx.image = embed_reference_image(ref, cfg.diffusion.net.cond);
    sds.cfg_scale = cfg.uv.sds_cfg_scale;
  }

  UvOptimizeResult res =
      optimize_uv_mappings(model, edited_fg, edited_bg, mask, cfg.uv, use_sds ? &sds : nullptr);

  Checkpoint ckpt;
  ckpt.seed = cfg.uv.seed;
  ckpt.step = std::uint64_t(cfg.uv.iterations + cfg.uv.sds_iterations);
  res.nets.add_to_checkpoint(ckpt);
  save_checkpoint(io.out("checkpoints/edit_mappings.ckpt"), ckpt);
  write_uv_csv(io.out("metrics/uv_losses.csv"), res.losses);
}

void stage_render(const PipelineConfig& cfg, StageIo& io) {
  AtlasModel model = load_model(io);
  EditMappingNetworks nets =
      EditMappingNetworks::from_checkpoint(load_checkpoint(io.in("checkpoints/edit_mappings.ckpt")));
  AtlasTexture edited_fg = load_texture(io.in("atlases/edited_fg.ckpt"));
  AtlasTexture edited_bg = load_texture(io.in("atlases/edited_bg.ckpt"));

  FrameSequence video = render_edited_video(model, nets, edited_fg, edited_bg);
  (void)cfg;
  for (int k = 0; k < int(video.frames.size()); ++k)
    save_image(io.out("frames_edit/" + frame_name("frame", k)), video.frames[k]);
}

// Temporal variance of the background mapping on a fixed pixel grid: for each
// grid point the uv of every frame is collected and its per-channel variance
// around the temporal mean is averaged. A static background should pin each
// pixel to one atlas location, driving this toward zero.
double background_uv_variance(const AtlasModel& model, int stride) {
  const VideoDims& d = model.dims;
  std::vector<PixelPoint> pts;
  for (int y = 0; y < d.height; y += stride)
    for (int x = 0; x < d.width; x += stride)
      for (int k = 0; k < d.frames; ++k)
        pts.push_back({double(x), double(y), k});
  MappingEval ev = evaluate_mappings(model, normalized_points(pts, d));

  const int K = d.frames;
  const int n_px = int(pts.size()) / K;
  double acc = 0.0;
  for (int p = 0; p < n_px; ++p) {
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (int k = 0; k < K; ++k) mean += ev.uv_bg.at(p * K + k, c);
      mean /= K;
      double var = 0.0;
      for (int k = 0; k < K; ++k) {
        const double dlt = ev.uv_bg.at(p * K + k, c) - mean;
        var += dlt * dlt;
      }
      acc += var / K;
    }
  }
  return acc / (n_px * 2);
}

void stage_eval(const PipelineConfig& cfg, StageIo& io) {
  AtlasModel model = load_model(io);
  EditMappingNetworks nets =
      EditMappingNetworks::from_checkpoint(load_checkpoint(io.in("checkpoints/edit_mappings.ckpt")));
  std::vector<Image> frames_src = load_frame_dir(io, "frames_src", "frame", cfg.scene.frames);
  std::vector<Image> frames_edit = load_frame_dir(io, "frames_edit", "frame", cfg.scene.frames);

  // Ground truth is regenerated from the scene description rather than
  // stored; rendering is pure math, so this is bit-identical to what the
  // synth stage drew from.
  auto [gt_video, gt] = generate_synthetic_video(cfg.scene);
  (void)gt_video;

  std::vector<Image> recon = render_reconstruction(model);
  PsnrReport recon_psnr = psnr(recon, frames_src);
  PsnrReport edit_psnr = psnr(frames_edit, frames_src);

  // Foreground mapping quality against sprite-local coordinates.
  std::vector<PixelPoint> pts;
  std::vector<double> gt_rows;
  for (int k = 0; k < cfg.scene.frames; ++k)
    for (int y = 0; y < cfg.scene.height; ++y)
      for (int x = 0; x < cfg.scene.width; ++x)
        if (gt.alphas[k].at(y, x, 0) >= 0.5) {
          pts.push_back({double(x), double(y), k});
          gt_rows.push_back(gt.uv[k].at(y, x, 0));
          gt_rows.push_back(gt.uv[k].at(y, x, 1));
        }
  Tensor gt_uv(int(pts.size()), 2);
  gt_uv.d = gt_rows;
  Tensor norm = normalized_points(pts, model.dims);
  UvErrorReport edit_uv = uv_error(edit_mapping_uv(nets, norm), gt_uv, cfg.atlas_size);
  UvErrorReport src_uv = uv_error(evaluate_mappings(model, norm).uv_fg, gt_uv, cfg.atlas_size);

  double temporal_src = temporal_consistency(frames_src, gt);
  double temporal_edit = temporal_consistency(frames_edit, gt);
  double bg_var = background_uv_variance(model, 4);

  std::string csv = "metric,value\n";
  auto row = [&](const char* name, double v) { csv += std::string(name) + "," + g10(v) + "\n"; };
  row("recon_psnr_mean", recon_psnr.mean);
  row("edit_psnr_mean", edit_psnr.mean);
  row("edit_uv_error_texels", edit_uv.mean_texels);
  row("edit_uv_error_max_texels", edit_uv.max_texels);
  row("src_uv_error_texels", src_uv.mean_texels);
  row("uv_samples", double(edit_uv.samples));
  row("temporal_src", temporal_src);
  row("temporal_edit", temporal_edit);
  row("bg_uv_variance", bg_var);
  write_text(io.out("metrics/eval.csv"), csv);

  std::string frames_csv = "frame,recon_psnr,edit_psnr\n";
  for (int k = 0; k < cfg.scene.frames; ++k)
    frames_csv += std::to_string(k) + "," + g10(recon_psnr.per_frame[k]) + "," +
                  g10(edit_psnr.per_frame[k]) + "\n";
  write_text(io.out("metrics/eval_frames.csv"), frames_csv);

  std::string summary;
  summary += "reconstruction psnr  " + g10(recon_psnr.mean) + " dB\n";
  summary += "edited video psnr    " + g10(edit_psnr.mean) + " dB\n";
  summary += "edit uv error        " + g10(edit_uv.mean_texels) + " texels (mean), " +
             g10(edit_uv.max_texels) + " (max), " + std::to_string(edit_uv.samples) +
             " samples\n";
  summary += "source uv error      " + g10(src_uv.mean_texels) + " texels (mean)\n";
  summary += "temporal consistency " + g10(temporal_src) + " (source) " + g10(temporal_edit) +
             " (edited)\n";
  summary += "bg uv variance       " + g10(bg_var) + "\n";
  write_text(io.out("metrics/summary.txt"), summary);
}

void dispatch(const PipelineConfig& cfg, StageIo& io, Stage stage) {
  switch (stage) {
    case Stage::Synth: stage_synth(cfg, io); return;
    case Stage::Decompose: stage_decompose(cfg, io); return;
    case Stage::EditAtlas: stage_edit_atlas(cfg, io); return;
    case Stage::EditBg: stage_edit_bg(cfg, io); return;
    case Stage::OptimizeUv: stage_optimize_uv(cfg, io); return;
    case Stage::Render: stage_render(cfg, io); return;
    case Stage::Eval: stage_eval(cfg, io); return;
  }
  throw std::logic_error("unknown stage");
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Synth: return "synth";
    case Stage::Decompose: return "decompose";
    case Stage::EditAtlas: return "edit-atlas";
    case Stage::EditBg: return "edit-bg";
    case Stage::OptimizeUv: return "optimize-uv";
    case Stage::Render: return "render";
    case Stage::Eval: return "eval";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> order = {Stage::Synth,      Stage::Decompose, Stage::EditAtlas,
                                           Stage::EditBg,     Stage::OptimizeUv, Stage::Render,
                                           Stage::Eval};
  return order;
}

void run_stage(const PipelineConfig& cfg, const fs::path& run_dir, Stage stage, bool force) {
  fs::create_directories(run_dir);

  const std::string canon = config_to_json(cfg);
  const fs::path cfg_path = run_dir / "config.json";
  const fs::path man_path = run_dir / "manifest.json";
  RunManifest manifest = load_manifest(man_path);

  if (fs::exists(cfg_path) && read_text(cfg_path) != canon) {
    if (!force)
      throw ConfigError("run directory " + run_dir.string() +
                        " was produced by a different config; use a fresh directory or --force");
    // A forced config change invalidates everything recorded so far.
    manifest.stages.clear();
    save_config(cfg_path, cfg);
  } else if (!fs::exists(cfg_path)) {
    save_config(cfg_path, cfg);
  }
  manifest.config_hash = hash_string(canon);

  const std::string name = stage_name(stage);
  if (!force && manifest.stage_done(name)) {
    std::cout << "[" << name << "] already complete, skipping\n";
    return;
  }

  std::cout << "[" << name << "] running...\n";
  StageIo io{run_dir, {}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    dispatch(cfg, io, stage);
  } catch (...) {
    // Drop partial outputs so a retry starts clean, and un-mark the stage.
    for (const std::string& rel : io.rec.outputs) {
      std::error_code ec;
      fs::remove(run_dir / rel, ec);
    }
    manifest.stages.erase(name);
    save_manifest(man_path, manifest);
    throw;
  }
  const auto t1 = std::chrono::steady_clock::now();
  io.rec.completed = true;
  io.rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  manifest.stages[name] = io.rec;
  save_manifest(man_path, manifest);
  std::cout << "[" << name << "] done in " << g10(io.rec.wall_ms / 1000.0) << " s\n";
}

void run_all(const PipelineConfig& cfg, const fs::path& run_dir, bool force) {
  for (Stage s : all_stages()) run_stage(cfg, run_dir, s, force);
}

std::vector<DenoiserExample> make_texture_corpus(const DenoiserConfig& net_cfg, int per_class,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  const int S = net_cfg.image_size;
  std::vector<DenoiserExample> corpus;

  auto add = [&](const Image& img, const std::string& caption) {
    DenoiserExample ex;
    ex.z0 = latent_from_image(img);
    ex.ctx.text = embed_caption(caption, net_cfg.cond);
    ex.ctx.image = embed_reference_image(img, net_cfg.cond);
    corpus.push_back(std::move(ex));
  };

  const std::pair<BgPattern, const char*> classes[] = {
      {BgPattern::Checker, "checker pattern"},
      {BgPattern::Stripes, "stripes pattern"},
      {BgPattern::Gradient, "gradient field"},
  };
  for (const auto& [pattern, caption] : classes) {
    for (int v = 0; v < per_class; ++v) {
      SyntheticScene s;
      s.bg_pattern = pattern;
      for (int c = 0; c < 3; ++c) {
        s.bg_color_a[c] = rng.uniform(0.05, 0.95);
        s.bg_color_b[c] = rng.uniform(0.05, 0.95);
      }
      s.bg_cell = rng.uniform(6.0, 20.0);
      s.bg_softness = rng.uniform(0.2, 0.5);
      add(render_background_tile(s, S), caption);
    }
  }

  // Static single-frame scenes supply object crops over black.
  for (int v = 0; v < per_class; ++v) {
    SyntheticScene s;
    s.frames = 1;
    s.motion = MotionKind::Linear;
    s.vel_x = 0.0;
    s.vel_y = 0.0;
    s.seed = rng.next_u64();
    s.sprite_rings = rng.uniform_int(2, 4);
    s.sprite_edge = rng.uniform(0.7, 0.9);
    auto [video, gt] = generate_synthetic_video(s);
    auto [crop, spec] = center_crop_object(video.frames[0], gt.alphas[0], S);
    (void)spec;
    add(crop, "bright ringed disc");
  }

  return corpus;
}

}  // namespace vatlas
