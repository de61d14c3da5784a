#pragma once

#include <cstdint>
#include <vector>

#include "vatlas/adam.hpp"
#include "vatlas/atlas_model.hpp"
#include "vatlas/denoiser.hpp"
#include "vatlas/editing.hpp"
#include "vatlas/tape.hpp"
#include "vatlas/texture.hpp"

// Re-optimization of the foreground mapping after an atlas edit: fresh
// mapping + opacity networks are trained so the edited texture propagates to
// every frame without distortion. Supervision combines
//
//   L = sds + w_rgb * L_rgb + w_alpha * L_alpha
//         + w_off * L_off(1 px) + w_off_global * L_off(5 px)
//
// where L_rgb matches the initial edited render (the frozen source mappings
// driving the edited textures), L_alpha matches the extracted mask pulled
// back through the frozen foreground mapping, the offset terms preserve the
// source mapping's local differential structure, and the sds term injects a
// denoiser's score as a direct gradient on rendered crops (second phase
// only).

namespace vatlas {

struct EditMappingNetworks {
  AtlasModelConfig cfg;
  VideoDims dims;
  MlpNetwork map;    // enc(x,y,k) -> uv, tanh
  MlpNetwork alpha;  // enc(x,y,k) -> opacity, tanh mapped to (0,1)

  static EditMappingNetworks make(const AtlasModelConfig& cfg, const VideoDims& dims, Rng& rng);

  std::vector<Tensor*> params();

  void add_to_checkpoint(Checkpoint& ckpt) const;
  static EditMappingNetworks from_checkpoint(const Checkpoint& ckpt);
};

struct LossWeights {
  double rgb = 1.0;
  double alpha = 0.5;
  double offset = 0.1;         // local term, 1 px offset
  double offset_global = 0.02; // global term, 5 px offset
};

struct UvOptimizeConfig {
  int batch = 2000;
  int iterations = 1200;      // phase 1: reconstruction + offset losses
  int sds_iterations = 400;   // phase 2: same losses plus score injection
  int pretrain_iters = 100;   // identity pretraining of the mapping
  double lr = 1e-3;
  double pretrain_lr = 5e-3;
  double delta_local = 1.0;   // px
  double delta_global = 5.0;  // px
  double crop_fraction = 0.8; // batch share drawn inside per-frame object windows
  double sds_cfg_scale = 1.0;
  LossWeights weights;
  std::uint64_t seed = 11;
  int log_every = 25;
};

struct UvLossRow {
  int step = 0;
  double rgb = 0.0, alpha = 0.0, off_local = 0.0, off_global = 0.0;
  double sds = 0.0;  // mean squared injected pixel gradient (0 when inactive)
  double total = 0.0;
};

// Batch constants precomputed from the frozen source model: encoded inputs
// for p and its two offset probes, the initial-render target, the mask-alpha
// target, the (frozen) background color, and the source-mapping offsets.
struct EditBatch {
  Tensor enc_p, enc_pl, enc_pg;
  Tensor target_rgb;   // m x 3
  Tensor target_alpha; // m x 1
  Tensor bg_rgb;       // m x 3
  Tensor off_local;    // m x 2, M_f(p) - M_f(p_local)
  Tensor off_global;   // m x 2
};

EditBatch make_edit_batch(const AtlasModel& model, const AtlasTexture& edited_fg_rgb,
                          const AtlasTexture& edited_bg, const AtlasTexture& mask,
                          const std::vector<PixelPoint>& pts, double delta_local,
                          double delta_global);

// Tape graph for one batch; exposes every term so tests can probe them.
struct EditLossNodes {
  MlpNetwork::TapeBind map_p, map_pl, map_pg, alpha_p;
  int alpha_unit = -1;  // opacity in (0,1)
  int render = -1;      // m x 3 edited render
  int loss_rgb = -1, loss_alpha = -1, loss_off_local = -1, loss_off_global = -1;
  int total = -1;
};

EditLossNodes build_edit_loss(ad::Tape& tape, EditMappingNetworks& nets,
                              const AtlasTexture& edited_fg_rgb, const EditBatch& batch,
                              const LossWeights& w);

// Score gradient injected at the rendered pixels: w(t) * (eps_hat - eps)
// with w(t) = 1 - abar(t) and eps_hat recovered from the v prediction. A
// perfect prediction (v_hat equal to the true v target) makes this vanish.
Tensor sds_pixel_gradient(const Tensor& v_hat, const Tensor& eps, const Tensor& zt, int level,
                          const NoiseSchedule& sched);

// Scalar reference of one offset term: mean squared mismatch (per batch row)
// between predicted uv differences and the source differences. Matches the
// tape-built loss and is invariant to translating both uv arguments.
double offset_loss_value(const Tensor& uv_p, const Tensor& uv_po, const Tensor& off_target);

// Denoiser hookup for the score-injection phase.
struct SdsSetup {
  const DenoiserNetwork* net = nullptr;
  const NoiseSchedule* sched = nullptr;
  ConditioningContext ctx;
  double cfg_scale = 1.0;
};

// Fit the mapping to the identity (x,y,k) -> (x,y) in normalized coordinates
// and the opacity to the mask pulled back through the frozen source mapping.
// iters == 0 leaves the networks untouched.
void identity_pretrain(EditMappingNetworks& nets, const AtlasModel& model,
                       const AtlasTexture& mask, int iters, double lr, Rng& rng);

struct UvOptimizeResult {
  EditMappingNetworks nets;
  std::vector<UvLossRow> losses;
};

// Full two-phase run. `sds` may be null: phase 2 then trains the
// reconstruction losses alone. Throws DivergenceError on non-finite loss.
UvOptimizeResult optimize_uv_mappings(const AtlasModel& model, const AtlasTexture& edited_fg,
                                      const AtlasTexture& edited_bg, const AtlasTexture& mask,
                                      const UvOptimizeConfig& cfg, const SdsSetup* sds);

// Final propagation: c(p) = (1 - a(p)) bg[M_b(p)] + a(p) fg[M_edit(p)] with
// the frozen background mapping.
FrameSequence render_edited_video(const AtlasModel& model, const EditMappingNetworks& nets,
                                  const AtlasTexture& edited_fg, const AtlasTexture& edited_bg);

// Mapping outputs at given points (rows of uv), for mapping-quality metrics.
Tensor edit_mapping_uv(const EditMappingNetworks& nets, const Tensor& norm_pts);

}  // namespace vatlas
