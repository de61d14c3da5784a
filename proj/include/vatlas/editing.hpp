#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vatlas/atlas_model.hpp"
#include "vatlas/denoiser.hpp"
#include "vatlas/image.hpp"
#include "vatlas/synth.hpp"
#include "vatlas/texture.hpp"

// Editing glue between the decomposed layers and the mapping re-optimization:
// object-centric cropping, mask extraction from edits rendered on a black
// background, the initial edited-frame render through the original (frozen)
// mapping networks, shadow-preserving paste of the edited object back onto
// the source atlas, and diffusion-based background restyling.

namespace vatlas {

// Square axis-aligned window in source pixel units plus the resample size, so
// crops can be mapped back to their origin exactly.
struct CropSpec {
  int x0 = 0, y0 = 0;  // top-left corner, clamped inside the source
  int side = 0;        // window side length in source pixels
  int src_w = 0, src_h = 0;
  int out_size = 0;    // resampled crop resolution
};

// Square window centered on the bounding box of alpha >= tau, grown by
// `margin` and clamped inside the image. Throws std::invalid_argument when no
// pixel reaches tau.
CropSpec compute_crop_spec(const Image& alpha, int out_size, double tau = 0.5,
                           double margin = 1.25);

// Resample the window to out_size x out_size (no masking).
Image crop_window(const Image& image, const CropSpec& spec);

// Object crop: background zeroed by multiplying with alpha, then windowed and
// resampled. The returned spec un-crops the result.
std::pair<Image, CropSpec> center_crop_object(const Image& image, const Image& alpha,
                                              int out_size, double tau = 0.5,
                                              double margin = 1.25);

// Place a crop back into a blank source-sized image (zeros outside the
// window). Exact inverse of the windowing when out_size == side.
Image uncrop(const Image& crop, const CropSpec& spec);

// One 3x3 max-then-min pass; closes single-pixel holes in a soft mask.
Image morphological_close(const Image& mask);

// Opacity from an edit rendered over black: smoothstep of the max-channel
// luminance between lo and hi, then one closing pass.
Image extract_mask(const Image& crop, double lo = 0.02, double hi = 0.08);

// Blend the edited texels over the source foreground atlas by the mask,
// keep source opacity where it exceeds the mask (soft shadows the
// decomposition assigned to the foreground survive the edit), and
// diffusion-fill texels that neither the mask covers nor any source frame
// ever observed. edited rgb(+?), source rgba, mask single channel; result is
// rgba with every channel in [0,1].
AtlasTexture paste_and_inpaint(const AtlasTexture& edited_fg, const AtlasTexture& source_fg,
                               const AtlasTexture& fg_mask);

// Per-pixel initial edited render through the frozen mappings:
//   c(p) = (1 - a(p)) bg[M_b(p)] + a(p) fg[M_f(p)],  a(p) = mask[M_f(p)]
// Textures are bilinear-sampled; fg may carry an alpha channel (ignored
// here; the mask drives opacity).
FrameSequence initial_edit_render(const AtlasModel& model, const AtlasTexture& edited_fg,
                                  const AtlasTexture& edited_bg, const AtlasTexture& alpha_mask);

// Image-to-image restyle of the background atlas: noise the texture to
// ceil(strength * T), then sample back down under the target conditioning.
// The texture resolution must equal the denoiser's input size; strength must
// lie in (0, 1].
AtlasTexture edit_background_atlas(const DenoiserNetwork& net, const AtlasTexture& bg_tex,
                                   const ConditioningContext& ctx, double strength,
                                   const NoiseSchedule& sched, double cfg_scale,
                                   std::uint64_t seed);

}  // namespace vatlas
