#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vatlas/image.hpp"

// Synthetic two-layer test scenes: a procedural sprite moving over a static
// patterned background, rendered with exact ground truth for every quantity
// the pipeline is later asked to recover (alpha, sprite-local uv, flow).
// Rendering is pure math on the scene description, so identical scenes
// render bit-identically.

namespace vatlas {

enum class BgPattern { Checker, Stripes, Gradient };
enum class MotionKind { Linear, Orbit };

struct SyntheticScene {
  int width = 96, height = 54, frames = 12;

  BgPattern bg_pattern = BgPattern::Checker;
  std::array<double, 3> bg_color_a{0.15, 0.25, 0.55};
  std::array<double, 3> bg_color_b{0.85, 0.80, 0.45};
  double bg_cell = 16.0;       // pattern period in px (one light + one dark cell)
  double bg_softness = 0.35;   // edge smoothness; tanh-of-sine steepness

  int sprite_size = 24;        // procedural RGBA bitmap side length
  int sprite_rings = 3;
  double sprite_edge = 0.82;   // alpha falloff start (fraction of radius)

  MotionKind motion = MotionKind::Orbit;
  double center_x = -1.0, center_y = -1.0;  // path center; negative = frame center
  double vel_x = 1.0, vel_y = 0.0;          // Linear: px per frame
  double orbit_rx = 10.0, orbit_ry = 5.0;   // Orbit: sinusoid amplitudes in px
  double rot_per_frame = 0.0;               // radians per frame
  double sprite_scale = 1.0;                // sprite px per frame px

  std::uint64_t seed = 5;
};

// Sprite position for frame k: frame = center(k) + scale * R(angle(k)) * local.
struct SpritePose {
  double cx = 0.0, cy = 0.0;
  double angle = 0.0;
  double scale = 1.0;
};

struct FrameSequence {
  std::vector<Image> frames;
};

struct GroundTruth {
  SyntheticScene scene;
  Image sprite;                   // RGBA bitmap, procedurally generated
  std::vector<SpritePose> poses;  // one per frame
  std::vector<Image> alphas;      // 1ch per frame
  std::vector<Image> uv;          // 2ch per frame: sprite-local coords in [-1,1], 0 off-sprite
  std::vector<Image> flow_back;   // frames-1 entries, 2ch: frame k+1 pixel -> frame k offset
};

// Renders the scene. Throws std::invalid_argument if the sprite leaves the
// frame on any frame.
std::pair<FrameSequence, GroundTruth> generate_synthetic_video(const SyntheticScene& scene);

// Re-render frames from stored sprite + poses (bit-identical to the frames
// produced together with this ground truth).
FrameSequence rerender_from_ground_truth(const GroundTruth& gt);

// A size x size tile of just the background pattern (palette / period /
// softness from the scene); used to build texture corpora for the denoiser.
Image render_background_tile(const SyntheticScene& scene, int size);

}  // namespace vatlas
