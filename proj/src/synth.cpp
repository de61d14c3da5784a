#include "vatlas/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vatlas/encoding.hpp"  // kPi
#include "vatlas/rng.hpp"

namespace vatlas {
namespace {

// Smooth periodic square wave in [0,1]: tanh-sharpened sine. `softness`
// controls the transition width; the result is C-infinity, which keeps the
// scene friendly to gradient-based fitting while still looking like a
// checker/stripe pattern.
double wave(double t, double period, double softness) {
  return 0.5 * (1.0 + std::tanh(std::sin(2.0 * kPi * t / period) / softness));
}

std::array<double, 3> mix3(const std::array<double, 3>& a, const std::array<double, 3>& b,
                           double w) {
  return {a[0] * (1.0 - w) + b[0] * w, a[1] * (1.0 - w) + b[1] * w,
          a[2] * (1.0 - w) + b[2] * w};
}

std::array<double, 3> background_color(const SyntheticScene& s, double x, double y) {
  switch (s.bg_pattern) {
    case BgPattern::Checker: {
      const double wx = wave(x, s.bg_cell, s.bg_softness);
      const double wy = wave(y, s.bg_cell, s.bg_softness);
      // Parity product: 1 where both waves agree, 0 where they differ.
      const double w = wx * wy + (1.0 - wx) * (1.0 - wy);
      return mix3(s.bg_color_b, s.bg_color_a, w);
    }
    case BgPattern::Stripes:
      return mix3(s.bg_color_b, s.bg_color_a, wave(x, s.bg_cell, s.bg_softness));
    case BgPattern::Gradient: {
      const double w = 0.5 * (x / s.width + y / s.height);
      return mix3(s.bg_color_a, s.bg_color_b, w);
    }
  }
  throw std::logic_error("unknown background pattern");
}

// Procedural RGBA sprite: cosine-palette rings with a mild angular wobble and
// a soft alpha edge. Seeded phases make distinct sprites per scene seed.
Image make_sprite(const SyntheticScene& s) {
  Rng rng(s.seed ^ 0x5052495445ull);
  const double phase_r = rng.uniform() * 2.0 * kPi;
  const double phase_g = rng.uniform() * 2.0 * kPi;
  const double phase_b = rng.uniform() * 2.0 * kPi;
  const double wobble = 0.15 + 0.1 * rng.uniform();

  Image sprite(s.sprite_size, s.sprite_size, 4);
  for (int j = 0; j < s.sprite_size; ++j) {
    for (int i = 0; i < s.sprite_size; ++i) {
      const double u = (2.0 * (i + 0.5) / s.sprite_size) - 1.0;
      const double v = (2.0 * (j + 0.5) / s.sprite_size) - 1.0;
      const double r = std::sqrt(u * u + v * v);
      const double theta = std::atan2(v, u);
      const double ring = r * s.sprite_rings + wobble * std::sin(3.0 * theta);
      sprite.at(j, i, 0) = 0.5 + 0.45 * std::cos(2.0 * kPi * ring + phase_r);
      sprite.at(j, i, 1) = 0.5 + 0.45 * std::cos(2.0 * kPi * ring + phase_g);
      sprite.at(j, i, 2) = 0.5 + 0.45 * std::cos(2.0 * kPi * ring + phase_b);
      // Soft edge: alpha 1 inside sprite_edge, smooth falloff to 0 at r = 1.
      double t = (r - s.sprite_edge) / (1.0 - s.sprite_edge);
      t = std::min(1.0, std::max(0.0, t));
      sprite.at(j, i, 3) = 1.0 - t * t * (3.0 - 2.0 * t);
    }
  }
  return sprite;
}

SpritePose pose_at(const SyntheticScene& s, int k) {
  SpritePose p;
  const double cx = s.center_x >= 0.0 ? s.center_x : 0.5 * s.width;
  const double cy = s.center_y >= 0.0 ? s.center_y : 0.5 * s.height;
  if (s.motion == MotionKind::Linear) {
    p.cx = cx + s.vel_x * k;
    p.cy = cy + s.vel_y * k;
  } else {
    const double t = 2.0 * kPi * k / std::max(1, s.frames);
    p.cx = cx + s.orbit_rx * std::sin(t);
    p.cy = cy + s.orbit_ry * std::sin(2.0 * t);
  }
  p.angle = s.rot_per_frame * k;
  p.scale = s.sprite_scale;
  return p;
}

// Frame coords of a sprite-local point (sprite px, origin at sprite center).
void local_to_frame(const SpritePose& p, double qx, double qy, double* fx, double* fy) {
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  *fx = p.cx + p.scale * (c * qx - s * qy);
  *fy = p.cy + p.scale * (s * qx + c * qy);
}

void frame_to_local(const SpritePose& p, double fx, double fy, double* qx, double* qy) {
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  const double dx = (fx - p.cx) / p.scale;
  const double dy = (fy - p.cy) / p.scale;
  *qx = c * dx + s * dy;
  *qy = -s * dx + c * dy;
}

// Bilinear RGBA fetch with zero padding: points past the bitmap edge fade to
// fully transparent instead of clamping, so the sprite has a clean border.
std::array<double, 4> sprite_sample(const Image& sprite, double sx, double sy) {
  const double gx = sx - 0.5, gy = sy - 0.5;
  const int ix = static_cast<int>(std::floor(gx));
  const int iy = static_cast<int>(std::floor(gy));
  const double fx = gx - ix, fy = gy - iy;
  std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int px = ix + dx, py = iy + dy;
      if (px < 0 || py < 0 || px >= sprite.w || py >= sprite.h) continue;
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      for (int c = 0; c < 4; ++c) out[c] += w * sprite.at(py, px, c);
    }
  }
  return out;
}

struct RenderedFrame {
  Image rgb;
  Image alpha;
  Image uv;
};

RenderedFrame render_frame(const SyntheticScene& s, const Image& sprite, const SpritePose& pose) {
  RenderedFrame out{Image(s.width, s.height, 3), Image(s.width, s.height, 1),
                    Image(s.width, s.height, 2)};
  const double half = 0.5 * s.sprite_size;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double qx, qy;
      frame_to_local(pose, px, py, &qx, &qy);
      const std::array<double, 4> fg = sprite_sample(sprite, qx + half, qy + half);
      const std::array<double, 3> bg = background_color(s, px, py);
      const double a = fg[3];
      for (int c = 0; c < 3; ++c) out.rgb.at(y, x, c) = (1.0 - a) * bg[c] + a * fg[c];
      out.alpha.at(y, x, 0) = a;
      if (a > 0.0) {
        out.uv.at(y, x, 0) = qx / half;
        out.uv.at(y, x, 1) = qy / half;
      } else {
        out.uv.at(y, x, 0) = 0.0;
        out.uv.at(y, x, 1) = 0.0;
      }
    }
  }
  return out;
}

void check_in_bounds(const SyntheticScene& s, const SpritePose& pose, int k) {
  const double half = 0.5 * s.sprite_size;
  for (int corner = 0; corner < 4; ++corner) {
    const double qx = (corner & 1) ? half : -half;
    const double qy = (corner & 2) ? half : -half;
    double fx, fy;
    local_to_frame(pose, qx, qy, &fx, &fy);
    if (fx < 0.0 || fy < 0.0 || fx > s.width || fy > s.height) {
      throw std::invalid_argument("sprite out of bounds on frame " + std::to_string(k));
    }
  }
}

}  // namespace

std::pair<FrameSequence, GroundTruth> generate_synthetic_video(const SyntheticScene& scene) {
  if (scene.width <= 0 || scene.height <= 0 || scene.frames <= 0 || scene.sprite_size <= 1) {
    throw std::invalid_argument("synthetic scene dimensions must be positive");
  }
  GroundTruth gt;
  gt.scene = scene;
  gt.sprite = make_sprite(scene);

  FrameSequence seq;
  for (int k = 0; k < scene.frames; ++k) {
    const SpritePose pose = pose_at(scene, k);
    check_in_bounds(scene, pose, k);
    gt.poses.push_back(pose);
    RenderedFrame rf = render_frame(scene, gt.sprite, pose);
    seq.frames.push_back(std::move(rf.rgb));
    gt.alphas.push_back(std::move(rf.alpha));
    gt.uv.push_back(std::move(rf.uv));
  }

  // Backward flow: for each pixel of frame k+1, the offset to the point of
  // frame k showing the same sprite-local position.
  for (int k = 0; k + 1 < scene.frames; ++k) {
    Image flow(scene.width, scene.height, 2);
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        double qx, qy, sx, sy;
        frame_to_local(gt.poses[k + 1], px, py, &qx, &qy);
        local_to_frame(gt.poses[k], qx, qy, &sx, &sy);
        flow.at(y, x, 0) = sx - px;
        flow.at(y, x, 1) = sy - py;
      }
    }
    gt.flow_back.push_back(std::move(flow));
  }
  return {std::move(seq), std::move(gt)};
}

FrameSequence rerender_from_ground_truth(const GroundTruth& gt) {
  FrameSequence seq;
  for (const SpritePose& pose : gt.poses) {
    seq.frames.push_back(render_frame(gt.scene, gt.sprite, pose).rgb);
  }
  return seq;
}

Image render_background_tile(const SyntheticScene& scene, int size) {
  if (size <= 0) throw std::invalid_argument("render_background_tile: size must be positive");
  SyntheticScene tile_scene = scene;  // gradient scaling tracks the tile size
  tile_scene.width = size;
  tile_scene.height = size;
  Image tile(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::array<double, 3> c = background_color(tile_scene, x + 0.5, y + 0.5);
      for (int ch = 0; ch < 3; ++ch) tile.at(y, x, ch) = c[ch];
    }
  }
  return tile;
}

}  // namespace vatlas
