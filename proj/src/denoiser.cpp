#include "vatlas/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "vatlas/adam.hpp"
#include "vatlas/encoding.hpp"
#include "vatlas/errors.hpp"
#include "vatlas/kernels.hpp"

namespace vatlas {

namespace {

void init_uniform(Tensor& t, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (double& x : t.d) x = rng.uniform(-bound, bound);
}

}  // namespace

DenoiserNetwork DenoiserNetwork::make(const DenoiserConfig& cfg, Rng& rng) {
  if (cfg.hidden_layers < 1) throw std::invalid_argument("DenoiserNetwork: hidden_layers >= 1");
  DenoiserNetwork net;
  net.cfg = cfg;
  const int d = net.data_width();
  const int c = net.cond_width();
  const int h = cfg.hidden;
  net.w_in = Tensor(d, h);
  net.b_in = Tensor(1, h);
  net.w_cond = Tensor(c, h);
  init_uniform(net.w_in, d, rng);
  init_uniform(net.b_in, d, rng);
  init_uniform(net.w_cond, c, rng);
  for (int i = 0; i < cfg.hidden_layers - 1; ++i) {
    MlpNetwork::Layer l{Tensor(h, h), Tensor(1, h)};
    init_uniform(l.w, h, rng);
    init_uniform(l.b, h, rng);
    net.hidden.push_back(std::move(l));
  }
  net.w_out = Tensor(h, d);
  net.b_out = Tensor(1, d);
  init_uniform(net.w_out, h, rng);
  init_uniform(net.b_out, h, rng);
  return net;
}

Tensor DenoiserNetwork::cond_row(int t, const NoiseSchedule& s, const ConditioningContext& ctx,
                                 bool conditioned) const {
  if (ctx.text.cols != cfg.cond.text_dim || ctx.image.cols != cfg.cond.image_dim)
    throw std::invalid_argument("DenoiserNetwork::cond_row: embedding width mismatch");
  Tensor tau(1, 1);
  tau.d[0] = double(t) / double(s.steps);
  const Tensor tf = positional_encode(tau, cfg.time_freqs);
  Tensor row(1, cond_width());
  std::size_t o = 0;
  for (double v : tf.d) row.d[o++] = v;
  for (double v : ctx.text.d) row.d[o++] = conditioned ? v : 0.0;
  for (double v : ctx.image.d) row.d[o++] = conditioned ? v : 0.0;
  return row;
}

Tensor DenoiserNetwork::forward(const Tensor& z, const Tensor& cond) const {
  if (z.cols != data_width() || cond.cols != cond_width() || cond.rows != z.rows)
    throw std::invalid_argument("DenoiserNetwork::forward: shape mismatch");
  const int h = cfg.hidden;
  Tensor a(z.rows, h);
  kern::matmul(z.data(), w_in.data(), a.data(), z.rows, z.cols, h);
  Tensor cproj(z.rows, h);
  kern::matmul(cond.data(), w_cond.data(), cproj.data(), cond.rows, cond.cols, h);
  kern::add(a.data(), cproj.data(), a.data(), a.size());
  for (int r = 0; r < a.rows; ++r) kern::add(a.row(r), b_in.data(), a.row(r), h);
  kern::relu(a.data(), a.data(), a.size());
  for (const MlpNetwork::Layer& l : hidden) {
    Tensor y(a.rows, h);
    kern::matmul(a.data(), l.w.data(), y.data(), a.rows, h, h);
    for (int r = 0; r < y.rows; ++r) kern::add(y.row(r), l.b.data(), y.row(r), h);
    kern::relu(y.data(), y.data(), y.size());
    a = std::move(y);
  }
  Tensor v(a.rows, data_width());
  kern::matmul(a.data(), w_out.data(), v.data(), a.rows, h, v.cols);
  for (int r = 0; r < v.rows; ++r) kern::add(v.row(r), b_out.data(), v.row(r), v.cols);
  return v;
}

DenoiserNetwork::Bind DenoiserNetwork::build(ad::Tape& t, int z_node, int cond_node) {
  Bind bind;
  const int win = t.param(&w_in);
  const int bin = t.param(&b_in);
  const int wc = t.param(&w_cond);
  bind.params = {win, bin, wc};
  int a = t.add_row(t.add(t.matmul(z_node, win), t.matmul(cond_node, wc)), bin);
  a = t.relu(a);
  for (MlpNetwork::Layer& l : hidden) {
    const int w = t.param(&l.w);
    const int b = t.param(&l.b);
    bind.params.push_back(w);
    bind.params.push_back(b);
    a = t.relu(t.add_row(t.matmul(a, w), b));
  }
  const int wo = t.param(&w_out);
  const int bo = t.param(&b_out);
  bind.params.push_back(wo);
  bind.params.push_back(bo);
  bind.out = t.add_row(t.matmul(a, wo), bo);
  return bind;
}

std::vector<Tensor*> DenoiserNetwork::params() {
  std::vector<Tensor*> out{&w_in, &b_in, &w_cond};
  for (MlpNetwork::Layer& l : hidden) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  out.push_back(&w_out);
  out.push_back(&b_out);
  return out;
}

std::size_t DenoiserNetwork::param_count() const {
  std::size_t n = w_in.size() + b_in.size() + w_cond.size() + w_out.size() + b_out.size();
  for (const MlpNetwork::Layer& l : hidden) n += l.w.size() + l.b.size();
  return n;
}

void DenoiserNetwork::add_to_checkpoint(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.add(prefix + ".w_in", w_in);
  ckpt.add(prefix + ".b_in", b_in);
  ckpt.add(prefix + ".w_cond", w_cond);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    ckpt.add(prefix + ".hw" + std::to_string(i), hidden[i].w);
    ckpt.add(prefix + ".hb" + std::to_string(i), hidden[i].b);
  }
  ckpt.add(prefix + ".w_out", w_out);
  ckpt.add(prefix + ".b_out", b_out);
  ckpt.meta[prefix + ".image_size"] = std::to_string(cfg.image_size);
  ckpt.meta[prefix + ".channels"] = std::to_string(cfg.channels);
  ckpt.meta[prefix + ".hidden"] = std::to_string(cfg.hidden);
  ckpt.meta[prefix + ".hidden_layers"] = std::to_string(cfg.hidden_layers);
  ckpt.meta[prefix + ".time_freqs"] = std::to_string(cfg.time_freqs);
  ckpt.meta[prefix + ".text_dim"] = std::to_string(cfg.cond.text_dim);
  ckpt.meta[prefix + ".image_dim"] = std::to_string(cfg.cond.image_dim);
  ckpt.meta[prefix + ".embed_seed"] = std::to_string(cfg.cond.embed_seed);
}

DenoiserNetwork DenoiserNetwork::from_checkpoint(const Checkpoint& ckpt,
                                                 const std::string& prefix) {
  auto meta_int = [&](const std::string& key) {
    const auto it = ckpt.meta.find(prefix + "." + key);
    if (it == ckpt.meta.end())
      throw std::runtime_error("checkpoint: missing denoiser meta " + key);
    return std::stoll(it->second);
  };
  DenoiserConfig cfg;
  cfg.image_size = int(meta_int("image_size"));
  cfg.channels = int(meta_int("channels"));
  cfg.hidden = int(meta_int("hidden"));
  cfg.hidden_layers = int(meta_int("hidden_layers"));
  cfg.time_freqs = int(meta_int("time_freqs"));
  cfg.cond.text_dim = int(meta_int("text_dim"));
  cfg.cond.image_dim = int(meta_int("image_dim"));
  cfg.cond.embed_seed = std::uint64_t(meta_int("embed_seed"));
  DenoiserNetwork net;
  net.cfg = cfg;
  auto need = [&](const std::string& name) {
    const Tensor* t = ckpt.find(prefix + "." + name);
    if (!t) throw std::runtime_error("checkpoint: missing denoiser tensor " + name);
    return *t;
  };
  net.w_in = need("w_in");
  net.b_in = need("b_in");
  net.w_cond = need("w_cond");
  for (int i = 0; i < cfg.hidden_layers - 1; ++i)
    net.hidden.push_back(
        {need("hw" + std::to_string(i)), need("hb" + std::to_string(i))});
  net.w_out = need("w_out");
  net.b_out = need("b_out");
  return net;
}

// ---- training ----

namespace {

// One optimization step on a prepared batch; shared by base training and
// one-shot fine-tuning.
double train_step(DenoiserNetwork& net, const Tensor& zt, const Tensor& cond,
                  const Tensor& target, AdamOptimizer& opt, GradBuffers& grads) {
  ad::Tape tape;
  const int z_node = tape.constant(zt);
  const int c_node = tape.constant(cond);
  DenoiserNetwork::Bind bind = net.build(tape, z_node, c_node);
  const int diff = tape.sub(bind.out, tape.constant(target));
  const int sq = tape.mul(diff, diff);
  const int loss =
      tape.scale(tape.reduce_sum(sq), 1.0 / (double(target.rows) * double(target.cols)));
  const double loss_value = tape.scalar_value(loss);
  tape.backward(loss);
  grads.zero();
  std::size_t i = 0;
  for (Tensor* p : net.params()) {
    const double* g = tape.grad_data(bind.params[i]);
    if (g) kern::axpy(1.0, g, grads.g[i].data(), p->size());
    ++i;
  }
  opt.step(grads);
  return loss_value;
}

}  // namespace

std::vector<LossLogRow> train_denoiser(DenoiserNetwork& net,
                                       const std::vector<DenoiserExample>& corpus,
                                       const NoiseSchedule& s, const DenoiserTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_denoiser: empty corpus");
  const int d = net.data_width();
  for (const DenoiserExample& e : corpus)
    if (e.z0.cols != d || e.z0.rows != 1)
      throw std::invalid_argument("train_denoiser: example width mismatch");

  Rng rng(cfg.seed);
  AdamOptimizer opt(net.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  GradBuffers grads = GradBuffers::like(net.params());
  std::vector<LossLogRow> log;

  Tensor zt(cfg.batch, d), target(cfg.batch, d), cond(cfg.batch, net.cond_width());
  Tensor eps(1, d);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int r = 0; r < cfg.batch; ++r) {
      const DenoiserExample& ex = corpus[rng.uniform_int(0, int(corpus.size()) - 1)];
      const int t = rng.uniform_int(1, s.steps);
      for (double& v : eps.d) v = rng.normal();
      const Tensor z = add_noise(ex.z0, eps, t, s);
      const Tensor v = v_target(ex.z0, eps, t, s);
      std::memcpy(zt.row(r), z.data(), sizeof(double) * d);
      std::memcpy(target.row(r), v.data(), sizeof(double) * d);
      const bool conditioned = rng.uniform() >= cfg.cond_dropout;
      const Tensor crow = net.cond_row(t, s, ex.ctx, conditioned);
      std::memcpy(cond.row(r), crow.data(), sizeof(double) * crow.size());
    }
    const double loss = train_step(net, zt, cond, target, opt, grads);
    if (!std::isfinite(loss)) throw DivergenceError("train_denoiser", cfg.seed, step);
    if (step % 50 == 0 || step + 1 == cfg.steps) log.push_back({step, loss});
  }
  return log;
}

std::vector<LossLogRow> finetune_denoiser(DenoiserNetwork& net, const Image& target_crop,
                                          const std::string& caption,
                                          const std::vector<Image>& reference_crops,
                                          const NoiseSchedule& s, const FinetuneConfig& cfg) {
  if (reference_crops.empty())
    throw std::invalid_argument("finetune_denoiser: need at least one reference crop");
  const int d = net.data_width();
  const Tensor z0 = latent_from_image(target_crop);
  if (z0.cols != d) throw std::invalid_argument("finetune_denoiser: crop size mismatch");
  const Tensor text = embed_caption(caption, net.cfg.cond);

  Rng rng(cfg.seed);
  AdamOptimizer opt(net.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  GradBuffers grads = GradBuffers::like(net.params());
  std::vector<LossLogRow> log;
  const int cap = std::min(cfg.noise_cap, s.steps);

  Tensor zt(cfg.batch, d), target(cfg.batch, d), cond(cfg.batch, net.cond_width());
  Tensor eps(1, d);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int r = 0; r < cfg.batch; ++r) {
      const Image& ref = reference_crops[rng.uniform_int(0, int(reference_crops.size()) - 1)];
      Tensor ref_embed = embed_reference_image(ref, net.cfg.cond);
      const int level = rng.uniform_int(0, cap);
      ref_embed = corrupt_embedding(ref_embed, level, cap, s, rng);
      const ConditioningContext ctx{text, std::move(ref_embed)};

      const int t = rng.uniform_int(1, s.steps);
      for (double& v : eps.d) v = rng.normal();
      const Tensor z = add_noise(z0, eps, t, s);
      const Tensor v = v_target(z0, eps, t, s);
      std::memcpy(zt.row(r), z.data(), sizeof(double) * d);
      std::memcpy(target.row(r), v.data(), sizeof(double) * d);
      const Tensor crow = net.cond_row(t, s, ctx, true);
      std::memcpy(cond.row(r), crow.data(), sizeof(double) * crow.size());
    }
    const double loss = train_step(net, zt, cond, target, opt, grads);
    if (!std::isfinite(loss)) throw DivergenceError("finetune_denoiser", cfg.seed, step);
    log.push_back({step, loss});
  }
  return log;
}

// ---- sampling ----

Tensor predict_v_guided(const DenoiserNetwork& net, const Tensor& z, int t,
                        const NoiseSchedule& s, const ConditioningContext& ctx, double cfg_scale) {
  const Tensor v_cond = net.forward(z, net.cond_row(t, s, ctx, true));
  if (cfg_scale == 1.0) return v_cond;
  const Tensor v_uncond = net.forward(z, net.cond_row(t, s, ctx, false));
  return cfg_combine(v_uncond, v_cond, cfg_scale);
}

Tensor ddim_sample(const DenoiserNetwork& net, LatentState init, const ConditioningContext& ctx,
                   const NoiseSchedule& s, double cfg_scale) {
  if (init.t < 0 || init.t > s.steps) throw std::out_of_range("ddim_sample: bad start level");
  Tensor z = std::move(init.z);
  for (int t = init.t; t >= 1; --t) {
    const Tensor v = predict_v_guided(net, z, t, s, ctx, cfg_scale);
    const Tensor eps = eps_from_v(v, z, t, s);
    z = ddim_step(z, eps, t, s);
  }
  return z;
}

Tensor ddim_invert(const DenoiserNetwork& net, const Tensor& z0, int to_t,
                   const ConditioningContext& ctx, const NoiseSchedule& s, double cfg_scale) {
  if (to_t < 0 || to_t > s.steps) throw std::out_of_range("ddim_invert: bad target level");
  Tensor z = z0;
  for (int t = 0; t < to_t; ++t) {
    const Tensor v = predict_v_guided(net, z, t, s, ctx, cfg_scale);
    const Tensor eps = eps_from_v(v, z, t, s);
    z = ddim_invert_step(z, eps, t, s);
  }
  return z;
}

Tensor latent_from_image(const Image& img) {
  Tensor z(1, int(img.px.size()));
  for (std::size_t i = 0; i < img.px.size(); ++i) z.d[i] = 2.0 * img.px[i] - 1.0;
  return z;
}

Image image_from_latent(const Tensor& z, int size, int channels) {
  if (int(z.size()) != size * size * channels)
    throw std::invalid_argument("image_from_latent: size mismatch");
  Image img(size, size, channels);
  for (std::size_t i = 0; i < z.size(); ++i) img.px[i] = (z.d[i] + 1.0) * 0.5;
  return img;
}

}  // namespace vatlas
