#include "vatlas/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/kernels.hpp"

namespace vatlas {

MlpNetwork MlpNetwork::make(int in_width, const std::vector<int>& hidden, int out_width,
                            OutputActivation act, Rng& rng) {
  if (in_width < 1 || out_width < 1) throw std::invalid_argument("MlpNetwork: bad widths");
  MlpNetwork net;
  net.in_width = in_width;
  net.out_act = act;
  int fan_in = in_width;
  std::vector<int> widths = hidden;
  widths.push_back(out_width);
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("MlpNetwork: bad layer width");
    Layer layer{Tensor(fan_in, w), Tensor(1, w)};
    const double bound = std::sqrt(1.0 / fan_in);
    for (double& x : layer.w.d) x = rng.uniform(-bound, bound);
    for (double& x : layer.b.d) x = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(layer));
    fan_in = w;
  }
  return net;
}

int MlpNetwork::out_width() const {
  return layers.empty() ? 0 : layers.back().w.cols;
}

std::size_t MlpNetwork::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Tensor MlpNetwork::forward(const Tensor& x) const {
  if (x.cols != in_width) throw std::invalid_argument("MlpNetwork::forward: input width mismatch");
  if (!x.all_finite()) throw std::invalid_argument("MlpNetwork::forward: non-finite input");
  Tensor h = x;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    Tensor y(h.rows, l.w.cols);
    kern::matmul(h.data(), l.w.data(), y.data(), h.rows, h.cols, l.w.cols);
    for (int r = 0; r < y.rows; ++r) kern::add(y.row(r), l.b.data(), y.row(r), y.cols);
    const bool last = li + 1 == layers.size();
    if (!last) {
      kern::relu(y.data(), y.data(), y.size());
    } else if (out_act == OutputActivation::Tanh) {
      for (double& v : y.d) v = std::tanh(v);
    }
    h = std::move(y);
  }
  return h;
}

MlpNetwork::TapeBind MlpNetwork::build(ad::Tape& t, int input) {
  if (t.cols(input) != in_width)
    throw std::invalid_argument("MlpNetwork::build: input width mismatch");
  TapeBind bind;
  int h = input;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Layer& l = layers[li];
    const int w = t.param(&l.w);
    const int b = t.param(&l.b);
    bind.w_nodes.push_back(w);
    bind.b_nodes.push_back(b);
    int y = t.add_row(t.matmul(h, w), b);
    const bool last = li + 1 == layers.size();
    if (!last)
      y = t.relu(y);
    else if (out_act == OutputActivation::Tanh)
      y = t.tanh(y);
    h = y;
  }
  bind.out = h;
  return bind;
}

std::vector<Tensor*> MlpNetwork::params() {
  std::vector<Tensor*> out;
  for (Layer& l : layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<const Tensor*> MlpNetwork::params() const {
  std::vector<const Tensor*> out;
  for (const Layer& l : layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

void MlpNetwork::accumulate_grads(const ad::Tape& t, const TapeBind& bind,
                                  std::vector<Tensor>& grads, std::size_t offset) const {
  if (grads.size() < offset + layers.size() * 2)
    throw std::invalid_argument("accumulate_grads: buffer count mismatch");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Tensor& gw_buf = grads[offset + 2 * li];
    Tensor& gb_buf = grads[offset + 2 * li + 1];
    const double* gw = t.grad_data(bind.w_nodes[li]);
    const double* gb = t.grad_data(bind.b_nodes[li]);
    if (gw) kern::axpy(1.0, gw, gw_buf.data(), gw_buf.size());
    if (gb) kern::axpy(1.0, gb, gb_buf.data(), gb_buf.size());
  }
}

}  // namespace vatlas
