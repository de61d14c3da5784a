#include "vatlas/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "vatlas/encoding.hpp"
#include "vatlas/kernels.hpp"
#include "vatlas/texture.hpp"

namespace vatlas::ad {

namespace {
constexpr std::size_t kChunkDoubles = std::size_t(1) << 20;  // 8 MiB per chunk

[[noreturn]] void shape_error(const char* op) {
  throw std::invalid_argument(std::string("tape: shape mismatch in ") + op);
}
}  // namespace

Tape::Tape() = default;
Tape::~Tape() = default;

double* Tape::arena_alloc(std::size_t n) {
  if (n > kChunkDoubles) {
    // Oversized request gets a dedicated chunk so pointers stay stable.
    chunks_.insert(chunks_.begin() + chunk_index_, std::vector<double>(n));
    return chunks_[chunk_index_++].data();
  }
  while (true) {
    if (chunk_index_ == chunks_.size()) chunks_.emplace_back(kChunkDoubles);
    if (chunks_[chunk_index_].size() - chunk_used_ >= n) break;
    ++chunk_index_;
    chunk_used_ = 0;
  }
  double* p = chunks_[chunk_index_].data() + chunk_used_;
  chunk_used_ += n;
  return p;
}

void Tape::arena_rewind() {
  chunk_index_ = 0;
  chunk_used_ = 0;
}

void Tape::clear() {
  nodes_.clear();
  arena_rewind();
}

const Tape::Node& Tape::at(int id) const {
  if (id < 0 || id >= int(nodes_.size())) throw std::out_of_range("tape: bad node id");
  return nodes_[id];
}

int Tape::rows(int id) const { return at(id).rows; }
int Tape::cols(int id) const { return at(id).cols; }
const double* Tape::value_data(int id) const { return at(id).value; }

double Tape::scalar_value(int id) const {
  const Node& n = at(id);
  if (n.rows != 1 || n.cols != 1) throw std::invalid_argument("tape: node is not a 1x1 scalar");
  return n.value[0];
}

Tensor Tape::value_copy(int id) const {
  const Node& n = at(id);
  Tensor t(n.rows, n.cols);
  std::memcpy(t.data(), n.value, sizeof(double) * t.size());
  return t;
}

const double* Tape::grad_data(int id) const { return at(id).grad; }

Tensor Tape::grad_copy(int id) const {
  const Node& n = at(id);
  if (!n.grad) throw std::invalid_argument("tape: node has no gradient (not grad-reachable)");
  Tensor t(n.rows, n.cols);
  std::memcpy(t.data(), n.grad, sizeof(double) * t.size());
  return t;
}

int Tape::push(Node n) {
  n.value = arena_alloc(std::size_t(n.rows) * n.cols);
  n.grad = nullptr;
  nodes_.push_back(std::move(n));
  Node& stored = nodes_.back();
  eval(stored);
  return int(nodes_.size()) - 1;
}

int Tape::constant(const Tensor& v) {
  Node n;
  n.op = Op::Const;
  n.rows = v.rows;
  n.cols = v.cols;
  n.held = v;
  return push(std::move(n));
}

int Tape::param(Tensor* storage) {
  if (!storage) throw std::invalid_argument("tape: param storage is null");
  Node n;
  n.op = Op::Param;
  n.rows = storage->rows;
  n.cols = storage->cols;
  n.storage = storage;
  n.needs_grad = true;
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  const Node &na = at(a), &nb = at(b);
  if (na.cols != nb.rows) shape_error("matmul");
  Node n;
  n.op = Op::MatMul;
  n.a = a; n.b = b;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Node &na = at(a), &nb = at(b);
  if (na.rows != nb.rows || na.cols != nb.cols) shape_error("add");
  Node n;
  n.op = Op::Add;
  n.a = a; n.b = b;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Node &na = at(a), &nb = at(b);
  if (na.rows != nb.rows || na.cols != nb.cols) shape_error("sub");
  Node n;
  n.op = Op::Sub;
  n.a = a; n.b = b;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Node &na = at(a), &nb = at(b);
  if (na.rows != nb.rows || na.cols != nb.cols) shape_error("mul");
  Node n;
  n.op = Op::Mul;
  n.a = a; n.b = b;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  return push(std::move(n));
}

int Tape::mul_col(int a, int col) {
  const Node &na = at(a), &nc = at(col);
  if (nc.cols != 1 || nc.rows != na.rows) shape_error("mul_col");
  Node n;
  n.op = Op::MulCol;
  n.a = a; n.b = col;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad || nc.needs_grad;
  return push(std::move(n));
}

int Tape::add_row(int a, int row) {
  const Node &na = at(a), &nr = at(row);
  if (nr.rows != 1 || nr.cols != na.cols) shape_error("add_row");
  Node n;
  n.op = Op::AddRow;
  n.a = a; n.b = row;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad || nr.needs_grad;
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Scale;
  n.a = a; n.s = s;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::add_scalar(int a, double s) {
  const Node& na = at(a);
  Node n;
  n.op = Op::AddScalar;
  n.a = a; n.s = s;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::relu(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::tanh(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.rows = na.rows; n.cols = na.cols;
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::pos_encode(int a, int freqs) {
  if (freqs < 1) throw std::invalid_argument("tape: pos_encode needs freqs >= 1");
  const Node& na = at(a);
  Node n;
  n.op = Op::PosEncode;
  n.a = a;
  n.freqs = freqs;
  n.rows = na.rows;
  n.cols = encoded_width(na.cols, freqs);
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::gather(const AtlasTexture* tex, int uv) {
  if (!tex) throw std::invalid_argument("tape: gather texture is null");
  const Node& na = at(uv);
  if (na.cols != 2) shape_error("gather (uv must be m x 2)");
  Node n;
  n.op = Op::Gather;
  n.a = uv;
  n.tex = tex;
  n.rows = na.rows;
  n.cols = tex->channels;
  n.needs_grad = na.needs_grad;
  return push(std::move(n));
}

int Tape::reduce_sum(int a) {
  Node n;
  n.op = Op::ReduceSum;
  n.a = a;
  n.rows = 1; n.cols = 1;
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

void Tape::eval(Node& n) {
  const std::size_t count = std::size_t(n.rows) * n.cols;
  switch (n.op) {
    case Op::Const:
      std::memcpy(n.value, n.held.data(), sizeof(double) * count);
      break;
    case Op::Param: {
      if (n.storage->rows != n.rows || n.storage->cols != n.cols)
        throw std::invalid_argument("tape: param storage shape changed between replays");
      std::memcpy(n.value, n.storage->data(), sizeof(double) * count);
      break;
    }
    case Op::MatMul: {
      const Node &a = nodes_[n.a], &b = nodes_[n.b];
      kern::matmul(a.value, b.value, n.value, a.rows, a.cols, b.cols);
      break;
    }
    case Op::Add:
      kern::add(nodes_[n.a].value, nodes_[n.b].value, n.value, count);
      break;
    case Op::Sub:
      kern::sub(nodes_[n.a].value, nodes_[n.b].value, n.value, count);
      break;
    case Op::Mul:
      kern::mul(nodes_[n.a].value, nodes_[n.b].value, n.value, count);
      break;
    case Op::MulCol: {
      const Node &a = nodes_[n.a], &c = nodes_[n.b];
      for (int r = 0; r < n.rows; ++r)
        kern::scale(a.value + std::size_t(r) * n.cols, c.value[r],
                    n.value + std::size_t(r) * n.cols, n.cols);
      break;
    }
    case Op::AddRow: {
      const Node &a = nodes_[n.a], &rw = nodes_[n.b];
      for (int r = 0; r < n.rows; ++r)
        kern::add(a.value + std::size_t(r) * n.cols, rw.value,
                  n.value + std::size_t(r) * n.cols, n.cols);
      break;
    }
    case Op::Scale:
      kern::scale(nodes_[n.a].value, n.s, n.value, count);
      break;
    case Op::AddScalar:
      kern::add_scalar(nodes_[n.a].value, n.s, n.value, count);
      break;
    case Op::Relu:
      kern::relu(nodes_[n.a].value, n.value, count);
      break;
    case Op::Tanh: {
      const double* x = nodes_[n.a].value;
      for (std::size_t i = 0; i < count; ++i) n.value[i] = std::tanh(x[i]);
      break;
    }
    case Op::PosEncode: {
      const Node& a = nodes_[n.a];
      positional_encode_rows(a.value, n.value, a.rows, a.cols, n.freqs);
      break;
    }
    case Op::Gather: {
      const Node& a = nodes_[n.a];
      for (int r = 0; r < n.rows; ++r) {
        const BilinearSample s =
            bilinear_sample(*n.tex, a.value[2 * std::size_t(r)], a.value[2 * std::size_t(r) + 1]);
        for (int c = 0; c < n.cols; ++c) n.value[std::size_t(r) * n.cols + c] = s.value[c];
      }
      break;
    }
    case Op::ReduceSum: {
      const Node& a = nodes_[n.a];
      n.value[0] = kern::sum(a.value, std::size_t(a.rows) * a.cols);
      break;
    }
  }
}

void Tape::forward_replay() {
  for (Node& n : nodes_) eval(n);
}

void Tape::backward(int out) {
  const Node& n = at(out);
  if (n.rows != 1 || n.cols != 1)
    throw std::invalid_argument("tape: scalar backward needs a 1x1 output node");
  const double one = 1.0;
  run_backward(out, &one, 1, 1);
}

void Tape::backward(int out, const Tensor& seed) {
  const Node& n = at(out);
  if (seed.rows != n.rows || seed.cols != n.cols)
    throw std::invalid_argument("tape: backward seed shape mismatch");
  run_backward(out, seed.data(), seed.rows, seed.cols);
}

void Tape::run_backward(int out, const double* seed, int, int) {
  // Allocate and zero gradient buffers for grad-reachable nodes only.
  for (Node& n : nodes_) {
    if (!n.needs_grad) {
      n.grad = nullptr;
      continue;
    }
    const std::size_t count = std::size_t(n.rows) * n.cols;
    if (!n.grad) n.grad = arena_alloc(count);
    std::memset(n.grad, 0, sizeof(double) * count);
  }
  Node& root = nodes_[out];
  if (!root.needs_grad) return;  // output does not depend on any parameter
  const std::size_t root_count = std::size_t(root.rows) * root.cols;
  std::memcpy(root.grad, seed, sizeof(double) * root_count);

  for (int id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || id > out) continue;
    const double* g = n.grad;
    const std::size_t count = std::size_t(n.rows) * n.cols;
    switch (n.op) {
      case Op::Const:
      case Op::Param:
        break;
      case Op::MatMul: {
        Node &a = nodes_[n.a], &b = nodes_[n.b];
        if (a.needs_grad) kern::matmul_a_bt_acc(g, b.value, a.grad, a.rows, b.cols, a.cols);
        if (b.needs_grad) kern::matmul_at_b_acc(a.value, g, b.grad, a.rows, a.cols, b.cols);
        break;
      }
      case Op::Add: {
        Node &a = nodes_[n.a], &b = nodes_[n.b];
        if (a.needs_grad) kern::axpy(1.0, g, a.grad, count);
        if (b.needs_grad) kern::axpy(1.0, g, b.grad, count);
        break;
      }
      case Op::Sub: {
        Node &a = nodes_[n.a], &b = nodes_[n.b];
        if (a.needs_grad) kern::axpy(1.0, g, a.grad, count);
        if (b.needs_grad) kern::axpy(-1.0, g, b.grad, count);
        break;
      }
      case Op::Mul: {
        Node &a = nodes_[n.a], &b = nodes_[n.b];
        if (a.needs_grad) kern::mul_acc(g, b.value, a.grad, count);
        if (b.needs_grad) kern::mul_acc(g, a.value, b.grad, count);
        break;
      }
      case Op::MulCol: {
        Node &a = nodes_[n.a], &c = nodes_[n.b];
        for (int r = 0; r < n.rows; ++r) {
          const double* gr = g + std::size_t(r) * n.cols;
          if (a.needs_grad)
            kern::axpy(c.value[r], gr, a.grad + std::size_t(r) * n.cols, n.cols);
          if (c.needs_grad)
            c.grad[r] += kern::dot(gr, a.value + std::size_t(r) * n.cols, n.cols);
        }
        break;
      }
      case Op::AddRow: {
        Node &a = nodes_[n.a], &rw = nodes_[n.b];
        if (a.needs_grad) kern::axpy(1.0, g, a.grad, count);
        if (rw.needs_grad)
          for (int r = 0; r < n.rows; ++r)
            kern::add(rw.grad, g + std::size_t(r) * n.cols, rw.grad, n.cols);
        break;
      }
      case Op::Scale: {
        Node& a = nodes_[n.a];
        if (a.needs_grad) kern::axpy(n.s, g, a.grad, count);
        break;
      }
      case Op::AddScalar: {
        Node& a = nodes_[n.a];
        if (a.needs_grad) kern::axpy(1.0, g, a.grad, count);
        break;
      }
      case Op::Relu: {
        Node& a = nodes_[n.a];
        if (a.needs_grad) kern::relu_mask_acc(a.value, g, a.grad, count);
        break;
      }
      case Op::Tanh: {
        Node& a = nodes_[n.a];
        if (a.needs_grad) kern::tanh_backward_acc(n.value, g, a.grad, count);
        break;
      }
      case Op::PosEncode: {
        Node& a = nodes_[n.a];
        if (!a.needs_grad) break;
        const int dims = a.cols;
        for (int r = 0; r < n.rows; ++r) {
          const double* gr = g + std::size_t(r) * n.cols;
          const double* vr = n.value + std::size_t(r) * n.cols;
          double* ga = a.grad + std::size_t(r) * dims;
          for (int d = 0; d < dims; ++d) ga[d] += gr[d];
          double w = kPi;
          for (int j = 0; j < n.freqs; ++j, w *= 2.0) {
            const double* gs = gr + dims + 2 * j * dims;
            const double* gc = gs + dims;
            const double* vs = vr + dims + 2 * j * dims;
            const double* vc = vs + dims;
            // d sin(wx)/dx = w cos(wx); d cos(wx)/dx = -w sin(wx); reuse outputs.
            for (int d = 0; d < dims; ++d) ga[d] += w * (gs[d] * vc[d] - gc[d] * vs[d]);
          }
        }
        break;
      }
      case Op::Gather: {
        Node& a = nodes_[n.a];
        if (!a.needs_grad) break;
        for (int r = 0; r < n.rows; ++r) {
          const BilinearSample s =
              bilinear_sample(*n.tex, a.value[2 * std::size_t(r)], a.value[2 * std::size_t(r) + 1]);
          const double* gr = g + std::size_t(r) * n.cols;
          double gu = 0.0, gv = 0.0;
          for (int c = 0; c < n.cols; ++c) {
            gu += gr[c] * s.du[c];
            gv += gr[c] * s.dv[c];
          }
          a.grad[2 * std::size_t(r)] += gu;
          a.grad[2 * std::size_t(r) + 1] += gv;
        }
        break;
      }
      case Op::ReduceSum: {
        Node& a = nodes_[n.a];
        if (a.needs_grad) kern::acc_scalar(g[0], a.grad, std::size_t(a.rows) * a.cols);
        break;
      }
    }
  }
}

std::vector<std::pair<int, Tensor*>> Tape::param_nodes() const {
  std::vector<std::pair<int, Tensor*>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::Param) out.emplace_back(int(i), nodes_[i].storage);
  return out;
}

ReluPattern Tape::relu_pattern() const {
  ReluPattern p;
  for (const Node& n : nodes_) {
    if (n.op != Op::Relu) continue;
    const Node& a = nodes_[n.a];
    const std::size_t count = std::size_t(a.rows) * a.cols;
    for (std::size_t i = 0; i < count; ++i) {
      p.positive.push_back(a.value[i] > 0.0 ? 1 : 0);
      if (a.value[i] == 0.0) p.any_exact_zero = true;
    }
  }
  return p;
}

}  // namespace vatlas::ad
