#pragma once

#include <cstdint>
#include <vector>

#include "vatlas/tensor.hpp"

// Reverse-mode autodiff on a flat tape of matrix-valued nodes.
//
// A Tape records one forward computation; backward() walks it in reverse and
// accumulates gradients into per-node buffers. Nodes are identified by the
// int handle returned when they are recorded. Buffers live in a chunked
// arena owned by the tape, so clear() recycles memory without freeing it and
// a training loop settles into zero allocations per iteration.
//
// Leaves come in two kinds:
//  * constant(t)  - value captured by copy at record time;
//  * param(&t)    - value re-read from *t on every forward_replay(), so a
//                   parameter update (or finite-difference nudge) followed by
//                   a replay re-evaluates the same computation.
//
// Gradients flow only through nodes reachable from a param leaf; everything
// else is treated as constant.

namespace vatlas {

struct AtlasTexture;

namespace ad {

enum class Op : std::uint8_t {
  Const, Param, MatMul, Add, Sub, Mul, MulCol, AddRow, Scale, AddScalar,
  Relu, Tanh, PosEncode, Gather, ReduceSum,
};

// Sign pattern of every ReLU input on the tape, used to detect when a
// finite-difference probe straddles a kink.
struct ReluPattern {
  std::vector<std::uint8_t> positive;
  bool any_exact_zero = false;

  bool comparable_to(const ReluPattern& o) const { return positive == o.positive; }
};

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  int constant(const Tensor& v);
  int param(Tensor* storage);

  int matmul(int a, int b);        // (m x k) * (k x n)
  int add(int a, int b);           // same shape
  int sub(int a, int b);           // same shape
  int mul(int a, int b);           // elementwise, same shape
  int mul_col(int a, int col);     // (m x n) .* broadcast of (m x 1) across columns
  int add_row(int a, int row);     // (m x n) + broadcast of (1 x n) down rows
  int scale(int a, double s);
  int add_scalar(int a, double s);
  int relu(int a);
  int tanh(int a);
  // [x, sin(2^j pi x), cos(2^j pi x)] for j = 0..freqs-1; differentiable in x.
  int pos_encode(int a, int freqs);
  // Bilinear texture fetch at each row's (u, v); tex must outlive the tape.
  // Gradients flow into the uv node (not into the texels).
  int gather(const AtlasTexture* tex, int uv);
  int reduce_sum(int a);           // 1 x 1; fixed-order reduction

  int node_count() const { return int(nodes_.size()); }
  int rows(int id) const;
  int cols(int id) const;
  const double* value_data(int id) const;
  double scalar_value(int id) const;  // value of a 1x1 node
  Tensor value_copy(int id) const;

  // Recompute every node value in recording order, re-reading param storage.
  // With unchanged inputs this reproduces the original values bit for bit.
  void forward_replay();

  // Accumulate d(out)/d(node) for every grad-reachable node. The scalar
  // overload requires a 1x1 out node and seeds with 1; the seeded overload
  // accepts any shape. Gradients are zeroed at the start of each call.
  void backward(int out);
  void backward(int out, const Tensor& seed);

  const double* grad_data(int id) const;  // null if node is not grad-reachable
  Tensor grad_copy(int id) const;

  // Every param leaf on the tape with the storage it reads from.
  std::vector<std::pair<int, Tensor*>> param_nodes() const;

  ReluPattern relu_pattern() const;

  void clear();  // drop all nodes, keep arena memory

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double s = 0.0;  // Scale / AddScalar operand
    int freqs = 0;   // PosEncode
    const AtlasTexture* tex = nullptr;
    int rows = 0;
    int cols = 0;
    double* value = nullptr;
    double* grad = nullptr;
    Tensor* storage = nullptr;  // Param source
    Tensor held;                // Const copy
    bool needs_grad = false;
  };

  double* arena_alloc(std::size_t n);
  void arena_rewind();
  int push(Node n);
  void eval(Node& n);
  const Node& at(int id) const;
  void run_backward(int out, const double* seed, int seed_rows, int seed_cols);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> chunks_;
  std::size_t chunk_index_ = 0;
  std::size_t chunk_used_ = 0;
};

}  // namespace ad
}  // namespace vatlas
