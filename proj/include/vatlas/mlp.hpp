#pragma once

#include <vector>

#include "vatlas/rng.hpp"
#include "vatlas/tape.hpp"
#include "vatlas/tensor.hpp"

// Fully connected network: ReLU on every hidden layer, tanh or identity on
// the output. Weights are fan_in x fan_out, biases 1 x fan_out, both drawn
// uniformly from [-sqrt(1/fan_in), +sqrt(1/fan_in)] in a fixed order (w row
// major, then b, layer by layer) so a seed pins every parameter.

namespace vatlas {

enum class OutputActivation { Identity, Tanh };

struct MlpNetwork {
  struct Layer {
    Tensor w, b;
  };

  int in_width = 0;
  OutputActivation out_act = OutputActivation::Identity;
  std::vector<Layer> layers;

  static MlpNetwork make(int in_width, const std::vector<int>& hidden, int out_width,
                         OutputActivation act, Rng& rng);

  int out_width() const;
  std::size_t param_count() const;

  // Plain forward pass (no recording). Throws std::invalid_argument on an
  // input width mismatch or a non-finite input value.
  Tensor forward(const Tensor& x) const;

  // Record the forward pass on a tape. Parameters are registered as tape
  // params, so optimizer updates followed by forward_replay() re-evaluate
  // the network in place.
  struct TapeBind {
    std::vector<int> w_nodes, b_nodes;
    int out = -1;
  };
  TapeBind build(ad::Tape& t, int input);

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;

  // grads[offset + i] += d(loss)/d(params()[i]) as recorded on the tape.
  void accumulate_grads(const ad::Tape& t, const TapeBind& bind, std::vector<Tensor>& grads,
                        std::size_t offset = 0) const;
};

}  // namespace vatlas
