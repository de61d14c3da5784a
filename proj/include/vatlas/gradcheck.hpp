#pragma once

#include <cstdint>

#include "vatlas/tape.hpp"

// Central finite-difference verification of tape gradients.
//
// The tape must already hold a recorded scalar loss. For each probe a random
// parameter entry is nudged by +/-eps, the tape is replayed forward and the
// central difference is compared with the recorded analytic gradient. Error
// is relative with a unit floor:
//   rel = |fd - analytic| / max(1, |fd|, |analytic|)
// so tiny gradients are compared absolutely (central differences carry
// O(eps^2) truncation noise that would otherwise dominate the ratio).
//
// A probe is skipped (not failed) when the two perturbed evaluations do not
// share a ReLU activation sign pattern, or when a ReLU input lands exactly
// on 0 - the kink makes the finite difference meaningless there.

namespace vatlas {

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  int probes = 0;
  int skipped = 0;
};

FiniteDiffReport finite_diff_check(ad::Tape& tape, int loss_node, int probe_count, double eps,
                                   std::uint64_t seed);

}  // namespace vatlas
