#include "vatlas/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "vatlas/rng.hpp"

namespace vatlas {

FiniteDiffReport finite_diff_check(ad::Tape& tape, int loss_node, int probe_count, double eps,
                                   std::uint64_t seed) {
  const auto params = tape.param_nodes();
  if (params.empty()) throw std::invalid_argument("finite_diff_check: tape has no parameters");

  tape.forward_replay();
  tape.backward(loss_node);

  // Snapshot the analytic gradients before any replay disturbs the values.
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& [node, storage] : params) {
    (void)storage;
    analytic.push_back(tape.grad_copy(node));
  }

  std::size_t total = 0;
  for (const auto& [node, storage] : params) {
    (void)node;
    total += storage->size();
  }

  Rng rng(seed);
  FiniteDiffReport report;
  for (int probe = 0; probe < probe_count; ++probe) {
    // Pick a parameter entry uniformly over all entries.
    std::size_t flat = std::size_t(rng.uniform() * double(total));
    if (flat >= total) flat = total - 1;
    std::size_t pi = 0;
    while (flat >= params[pi].second->size()) {
      flat -= params[pi].second->size();
      ++pi;
    }
    Tensor* storage = params[pi].second;
    const double saved = storage->d[flat];

    storage->d[flat] = saved + eps;
    tape.forward_replay();
    const double f_plus = tape.scalar_value(loss_node);
    const ad::ReluPattern pat_plus = tape.relu_pattern();

    storage->d[flat] = saved - eps;
    tape.forward_replay();
    const double f_minus = tape.scalar_value(loss_node);
    const ad::ReluPattern pat_minus = tape.relu_pattern();

    storage->d[flat] = saved;

    if (!pat_plus.comparable_to(pat_minus) || pat_plus.any_exact_zero ||
        pat_minus.any_exact_zero) {
      ++report.skipped;
      continue;
    }

    const double fd = (f_plus - f_minus) / (2.0 * eps);
    // A network built several times on one tape binds the same storage to
    // several param nodes; perturbing the entry moves the loss through all of
    // them, so the analytic counterpart is the sum over those nodes.
    double an = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].second == storage) an += analytic[i].d[flat];
    }
    const double denom = std::max({1.0, std::fabs(fd), std::fabs(an)});
    const double rel = std::fabs(fd - an) / denom;
    if (rel > report.max_rel_error) report.max_rel_error = rel;
    ++report.probes;
  }

  tape.forward_replay();  // leave values consistent with the restored params
  return report;
}

}  // namespace vatlas
