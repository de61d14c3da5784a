#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vatlas {

// Thrown when a training loop produces a non-finite loss or gradient. The
// seed and iteration make the failure reproducible from the command line.
struct DivergenceError : std::runtime_error {
  std::uint64_t seed;
  int iteration;

  DivergenceError(const std::string& stage, std::uint64_t seed_, int iteration_)
      : std::runtime_error(stage + ": training diverged (non-finite loss) at iteration " +
                           std::to_string(iteration_) + ", seed " + std::to_string(seed_)),
        seed(seed_),
        iteration(iteration_) {}
};

// Thrown when a pipeline stage cannot find an input a previous stage should
// have produced.
struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for malformed or out-of-range configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vatlas
