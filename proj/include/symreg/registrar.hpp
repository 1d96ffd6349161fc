#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "symreg/eval.hpp"
#include "symreg/field.hpp"
#include "symreg/grad.hpp"
#include "symreg/loss.hpp"
#include "symreg/volume.hpp"

namespace symreg {

struct RegistrationConfig {
  int steps = kDefaultSquaringSteps;  // squaring steps T
  double c = kDefaultVelocityBound;
  LossWeights weights{};
  double step_size = 0.1;
  double momentum = 0.9;
  int max_iters = 300;
  // Stop once the relative change of the total over `window` iterations stays
  // below `rel_tol` for `patience` consecutive windows.
  double rel_tol = 1e-5;
  int window = 10;
  int patience = 3;
  // Halve step_size whenever the total increases over the previous iteration.
  bool halve_on_increase = false;
  // Recorded in the summary; the optimizer itself is deterministic.
  std::uint64_t seed = 0;

  void validate() const;

  /// Optimizer settings as used for network training (lr 1e-4, momentum 0.9).
  static RegistrationConfig paper();
  /// Settings for direct per-pair optimization of the raw velocity parameters.
  static RegistrationConfig direct();
};

struct MomentumState {
  VelocityField m_xy;
  VelocityField m_yx;

  explicit MomentumState(const Dims& dims) : m_xy(dims), m_yx(dims) {}
};

/// m <- momentum * m + g; theta <- theta - step_size * m.
void step(ParameterPair& theta, MomentumState& state, const GradientPair& g,
          const RegistrationConfig& cfg);

struct RegistrationResult {
  ParameterPair raw;
  VelocityField v_xy;
  VelocityField v_yx;
  FullTransforms fields;
  std::vector<LossBreakdown> history;
  FoldReport folds_xy_half;
  FoldReport folds_yx_half;
  FoldReport folds_xy_full;
  FoldReport folds_yx_full;
  int iterations = 0;
  bool converged = false;
  double runtime_seconds = 0.0;
};

/// Raised when the objective becomes non-finite during optimization.
class RegistrationError : public std::runtime_error {
 public:
  RegistrationError(const std::string& what, int iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Called after every iteration with the iteration index and its loss.
using IterationCallback = std::function<void(int, const LossBreakdown&)>;

/// Symmetric registration of x and y starting from zero velocities.
RegistrationResult register_pair(const Volume& x, const Volume& y, const RegistrationConfig& cfg,
                                 const IterationCallback& on_iteration = {});

}  // namespace symreg
