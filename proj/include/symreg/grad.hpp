#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

#include "symreg/field.hpp"
#include "symreg/loss.hpp"
#include "symreg/volume.hpp"

namespace symreg {

/// Raw (pre-softsign) parameters for both directions.
struct ParameterPair {
  VelocityField xy;
  VelocityField yx;

  /// Parameters are indexed xy first, then yx, each planar.
  std::size_t size() const { return xy.data().size() + yx.data().size(); }
  double& operator[](std::size_t k);
  double operator[](std::size_t k) const;
};

/// d(total) / d(raw parameters).
struct GradientPair {
  VelocityField g_xy;
  VelocityField g_yx;

  std::size_t size() const { return g_xy.data().size() + g_yx.data().size(); }
  double operator[](std::size_t k) const;
};

/// Raised when a gradient sweep produces non-finite values; `term()` names the
/// stage where they first appeared.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::string term)
      : std::runtime_error("non-finite gradient in " + term), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

struct LossAndGradient {
  LossBreakdown loss;
  GradientPair grad;
};

/// Loss at raw parameters (softsign with bound c, then total_loss).
LossBreakdown total_loss_raw(const Volume& x, const Volume& y, const ParameterPair& raw,
                             const LossWeights& weights, int steps, double c,
                             const LossTerms& terms = LossTerms::all());

/// Reverse-mode gradient of total_loss with respect to the raw parameters.
LossAndGradient grad_total_loss(const Volume& x, const Volume& y, const ParameterPair& raw,
                                const LossWeights& weights = {}, int steps = kDefaultSquaringSteps,
                                double c = kDefaultVelocityBound,
                                const LossTerms& terms = LossTerms::all());

using Objective = std::function<double(const ParameterPair&)>;

/// Central difference (f(theta + h e_k) - f(theta - h e_k)) / 2h.
double fd_gradient(const Objective& f, const ParameterPair& raw, std::size_t k, double step);

/// fd_gradient of total_loss_raw.
double fd_gradient(const Volume& x, const Volume& y, const ParameterPair& raw,
                   const LossWeights& weights, int steps, double c, std::size_t k, double step,
                   const LossTerms& terms = LossTerms::all());

}  // namespace symreg
