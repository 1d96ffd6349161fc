#include "symreg/registrar.hpp"

#include <chrono>
#include <cmath>

namespace symreg {

void RegistrationConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("T must be >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  if (!(step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (window < 1 || patience < 1) throw std::invalid_argument("window and patience must be >= 1");
  weights.validate();
}

RegistrationConfig RegistrationConfig::paper() {
  RegistrationConfig cfg;
  cfg.step_size = 1e-4;
  cfg.momentum = 0.9;
  return cfg;
}

RegistrationConfig RegistrationConfig::direct() { return RegistrationConfig{}; }

void step(ParameterPair& theta, MomentumState& state, const GradientPair& g,
          const RegistrationConfig& cfg) {
  auto update = [&](VelocityField& th, VelocityField& m, const VelocityField& gr) {
    auto t = th.data();
    auto mv = m.data();
    auto gv = gr.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      mv[i] = cfg.momentum * mv[i] + gv[i];
      t[i] -= cfg.step_size * mv[i];
    }
  };
  update(theta.xy, state.m_xy, g.g_xy);
  update(theta.yx, state.m_yx, g.g_yx);
}

RegistrationResult register_pair(const Volume& x, const Volume& y, const RegistrationConfig& cfg,
                                 const IterationCallback& on_iteration) {
  cfg.validate();
  require_same_dims(x.dims(), y.dims(), "register");
  const Dims& dims = x.dims();
  if (dims.nx < 3 || dims.ny < 3 || dims.nz < 3)
    throw std::invalid_argument("register needs at least 3 voxels per axis, got " + to_string(dims));
  require_finite(x);
  require_finite(y);

  const auto t0 = std::chrono::steady_clock::now();
  RegistrationResult res;
  res.raw = {VelocityField(dims), VelocityField(dims)};
  MomentumState state(dims);
  RegistrationConfig run = cfg;
  int stalled = 0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    LossAndGradient lg;
    try {
      lg = grad_total_loss(x, y, res.raw, cfg.weights, cfg.steps, cfg.c);
    } catch (const NonFiniteGradient& e) {
      throw RegistrationError(e.what(), it);
    }
    if (!std::isfinite(lg.loss.total)) throw RegistrationError("non-finite loss", it);
    res.history.push_back(lg.loss);
    res.iterations = it + 1;
    if (on_iteration) on_iteration(it, lg.loss);

    if (it >= cfg.window && it % cfg.window == 0) {
      const double prev = res.history[it - cfg.window].total;
      const double rel = std::abs(lg.loss.total - prev) / std::max(std::abs(prev), 1e-12);
      stalled = rel < cfg.rel_tol ? stalled + 1 : 0;
      if (stalled >= cfg.patience) {
        res.converged = true;
        break;
      }
    }
    if (run.halve_on_increase && it > 0 && lg.loss.total > res.history[it - 1].total)
      run.step_size *= 0.5;
    step(res.raw, state, lg.grad, run);
  }

  res.v_xy = softsign_normalize(res.raw.xy, cfg.c);
  res.v_yx = softsign_normalize(res.raw.yx, cfg.c);
  res.fields = full_transforms(res.v_xy, res.v_yx, cfg.steps);
  res.folds_xy_half = fold_report(res.fields.xy_half);
  res.folds_yx_half = fold_report(res.fields.yx_half);
  res.folds_xy_full = fold_report(res.fields.xy_full);
  res.folds_yx_full = fold_report(res.fields.yx_full);
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace symreg
