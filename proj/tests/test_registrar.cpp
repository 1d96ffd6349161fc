#include "doctest.h"
#include "oracles.hpp"

#include "symreg/registrar.hpp"

using namespace symreg;

namespace {

// The smoothness term's curvature in raw units grows like c^2 / N, so the
// default step is stable only on grids of roughly 27^3 and up.
RegistrationConfig small_grid_config() {
  RegistrationConfig cfg;
  cfg.step_size = 0.005;
  return cfg;
}

ParameterPair filled_pair(const Dims& d, double v) {
  ParameterPair p{VelocityField(d), VelocityField(d)};
  for (double& x : p.xy.data()) x = v;
  for (double& x : p.yx.data()) x = -v;
  return p;
}

GradientPair filled_grad(const Dims& d, double g) {
  GradientPair out{VelocityField(d), VelocityField(d)};
  for (double& x : out.g_xy.data()) x = g;
  for (double& x : out.g_yx.data()) x = 2 * g;
  return out;
}

}  // namespace

TEST_CASE("plain gradient step") {
  const Dims d{2, 2, 2};
  RegistrationConfig cfg;
  cfg.momentum = 0.0;
  cfg.step_size = 0.25;
  ParameterPair th = filled_pair(d, 1.0);
  MomentumState st(d);
  const GradientPair g = filled_grad(d, 0.4);
  step(th, st, g, cfg);
  step(th, st, g, cfg);
  for (double x : th.xy.data()) CHECK(x == doctest::Approx(1.0 - 2 * 0.25 * 0.4));
  for (double x : th.yx.data()) CHECK(x == doctest::Approx(-1.0 - 2 * 0.25 * 0.8));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  const Dims d{2, 2, 2};
  ParameterPair th = filled_pair(d, 0.3);
  const ParameterPair before = th;
  MomentumState st(d);
  step(th, st, filled_grad(d, 0.0), RegistrationConfig{});
  CHECK(th.xy == before.xy);
  CHECK(th.yx == before.yx);
}

TEST_CASE("two momentum steps") {
  const Dims d{2, 2, 2};
  RegistrationConfig cfg;
  cfg.momentum = 0.9;
  cfg.step_size = 0.1;
  ParameterPair th = filled_pair(d, 0.0);
  MomentumState st(d);
  const GradientPair g = filled_grad(d, 1.0);
  step(th, st, g, cfg);
  step(th, st, g, cfg);
  for (double x : st.m_xy.data()) CHECK(x == doctest::Approx(1.9));
  for (double x : th.xy.data()) CHECK(x == doctest::Approx(-0.1 * 2.9));
  for (double x : th.yx.data()) CHECK(x == doctest::Approx(-0.1 * 2.9 * 2));
}

TEST_CASE("config presets and validation") {
  CHECK(RegistrationConfig::paper().step_size == 1e-4);
  CHECK(RegistrationConfig::paper().momentum == 0.9);
  CHECK(RegistrationConfig::direct().step_size == 0.1);
  const RegistrationConfig def;
  CHECK(def.steps == 7);
  CHECK(def.c == 100.0);
  CHECK(def.weights.lambda_jdet == 1000.0);
  CHECK(def.weights.lambda_reg == 3.0);
  CHECK(def.weights.lambda_mag == 0.1);
  for (auto mutate : {+[](RegistrationConfig& c) { c.steps = 0; },
                      +[](RegistrationConfig& c) { c.step_size = 0.0; },
                      +[](RegistrationConfig& c) { c.momentum = 1.0; },
                      +[](RegistrationConfig& c) { c.momentum = -0.1; },
                      +[](RegistrationConfig& c) { c.max_iters = 0; }}) {
    RegistrationConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}

TEST_CASE("identical images stay at the identity") {
  const SynthPair p = synth_pair(1, {12, 12, 12}, 2.0, 0.0);
  RegistrationConfig cfg = small_grid_config();
  cfg.max_iters = 60;
  int calls = 0;
  const RegistrationResult r = register_pair(p.x, p.x, cfg, [&](int, const LossBreakdown&) { ++calls; });
  CHECK(r.converged);
  CHECK(calls == r.iterations);
  CHECK(r.history.size() == static_cast<std::size_t>(r.iterations));
  CHECK(r.iterations <= cfg.max_iters);
  CHECK(mean_displacement(r.fields.xy_full) < 0.1);
  CHECK(r.folds_xy_half.non_positive == 0);
  CHECK(r.runtime_seconds >= 0.0);
}

TEST_CASE("short run reduces the loss and respects max_iters") {
  const SynthPair p = synth_translation_pair(2, {12, 12, 12}, {1.0, 0.0, 0.0});
  RegistrationConfig cfg = small_grid_config();
  cfg.max_iters = 15;
  const RegistrationResult r = register_pair(p.x, p.y, cfg);
  CHECK(r.iterations == 15);
  CHECK_FALSE(r.converged);
  CHECK(r.history.back().total < r.history.front().total);
  CHECK(r.v_xy == softsign_normalize(r.raw.xy, cfg.c));
  CHECK(r.fields.xy_full == full_transforms(r.v_xy, r.v_yx, cfg.steps).xy_full);
}

TEST_CASE("halving on increase shrinks the step after a rise") {
  const SynthPair p = synth_translation_pair(2, {12, 12, 12}, {1.0, 0.0, 0.0});
  RegistrationConfig cfg = small_grid_config();
  cfg.max_iters = 40;
  cfg.step_size = 0.05;
  const RegistrationResult plain = register_pair(p.x, p.y, cfg);
  cfg.halve_on_increase = true;
  const RegistrationResult halved = register_pair(p.x, p.y, cfg);
  int rises_plain = 0;
  int rises_halved = 0;
  for (std::size_t i = 1; i < plain.history.size(); ++i)
    rises_plain += plain.history[i].total > plain.history[i - 1].total;
  for (std::size_t i = 1; i < halved.history.size(); ++i)
    rises_halved += halved.history[i].total > halved.history[i - 1].total;
  CHECK(rises_plain > 0);
  CHECK(rises_halved < rises_plain);
}

TEST_CASE("register rejects bad inputs") {
  RegistrationConfig cfg;
  CHECK_THROWS(register_pair(Volume({4, 4, 4}), Volume({4, 4, 5}), cfg));
  CHECK_THROWS(register_pair(Volume({2, 4, 4}), Volume({2, 4, 4}), cfg));
  Volume nan({4, 4, 4});
  nan[3] = std::nan("");
  CHECK_THROWS(register_pair(nan, Volume({4, 4, 4}), cfg));
}

TEST_CASE("non-finite loss aborts with the iteration index") {
  const SynthPair p = synth_pair(3, {6, 6, 6}, 1.5, 1.0);
  Volume huge = p.x;
  for (double& v : huge.data()) v *= 1e200;
  RegistrationConfig cfg;
  cfg.max_iters = 5;
  try {
    register_pair(huge, p.y, cfg);
    FAIL("expected RegistrationError");
  } catch (const RegistrationError& e) {
    CHECK(e.iteration() == 0);
  }
}
