#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

#include "symreg/field.hpp"
#include "symreg/warp.hpp"

using namespace symreg;

namespace {

constexpr double kFlowTolerance = 2.5e-2;  // calibrated against the Euler oracle

DeformationField constant_field(const Dims& d, Point3 t) {
  DeformationField f(d);
  for (int c = 0; c < 3; ++c)
    for (double& x : f.component(c)) x = t[c];
  return f;
}

bool interior(const Dims& d, std::size_t i, int margin) {
  const int x = static_cast<int>(i % d.nx);
  const int y = static_cast<int>((i / d.nx) % d.ny);
  const int z = static_cast<int>(i / (static_cast<std::size_t>(d.nx) * d.ny));
  return x >= margin && y >= margin && z >= margin && x < d.nx - margin && y < d.ny - margin &&
         z < d.nz - margin;
}

}  // namespace

TEST_CASE("identity field") {
  const DeformationField id = identity_field({4, 4, 4});
  for (double x : id.data()) REQUIRE(x == 0.0);
  const Volume v = oracle::random_volume({4, 4, 4}, 1);
  CHECK(warp_image(v, id) == v);
  for (const Volume dets = jacobian_det_field(id); double det : dets.data()) REQUIRE(det == 1.0);
}

TEST_CASE("softsign examples and properties") {
  VelocityField raw({3, 1, 1}, std::vector<double>(9, 0.0));
  raw(0, 1) = 1.0;
  raw(0, 2) = 1e12;
  raw(1, 0) = -1.0;
  const VelocityField v = softsign_normalize(raw, 100.0);
  CHECK(v(0, 0) == 0.0);
  CHECK(v(0, 1) == doctest::Approx(50.0));
  CHECK(v(0, 2) < 100.0);
  CHECK(v(0, 2) > 99.99);
  CHECK(v(1, 0) == doctest::Approx(-50.0));

  double prev = -200.0;
  for (double r = -50.0; r <= 50.0; r += 0.37) {
    VelocityField p({1, 1, 1}, {r, -r, 0.0});
    const VelocityField q = softsign_normalize(p, 100.0);
    REQUIRE(q(0, 0) == -q(1, 0));
    REQUIRE(q(0, 0) > prev);
    REQUIRE(std::abs(q(0, 0)) < 100.0);
    prev = q(0, 0);
  }
  CHECK_THROWS_AS(softsign_normalize(raw, 0.0), std::invalid_argument);
}

TEST_CASE("compose with identity") {
  const Dims d{8, 8, 8};
  const auto f = oracle::smooth_random_field<DeformationField>(d, 2, 2.0, 1.5);
  CHECK(compose(identity_field(d), f) == f);
  CHECK(compose(f, identity_field(d)) == f);
}

TEST_CASE("constant translations add") {
  const Dims d{8, 8, 8};
  const auto a = constant_field(d, {1.0, -0.5, 0.25});
  const auto b = constant_field(d, {0.5, 1.0, -1.25});
  const auto ab = compose(a, b);
  for (std::size_t i = 0; i < d.count(); ++i) {
    if (!interior(d, i, 2)) continue;
    REQUIRE(ab(0, i) == doctest::Approx(1.5));
    REQUIRE(ab(1, i) == doctest::Approx(0.5));
    REQUIRE(ab(2, i) == doctest::Approx(-1.0));
  }
}

TEST_CASE("compose matches the pointwise oracle") {
  const Dims d{8, 8, 8};
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto a = oracle::smooth_random_field<DeformationField>(d, 10 + s, 2.5, 1.0);
    const auto b = oracle::smooth_random_field<DeformationField>(d, 20 + s, 2.5, 1.0);
    const auto got = compose(a, b);
    const auto want = oracle::compose_pointwise(a, b);
    for (std::size_t k = 0; k < got.data().size(); ++k)
      REQUIRE(got.data()[k] == doctest::Approx(want.data()[k]).epsilon(1e-12));
  }
}

TEST_CASE("compose is associative up to interpolation error") {
  const Dims d{12, 12, 12};
  const auto a = oracle::smooth_random_field<DeformationField>(d, 31, 1.0, 3.0);
  const auto b = oracle::smooth_random_field<DeformationField>(d, 32, 1.0, 3.0);
  const auto c = oracle::smooth_random_field<DeformationField>(d, 33, 1.0, 3.0);
  const double err = oracle::mean_difference(compose(compose(a, b), c), compose(a, compose(b, c)));
  CHECK(err < kFlowTolerance);
}

TEST_CASE("exp of zero velocity is the identity") {
  const VelocityField v({5, 4, 3});
  for (FlowTime t : {FlowTime::half, FlowTime::full})
    for (Direction s : {Direction::forward, Direction::inverse})
      for (int steps : {1, 4, 7}) CHECK(exp_svf(v, t, s, steps) == identity_field(v.dims()));
}

TEST_CASE("constant velocity integrates to a translation") {
  const Dims d{10, 6, 6};
  VelocityField v(d);
  for (double& x : v.component(0)) x = 2.0;
  const auto full = exp_svf(v, FlowTime::full, Direction::forward, 7);
  const auto half = exp_svf(v, FlowTime::half, Direction::inverse, 7);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx - 2; ++x) {
        const std::size_t i = d.index(x, y, z);
        REQUIRE(full(0, i) == doctest::Approx(2.0));
        REQUIRE(full(1, i) == 0.0);
        REQUIRE(half(0, i) == doctest::Approx(-1.0));
      }
}

TEST_CASE("scaling and squaring matches Euler integration") {
  const Dims d{16, 16, 16};
  for (std::uint64_t s = 0; s < 2; ++s) {
    const VelocityField v = oracle::smooth_velocity(d, 500 + s, 3.0, 2.0);
    const double err =
        oracle::mean_difference(exp_svf(v, FlowTime::full, Direction::forward, 7), oracle::euler_flow(v, 128));
    CHECK(err < kFlowTolerance);
    const double half_err = oracle::mean_difference(exp_svf(v, FlowTime::half, Direction::inverse, 7),
                                                    oracle::euler_flow(v, 64, -0.5));
    CHECK(half_err < kFlowTolerance);
  }
}

TEST_CASE("half flows invert each other and compose to the full flow") {
  const Dims d{16, 16, 16};
  const VelocityField v = oracle::smooth_velocity(d, 502, 3.0, 2.0);
  const auto fwd = exp_svf(v, FlowTime::half, Direction::forward, 7);
  const auto inv = exp_svf(v, FlowTime::half, Direction::inverse, 7);
  CHECK(mean_displacement(compose(fwd, inv)) < kFlowTolerance);
  CHECK(mean_displacement(compose(inv, fwd)) < kFlowTolerance);
  const auto full = exp_svf(v, FlowTime::full, Direction::forward, 7);
  CHECK(oracle::mean_difference(compose(fwd, fwd), full) < 1e-12);
}

TEST_CASE("trajectory holds every squaring step") {
  const VelocityField v = oracle::smooth_velocity({6, 6, 6}, 3, 1.0, 1.0);
  CHECK(exp_svf_trajectory(v, FlowTime::half, Direction::forward, 7).size() == 7);
  CHECK(exp_svf_trajectory(v, FlowTime::full, Direction::forward, 7).size() == 8);
  CHECK(exp_svf_trajectory(v, FlowTime::full, Direction::forward, 7).back() ==
        exp_svf(v, FlowTime::full, Direction::forward, 7));
}

TEST_CASE("full transforms") {
  const Dims d{10, 6, 6};
  const VelocityField zero(d);
  const FullTransforms id = full_transforms(zero, zero);
  for (const auto* f : {&id.xy_half, &id.yx_half, &id.xy_full, &id.yx_full})
    CHECK(*f == identity_field(d));

  VelocityField v(d);
  for (double& x : v.component(0)) x = 2.0;
  const FullTransforms t = full_transforms(v, zero);
  const auto want_xy = oracle::compose_pointwise(exp_svf(zero, FlowTime::half, Direction::inverse), t.xy_half);
  const auto want_yx = oracle::compose_pointwise(exp_svf(v, FlowTime::half, Direction::inverse), t.yx_half);
  CHECK(oracle::mean_difference(t.xy_full, want_xy) < 1e-12);
  CHECK(oracle::mean_difference(t.yx_full, want_yx) < 1e-12);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 2; x < d.nx - 2; ++x) {
        const std::size_t i = d.index(x, y, z);
        REQUIRE(t.xy_half(0, i) == doctest::Approx(1.0));
        REQUIRE(t.xy_full(0, i) == doctest::Approx(1.0));
        REQUIRE(t.yx_full(0, i) == doctest::Approx(-1.0));
      }
}

TEST_CASE("full transforms of a smooth pair are inverse consistent") {
  const Dims d{16, 16, 16};
  const VelocityField a = oracle::smooth_velocity(d, 41, 2.0, 2.5);
  const VelocityField b = oracle::smooth_velocity(d, 42, 2.0, 2.5);
  const FullTransforms t = full_transforms(a, b);
  CHECK(mean_displacement(compose(t.xy_full, t.yx_full)) < 2 * kFlowTolerance);
}
