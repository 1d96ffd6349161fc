#include "doctest.h"
#include "oracles.hpp"

#include <filesystem>

#include "symreg/eval.hpp"

using namespace symreg;

TEST_CASE("dice examples") {
  const Dims d{4, 4, 4};
  LabelMap a(d);
  LabelMap b(d);
  // 2x2x2 cube of label 1, copy shifted by one voxel along x: 4 voxels overlap.
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        a.at(x, y, z) = 1;
        b.at(x + 1, y, z) = 1;
      }
  a.at(3, 3, 3) = 2;
  b.at(0, 3, 3) = 2;
  const DiceReport r = dice(a, b);
  REQUIRE(r.labels.size() == 2);
  CHECK(r.labels[0].label == 1);
  CHECK(r.labels[0].score == doctest::Approx(0.5));
  CHECK(r.labels[1].score == 0.0);
  CHECK(r.mean == doctest::Approx(0.25));

  const DiceReport same = dice(a, a);
  for (const auto& l : same.labels) CHECK(l.score == 1.0);
  CHECK(same.mean == 1.0);

  const DiceReport absent = dice(a, b, {1, 7});
  CHECK(absent.scored == 1);
  CHECK_FALSE(absent.labels[1].present);
  CHECK(absent.mean == doctest::Approx(0.5));
  CHECK_THROWS(dice(a, LabelMap({4, 4, 5})));
}

TEST_CASE("dice is symmetric and bounded") {
  const SynthPair p = synth_pair(2, {16, 16, 16}, 2.0, 3.0);
  const DiceReport ab = dice(p.labels_x, p.labels_y);
  const DiceReport ba = dice(p.labels_y, p.labels_x);
  REQUIRE(ab.labels.size() == ba.labels.size());
  for (std::size_t i = 0; i < ab.labels.size(); ++i) {
    CHECK(ab.labels[i].score == ba.labels[i].score);
    CHECK(ab.labels[i].score >= 0.0);
    CHECK(ab.labels[i].score <= 1.0);
  }
}

TEST_CASE("fold report") {
  const Dims d{5, 5, 5};
  const FoldReport id = fold_report(identity_field(d));
  CHECK(id.non_positive == 0);
  CHECK(id.min_det == 1.0);
  CHECK(id.total == 125);

  DeformationField s(d);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        s(0, i) = x;
        s(1, i) = y;
        s(2, i) = z;
      }
  const FoldReport sc = fold_report(s);
  CHECK(sc.non_positive == 0);
  CHECK(sc.min_det == doctest::Approx(8.0));

  // Columns 2 and 3 swap; the central stencils at both see det -0.5.
  DeformationField f({6, 3, 3});
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 3; ++y) {
      f(0, f.dims().index(2, y, z)) = 3.0;
      f(0, f.dims().index(3, y, z)) = -3.0;
    }
  const FoldReport fr = fold_report(f);
  CHECK(fr.non_positive == 18);
  CHECK(fr.min_det == doctest::Approx(-0.5));
  CHECK(fr.fraction == doctest::Approx(18.0 / 54.0));

  const auto rnd = oracle::smooth_random_field<DeformationField>({7, 7, 7}, 3, 3.0, 0.7);
  std::size_t naive = 0;
  for (const Volume det = jacobian_det_field(rnd); double v : det.data()) naive += v <= 0.0;
  CHECK(fold_report(rnd).non_positive == naive);
  CHECK(naive > 0);
}

TEST_CASE("synthetic pairs") {
  const Dims d{12, 10, 8};
  const SynthPair a = synth_pair(9, d, 2.0, 2.0);
  const SynthPair b = synth_pair(9, d, 2.0, 2.0);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.v_true == b.v_true);
  CHECK(a.labels_y == b.labels_y);
  CHECK_FALSE(synth_pair(10, d, 2.0, 2.0).x == a.x);

  double vmax = 0.0;
  for (std::size_t i = 0; i < d.count(); ++i)
    vmax = std::max(vmax, std::hypot(a.v_true(0, i), a.v_true(1, i), a.v_true(2, i)));
  CHECK(vmax == doctest::Approx(2.0));

  const SynthPair z = synth_pair(9, d, 2.0, 0.0);
  CHECK(z.y == z.x);
  CHECK(z.labels_y == z.labels_x);
  for (double v : z.v_true.data()) CHECK(v == 0.0);

  CHECK_THROWS(synth_pair(1, d, 0.0, 1.0));
  CHECK_THROWS(synth_pair(1, d, 1.0, -1.0));
}

TEST_CASE("smooth synthetic warps are diffeomorphic") {
  const SynthPair p = synth_pair(0, {32, 32, 32}, 3.0, 3.0);
  CHECK(fold_report(p.phi_true).non_positive == 0);
  CHECK(fold_report(exp_svf(p.v_true, FlowTime::full, Direction::forward)).non_positive == 0);
}

TEST_CASE("translation pair") {
  const SynthPair p = synth_translation_pair(4, {10, 10, 10}, {2.0, 0.0, 0.0});
  for (int z = 0; z < 10; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 8; ++x) REQUIRE(p.y.at(x, y, z) == doctest::Approx(p.x.at(x + 2, y, z)));
  for (double v : p.phi_true.component(0)) CHECK(v == 2.0);
}

TEST_CASE("slice export on a ramp") {
  const Dims d{5, 4, 6};
  Volume ramp(d);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) ramp.at(x, y, z) = 10.0 * x + 3.0 * y + 0.5 * z;
  const int k = d.nz / 2;
  const GrayImage img = extract_slice(ramp, SliceAxis::z, k);
  CHECK(img.width == d.nx);
  CHECK(img.height == d.ny);
  const double lo = ramp.at(0, 0, k);
  const double hi = ramp.at(d.nx - 1, d.ny - 1, k);
  for (int j = 0; j < d.ny; ++j)
    for (int i = 0; i < d.nx; ++i) {
      const double t = (ramp.at(i, j, k) - lo) / (hi - lo);
      REQUIRE(img.pixels[j * img.width + i] == static_cast<int>(std::lround(255 * t)));
    }
  const auto path = std::filesystem::temp_directory_path() / "symreg_ramp.pgm";
  write_pgm(img, path);
  const GrayImage back = read_pgm(path);
  CHECK(back.width == img.width);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS_AS(extract_slice(ramp, SliceAxis::z, d.nz), std::out_of_range);

  const GrayImage flat = extract_slice(Volume(d, 2.0), SliceAxis::x, 0);
  for (auto v : flat.pixels) CHECK(v == 0);
}
