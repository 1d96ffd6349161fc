#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "symreg/eval.hpp"
#include "symreg/grad.hpp"
#include "symreg/io.hpp"
#include "symreg/registrar.hpp"
#include "symreg/warp.hpp"

namespace py = pybind11;
using namespace symreg;

namespace {

// Arrays are indexed [z, y, x] (C order), which is the x-fastest storage order.
// Vector fields carry a leading component axis: [c, z, y, x].
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U16 = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

Dims dims_of(const py::buffer_info& b, int lead) {
  if (b.ndim != 3 + lead)
    throw std::invalid_argument("expected a " + std::to_string(3 + lead) + "-d array, got " +
                                std::to_string(b.ndim) + "-d");
  if (lead == 1 && b.shape[0] != 3) throw std::invalid_argument("vector fields need 3 components");
  return {static_cast<int>(b.shape[lead + 2]), static_cast<int>(b.shape[lead + 1]),
          static_cast<int>(b.shape[lead])};
}

Volume to_volume(const F64& a) {
  const auto b = a.request();
  const double* p = static_cast<const double*>(b.ptr);
  const Dims d = dims_of(b, 0);
  return Volume(d, std::vector<double>(p, p + d.count()));
}

LabelMap to_labels(const U16& a) {
  const auto b = a.request();
  const auto* p = static_cast<const std::uint16_t*>(b.ptr);
  const Dims d = dims_of(b, 0);
  return LabelMap(d, std::vector<std::uint16_t>(p, p + d.count()));
}

template <typename Field>
Field to_field(const F64& a) {
  const auto b = a.request();
  const double* p = static_cast<const double*>(b.ptr);
  const Dims d = dims_of(b, 1);
  return Field(d, std::vector<double>(p, p + 3 * d.count()));
}

template <typename T>
py::array_t<T> from_grid(const Grid<T>& g) {
  const Dims& d = g.dims();
  py::array_t<T> out({d.nz, d.ny, d.nx});
  std::copy(g.data().begin(), g.data().end(), out.mutable_data());
  return out;
}

F64 from_field(const VectorField& f) {
  const Dims& d = f.dims();
  F64 out({3, d.nz, d.ny, d.nx});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

py::dict loss_dict(const LossBreakdown& b) {
  py::dict out;
  out["l_mean"] = b.l_mean;
  out["l_pair"] = b.l_pair;
  out["l_jdet"] = b.l_jdet;
  out["l_reg"] = b.l_reg;
  out["l_mag"] = b.l_mag;
  out["total"] = b.total;
  return out;
}

py::dict fold_dict(const FoldReport& r) {
  py::dict out;
  out["total"] = r.total;
  out["non_positive"] = r.non_positive;
  out["min_det"] = r.min_det;
  out["fraction"] = r.fraction;
  return out;
}

py::dict transforms_dict(const FullTransforms& t) {
  py::dict out;
  out["xy_half"] = from_field(t.xy_half);
  out["yx_half"] = from_field(t.yx_half);
  out["xy_full"] = from_field(t.xy_full);
  out["yx_full"] = from_field(t.yx_full);
  return out;
}

LossWeights make_weights(double l1, double l2, double l3) {
  LossWeights w;
  w.lambda_jdet = l1;
  w.lambda_reg = l2;
  w.lambda_mag = l3;
  return w;
}

FlowTime flow_time(double t) {
  if (t == 0.5) return FlowTime::half;
  if (t == 1.0) return FlowTime::full;
  throw std::invalid_argument("t must be 0.5 or 1.0");
}

Direction direction(int sign) {
  if (sign == 1) return Direction::forward;
  if (sign == -1) return Direction::inverse;
  throw std::invalid_argument("sign must be +1 or -1");
}

}  // namespace

PYBIND11_MODULE(symreg, m) {
  m.doc() = "Symmetric diffeomorphic registration of 3D volumes with stationary velocity fields.";

  py::register_exception<NonFiniteGradient>(m, "NonFiniteGradient", PyExc_ArithmeticError);
  py::register_exception<RegistrationError>(m, "RegistrationError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("sample_trilinear",
        [](const F64& vol, double x, double y, double z) { return sample_trilinear(to_volume(vol), {x, y, z}); },
        py::arg("vol"), py::arg("x"), py::arg("y"), py::arg("z"));
  m.def("local_mean", [](const F64& vol, int w) { return from_grid(local_mean(to_volume(vol), w)); },
        py::arg("vol"), py::arg("w"));

  m.def("softsign_normalize",
        [](const F64& raw, double c) { return from_field(softsign_normalize(to_field<VelocityField>(raw), c)); },
        py::arg("raw"), py::arg("c") = kDefaultVelocityBound);
  m.def("compose",
        [](const F64& a, const F64& b) {
          return from_field(compose(to_field<DeformationField>(a), to_field<DeformationField>(b)));
        },
        py::arg("a"), py::arg("b"), "Displacement of a(b(x)).");
  m.def("exp_svf",
        [](const F64& v, double t, int sign, int steps) {
          return from_field(exp_svf(to_field<VelocityField>(v), flow_time(t), direction(sign), steps));
        },
        py::arg("v"), py::arg("t") = 1.0, py::arg("sign") = 1, py::arg("steps") = kDefaultSquaringSteps);
  m.def("full_transforms",
        [](const F64& v_xy, const F64& v_yx, int steps) {
          return transforms_dict(full_transforms(to_field<VelocityField>(v_xy), to_field<VelocityField>(v_yx), steps));
        },
        py::arg("v_xy"), py::arg("v_yx"), py::arg("steps") = kDefaultSquaringSteps);

  m.def("warp_image",
        [](const F64& vol, const F64& d) { return from_grid(warp_image(to_volume(vol), to_field<DeformationField>(d))); },
        py::arg("vol"), py::arg("field"));
  m.def("warp_labels",
        [](const U16& lm, const F64& d) { return from_grid(warp_labels(to_labels(lm), to_field<DeformationField>(d))); },
        py::arg("labels"), py::arg("field"));

  m.def("ncc", [](const F64& a, const F64& b, int w, double eps) { return ncc(to_volume(a), to_volume(b), w, eps); },
        py::arg("a"), py::arg("b"), py::arg("w") = 7, py::arg("eps") = 1e-5);
  m.def("jacobian_det_field",
        [](const F64& d) { return from_grid(jacobian_det_field(to_field<DeformationField>(d))); }, py::arg("field"));
  m.def("total_loss",
        [](const F64& x, const F64& y, const F64& v_xy, const F64& v_yx, double l1, double l2, double l3, int steps) {
          return loss_dict(total_loss(to_volume(x), to_volume(y), to_field<VelocityField>(v_xy),
                                      to_field<VelocityField>(v_yx), make_weights(l1, l2, l3), steps));
        },
        py::arg("x"), py::arg("y"), py::arg("v_xy"), py::arg("v_yx"), py::arg("lambda1") = 1000.0,
        py::arg("lambda2") = 3.0, py::arg("lambda3") = 0.1, py::arg("steps") = kDefaultSquaringSteps);
  m.def("grad_total_loss",
        [](const F64& x, const F64& y, const F64& raw_xy, const F64& raw_yx, double l1, double l2, double l3,
           int steps, double c) {
          const ParameterPair raw{to_field<VelocityField>(raw_xy), to_field<VelocityField>(raw_yx)};
          const LossAndGradient lg =
              grad_total_loss(to_volume(x), to_volume(y), raw, make_weights(l1, l2, l3), steps, c);
          return py::make_tuple(loss_dict(lg.loss), from_field(lg.grad.g_xy), from_field(lg.grad.g_yx));
        },
        py::arg("x"), py::arg("y"), py::arg("raw_xy"), py::arg("raw_yx"), py::arg("lambda1") = 1000.0,
        py::arg("lambda2") = 3.0, py::arg("lambda3") = 0.1, py::arg("steps") = kDefaultSquaringSteps,
        py::arg("c") = kDefaultVelocityBound,
        "Loss breakdown and gradients with respect to the raw (pre-softsign) velocity parameters.");

  m.def("register",
        [](const F64& x, const F64& y, const std::string& preset, double step_size, double momentum, int max_iters,
           double l1, double l2, double l3, int steps, double c, bool halve_on_increase, std::uint64_t seed) {
          RegistrationConfig cfg = preset == "paper" ? RegistrationConfig::paper() : RegistrationConfig::direct();
          if (preset != "paper" && preset != "direct") throw std::invalid_argument("preset must be paper or direct");
          if (step_size > 0.0) cfg.step_size = step_size;
          cfg.momentum = momentum;
          cfg.max_iters = max_iters;
          cfg.weights = make_weights(l1, l2, l3);
          cfg.steps = steps;
          cfg.c = c;
          cfg.halve_on_increase = halve_on_increase;
          cfg.seed = seed;
          const Volume vx = to_volume(x);
          const Volume vy = to_volume(y);
          RegistrationResult r;
          {
            py::gil_scoped_release release;
            r = register_pair(vx, vy, cfg);
          }
          py::list history;
          for (const auto& b : r.history) history.append(loss_dict(b));
          py::dict out = transforms_dict(r.fields);
          out["v_xy"] = from_field(r.v_xy);
          out["v_yx"] = from_field(r.v_yx);
          out["history"] = history;
          out["iterations"] = r.iterations;
          out["converged"] = r.converged;
          out["runtime_seconds"] = r.runtime_seconds;
          py::dict folds;
          folds["xy_half"] = fold_dict(r.folds_xy_half);
          folds["yx_half"] = fold_dict(r.folds_yx_half);
          folds["xy_full"] = fold_dict(r.folds_xy_full);
          folds["yx_full"] = fold_dict(r.folds_yx_full);
          out["folds"] = folds;
          return out;
        },
        py::arg("x"), py::arg("y"), py::arg("preset") = "direct", py::arg("step_size") = 0.0,
        py::arg("momentum") = 0.9, py::arg("max_iters") = 300, py::arg("lambda1") = 1000.0,
        py::arg("lambda2") = 3.0, py::arg("lambda3") = 0.1, py::arg("steps") = kDefaultSquaringSteps,
        py::arg("c") = kDefaultVelocityBound, py::arg("halve_on_increase") = false, py::arg("seed") = 0,
        "Symmetric registration from zero velocities. step_size <= 0 keeps the preset's value.");

  m.def("dice",
        [](const U16& a, const U16& b, std::vector<std::uint16_t> labels) {
          const DiceReport r = dice(to_labels(a), to_labels(b), std::move(labels));
          py::dict scores;
          for (const auto& l : r.labels)
            if (l.present) scores[py::int_(l.label)] = l.score;
          py::dict out;
          out["mean"] = r.mean;
          out["scores"] = scores;
          return out;
        },
        py::arg("a"), py::arg("b"), py::arg("labels") = std::vector<std::uint16_t>{});
  m.def("fold_report", [](const F64& d) { return fold_dict(fold_report(to_field<DeformationField>(d))); },
        py::arg("field"));
  m.def("synth_pair",
        [](std::uint64_t seed, std::array<int, 3> shape, double smoothness, double amplitude) {
          const SynthPair p = synth_pair(seed, {shape[2], shape[1], shape[0]}, smoothness, amplitude);
          py::dict out;
          out["x"] = from_grid(p.x);
          out["y"] = from_grid(p.y);
          out["v_true"] = from_field(p.v_true);
          out["phi_true"] = from_field(p.phi_true);
          out["labels_x"] = from_grid(p.labels_x);
          out["labels_y"] = from_grid(p.labels_y);
          return out;
        },
        py::arg("seed"), py::arg("shape"), py::arg("smoothness") = 3.0, py::arg("amplitude") = 3.0,
        "shape is (nz, ny, nx).");

  m.def("load_volume", [](const std::string& p) { return from_grid(load_volume(p)); }, py::arg("path"));
  m.def("save_volume", [](const F64& v, const std::string& p) { save_volume(to_volume(v), p); }, py::arg("vol"),
        py::arg("path"));
  m.def("load_field", [](const std::string& p) { return from_field(load_field(p)); }, py::arg("path"));
}
