#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "symreg/eval.hpp"
#include "symreg/io.hpp"
#include "symreg/registrar.hpp"
#include "symreg/warp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace symreg;

namespace {

struct RegisterArgs {
  std::string fixed, moving, out;
  std::string preset = "direct";
  std::optional<double> lambda1, lambda2, lambda3, step_size, momentum, c;
  std::optional<int> iters, squarings;
  std::optional<std::uint64_t> seed;
  bool halve = false;
};

json fold_json(const FoldReport& r) {
  return {{"total", r.total},
          {"non_positive", r.non_positive},
          {"min_det", r.min_det},
          {"fraction", r.fraction}};
}

json loss_json(const LossBreakdown& b) {
  return {{"l_mean", b.l_mean}, {"l_pair", b.l_pair}, {"l_jdet", b.l_jdet},
          {"l_reg", b.l_reg},   {"l_mag", b.l_mag},   {"total", b.total}};
}

void write_json(const json& j, const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  out << j.dump(2) << '\n';
}

Dims parse_dims(const std::string& s) {
  Dims d;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> d.nx >> c1 >> d.ny >> c2 >> d.nz) || c1 != ',' || c2 != ',' || !in.eof() || !d.valid())
    throw std::invalid_argument("--dims expects NX,NY,NZ with positive entries, got '" + s + "'");
  return d;
}

int run_register(const RegisterArgs& a) {
  RegistrationConfig cfg = a.preset == "paper" ? RegistrationConfig::paper() : RegistrationConfig::direct();
  if (a.lambda1) cfg.weights.lambda_jdet = *a.lambda1;
  if (a.lambda2) cfg.weights.lambda_reg = *a.lambda2;
  if (a.lambda3) cfg.weights.lambda_mag = *a.lambda3;
  if (a.step_size) cfg.step_size = *a.step_size;
  if (a.momentum) cfg.momentum = *a.momentum;
  if (a.c) cfg.c = *a.c;
  if (a.iters) cfg.max_iters = *a.iters;
  if (a.squarings) cfg.steps = *a.squarings;
  if (a.seed) cfg.seed = *a.seed;
  cfg.halve_on_increase = a.halve;
  cfg.validate();

  const Volume x = load_volume(a.fixed);
  const Volume y = load_volume(a.moving);
  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream log(out / "loss_log.jsonl");
  if (!log) throw std::runtime_error("cannot open " + (out / "loss_log.jsonl").string());
  const RegistrationResult r =
      register_pair(x, y, cfg, [&](int it, const LossBreakdown& b) { log << to_json_line(b, it) << '\n'; });

  save_field(r.fields.xy_half, out / "phi_xy_half.json");
  save_field(r.fields.yx_half, out / "phi_yx_half.json");
  save_field(r.fields.xy_full, out / "phi_xy_full.json");
  save_field(r.fields.yx_full, out / "phi_yx_full.json");
  save_field(r.v_xy, out / "v_xy.json");
  save_field(r.v_yx, out / "v_yx.json");

  json summary;
  summary["preset"] = a.preset;
  summary["config"] = {{"T", cfg.steps},
                       {"c", cfg.c},
                       {"lambda1", cfg.weights.lambda_jdet},
                       {"lambda2", cfg.weights.lambda_reg},
                       {"lambda3", cfg.weights.lambda_mag},
                       {"step_size", cfg.step_size},
                       {"momentum", cfg.momentum},
                       {"max_iters", cfg.max_iters},
                       {"halve_on_increase", cfg.halve_on_increase},
                       {"seed", cfg.seed}};
  summary["iterations"] = r.iterations;
  summary["converged"] = r.converged;
  summary["initial_loss"] = loss_json(r.history.front());
  summary["final_loss"] = loss_json(r.history.back());
  summary["folds"] = {{"xy_half", fold_json(r.folds_xy_half)},
                      {"yx_half", fold_json(r.folds_yx_half)},
                      {"xy_full", fold_json(r.folds_xy_full)},
                      {"yx_full", fold_json(r.folds_yx_full)}};
  summary["mean_displacement"] = {{"xy_full", mean_displacement(r.fields.xy_full)},
                                  {"yx_full", mean_displacement(r.fields.yx_full)}};
  summary["inverse_consistency"] = mean_displacement(compose(r.fields.xy_full, r.fields.yx_full));
  summary["runtime_seconds"] = r.runtime_seconds;
  summary["seconds_per_iteration"] = r.runtime_seconds / r.iterations;
  write_json(summary, out / "summary.json");
  std::cout << "registered in " << r.iterations << " iterations (" << r.runtime_seconds
            << " s), final total " << r.history.back().total << '\n';
  return 0;
}

DeformationField load_deformation(const std::string& path) {
  VectorField v = load_field(path);
  return DeformationField(v.dims(), std::vector<double>(v.data().begin(), v.data().end()));
}

int run_warp(const std::string& image, const std::string& field, const std::string& out, bool labels) {
  const DeformationField f = load_deformation(field);
  if (labels || peek_dtype(image) == "u16") {
    save_labels(warp_labels(load_labels(image), f), out);
  } else {
    save_volume(warp_image(load_volume(image), f), out);
  }
  return 0;
}

int run_jacobian(const std::string& field, const std::string& out) {
  const FoldReport r = fold_report(load_deformation(field));
  write_json(fold_json(r), out);
  return 0;
}

int run_dice(const std::string& a, const std::string& b, const std::string& out) {
  const DiceReport r = dice(load_labels(a), load_labels(b));
  json labels = json::array();
  for (const auto& l : r.labels)
    labels.push_back({{"label", l.label}, {"present", l.present}, {"score", l.score}});
  write_json({{"mean", r.mean}, {"scored", r.scored}, {"labels", labels}}, out);
  return 0;
}

int run_synth(std::uint64_t seed, const std::string& dims, double amplitude, double smoothness,
              const std::string& shift, const std::string& out) {
  const Dims d = parse_dims(dims);
  SynthPair p;
  if (!shift.empty()) {
    Point3 t{};
    char c1 = 0, c2 = 0;
    std::istringstream in(shift);
    if (!(in >> t[0] >> c1 >> t[1] >> c2 >> t[2]) || c1 != ',' || c2 != ',')
      throw std::invalid_argument("--shift expects DX,DY,DZ, got '" + shift + "'");
    p = synth_translation_pair(seed, d, t);
  } else {
    p = synth_pair(seed, d, smoothness, amplitude);
  }
  const fs::path dir(out);
  fs::create_directories(dir);
  save_volume(p.x, dir / "x.json");
  save_volume(p.y, dir / "y.json");
  save_labels(p.labels_x, dir / "labels_x.json");
  save_labels(p.labels_y, dir / "labels_y.json");
  save_field(p.v_true, dir / "v_true.json");
  save_field(p.phi_true, dir / "phi_true.json");
  return 0;
}

int run_export_slice(const std::string& volume, const std::string& axis, int index, const std::string& out) {
  SliceAxis a;
  if (axis == "x") {
    a = SliceAxis::x;
  } else if (axis == "y") {
    a = SliceAxis::y;
  } else if (axis == "z") {
    a = SliceAxis::z;
  } else {
    throw std::invalid_argument("--axis must be x, y or z");
  }
  write_pgm(extract_slice(load_volume(volume), a, index), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric diffeomorphic registration with stationary velocity fields"};
  app.require_subcommand(1);

  RegisterArgs ra;
  auto* reg = app.add_subcommand("register", "Register two volumes symmetrically");
  reg->add_option("--fixed", ra.fixed, "First volume (X)")->required();
  reg->add_option("--moving", ra.moving, "Second volume (Y)")->required();
  reg->add_option("--out", ra.out, "Output directory")->required();
  reg->add_option("--preset", ra.preset, "Optimizer preset")->check(CLI::IsMember({"paper", "direct"}));
  reg->add_option("--lambda1", ra.lambda1, "Weight of the Jacobian penalty");
  reg->add_option("--lambda2", ra.lambda2, "Weight of the smoothness penalty");
  reg->add_option("--lambda3", ra.lambda3, "Weight of the magnitude penalty");
  reg->add_option("--steps", ra.iters, "Maximum optimizer iterations");
  reg->add_option("--step-size", ra.step_size, "Optimizer step size");
  reg->add_option("--momentum", ra.momentum, "Optimizer momentum");
  reg->add_option("--T", ra.squarings, "Scaling-and-squaring steps");
  reg->add_option("--c", ra.c, "Velocity bound of the softsign reparameterization");
  reg->add_option("--seed", ra.seed, "Seed recorded in the summary");
  reg->add_flag("--halve-on-increase", ra.halve, "Halve the step after any loss increase");

  std::string image, field, wout;
  bool labels = false;
  auto* warp = app.add_subcommand("warp", "Warp a volume or label map with a deformation field");
  warp->add_option("--image", image)->required();
  warp->add_option("--field", field)->required();
  warp->add_option("--out", wout)->required();
  warp->add_flag("--labels", labels, "Nearest-neighbour label warping");

  std::string jfield, jout;
  auto* jac = app.add_subcommand("jacobian", "Fold report of a deformation field");
  jac->add_option("--field", jfield)->required();
  jac->add_option("--out", jout)->required();

  std::string da, db, dout;
  auto* dic = app.add_subcommand("dice", "Per-label Dice overlap of two label maps");
  dic->add_option("--a", da)->required();
  dic->add_option("--b", db)->required();
  dic->add_option("--out", dout)->required();

  std::uint64_t sseed = 0;
  std::string sdims, sshift, sout;
  double amplitude = 3.0;
  double smoothness = 3.0;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic pair with ground truth");
  syn->add_option("--seed", sseed)->required();
  syn->add_option("--dims", sdims, "NX,NY,NZ")->required();
  syn->add_option("--amplitude", amplitude, "Maximum velocity norm in voxels");
  syn->add_option("--smoothness", smoothness, "Gaussian sigma of the velocity noise");
  syn->add_option("--shift", sshift, "DX,DY,DZ: pure translation pair instead of a smooth warp");
  syn->add_option("--out", sout)->required();

  std::string evol, eaxis = "z", eout;
  int eindex = 0;
  auto* slice = app.add_subcommand("export-slice", "Write one slice of a volume as an 8-bit PGM");
  slice->add_option("--volume", evol)->required();
  slice->add_option("--axis", eaxis);
  slice->add_option("--index", eindex)->required();
  slice->add_option("--out", eout)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "symreg: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*reg) return run_register(ra);
    if (*warp) return run_warp(image, field, wout, labels);
    if (*jac) return run_jacobian(jfield, jout);
    if (*dic) return run_dice(da, db, dout);
    if (*syn) return run_synth(sseed, sdims, amplitude, smoothness, sshift, sout);
    if (*slice) return run_export_slice(evol, eaxis, eindex, eout);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "symreg: error: " << msg << '\n';
    return 1;
  }
  return 1;
}
