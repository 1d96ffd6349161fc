#include "symreg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "symreg/loss.hpp"
#include "symreg/warp.hpp"

namespace symreg {

DiceReport dice(const LabelMap& a, const LabelMap& b, std::vector<std::uint16_t> labels) {
  require_same_dims(a.dims(), b.dims(), "dice");
  if (labels.empty()) {
    std::set<std::uint16_t> seen;
    for (auto v : a.data())
      if (v != 0) seen.insert(v);
    for (auto v : b.data())
      if (v != 0) seen.insert(v);
    labels.assign(seen.begin(), seen.end());
  }
  std::map<std::uint16_t, std::array<std::size_t, 3>> counts;  // |A|, |B|, |A∩B|
  for (auto l : labels) counts[l] = {0, 0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto ia = counts.find(a[i]);
    if (ia != counts.end()) {
      ++ia->second[0];
      if (b[i] == a[i]) ++ia->second[2];
    }
    auto ib = counts.find(b[i]);
    if (ib != counts.end()) ++ib->second[1];
  }

  DiceReport rep;
  double sum = 0.0;
  for (auto l : labels) {
    const auto& c = counts[l];
    LabelDice ld{l, c[0] + c[1] > 0, 0.0};
    if (ld.present) {
      ld.score = 2.0 * static_cast<double>(c[2]) / static_cast<double>(c[0] + c[1]);
      sum += ld.score;
      ++rep.scored;
    }
    rep.labels.push_back(ld);
  }
  rep.mean = rep.scored > 0 ? sum / static_cast<double>(rep.scored) : 0.0;
  return rep;
}

FoldReport fold_report(const DeformationField& d) {
  const Volume det = jacobian_det_field(d);
  FoldReport rep;
  rep.total = det.size();
  rep.min_det = std::numeric_limits<double>::infinity();
  for (double v : det.data()) {
    if (v <= 0.0) ++rep.non_positive;
    rep.min_det = std::min(rep.min_det, v);
  }
  rep.fraction = static_cast<double>(rep.non_positive) / static_cast<double>(rep.total);
  return rep;
}

std::vector<double> gaussian_smooth(std::span<const double> in, const Dims& dims, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("smoothing sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    norm += kernel[k + radius];
  }
  for (double& k : kernel) k /= norm;

  std::vector<double> cur(in.begin(), in.end());
  std::vector<double> next(cur.size());
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x) {
          const int pos[3] = {x, y, z};
          double s = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            int q[3] = {x, y, z};
            q[axis] = std::clamp(pos[axis] + k, 0, n - 1);
            s += kernel[k + radius] * cur[dims.index(q[0], q[1], q[2])];
          }
          next[dims.index(x, y, z)] = s;
        }
    std::swap(cur, next);
  }
  return cur;
}

namespace {

struct Blob {
  Point3 centre;
  Point3 radius;
  double amplitude;
};

std::vector<Blob> make_blobs(std::mt19937_64& rng, const Dims& dims) {
  std::vector<Blob> blobs;
  // Enough blobs to texture every NCC window of a 32^3 grid.
  const int count = std::max(10, static_cast<int>(dims.count() / 400));
  for (int k = 0; k < count; ++k) {
    Blob b{};
    for (int a = 0; a < 3; ++a) {
      const double n = dims[a];
      b.centre[a] = std::uniform_real_distribution<double>(-0.5, n - 0.5)(rng);
      b.radius[a] = std::uniform_real_distribution<double>(std::max(1.0, n / 14.0),
                                                           std::max(1.5, n / 7.0))(rng);
    }
    b.amplitude = std::uniform_real_distribution<double>(0.4, 1.0)(rng);
    blobs.push_back(b);
  }
  return blobs;
}

double blob_value(const Blob& b, const Point3& p) {
  double r2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = (p[a] - b.centre[a]) / b.radius[a];
    r2 += t * t;
  }
  return b.amplitude * std::exp(-0.5 * r2);
}

// Intensity and label of the blob image at a continuous point. A voxel takes the
// label of its strongest blob when inside that blob's unit ellipsoid.
std::pair<double, std::uint16_t> render(const std::vector<Blob>& blobs, const Point3& p) {
  double v = 0.0;
  double best = 0.0;
  std::uint16_t label = 0;
  for (std::size_t k = 0; k < blobs.size(); ++k) {
    const double bv = blob_value(blobs[k], p);
    v += bv;
    if (bv > best && bv > blobs[k].amplitude * std::exp(-0.5)) {
      best = bv;
      label = static_cast<std::uint16_t>(k % 6 + 1);
    }
  }
  return {v, label};
}

void render_into(const std::vector<Blob>& blobs, const Point3& shift, Volume& img, LabelMap& lab) {
  const Dims& d = img.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto [v, l] = render(blobs, {x + shift[0], y + shift[1], z + shift[2]});
        img.at(x, y, z) = v;
        lab.at(x, y, z) = l;
      }
}

}  // namespace

SynthPair synth_pair(std::uint64_t seed, const Dims& dims, double smoothness, double amplitude,
                     int steps) {
  if (amplitude < 0.0) throw std::invalid_argument("amplitude must be non-negative");
  if (!(smoothness > 0.0)) throw std::invalid_argument("smoothness must be positive");
  std::mt19937_64 rng(seed);
  const std::vector<Blob> blobs = make_blobs(rng, dims);

  SynthPair out;
  out.x = Volume(dims);
  out.labels_x = LabelMap(dims);
  render_into(blobs, {0.0, 0.0, 0.0}, out.x, out.labels_x);

  // Noise is drawn on a grid padded by the kernel radius and cropped after
  // smoothing, so border voxels are not dominated by replicated samples.
  out.v_true = VelocityField(dims);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int pad = static_cast<int>(std::ceil(3.0 * smoothness));
  const Dims padded{dims.nx + 2 * pad, dims.ny + 2 * pad, dims.nz + 2 * pad};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> white(padded.count());
    for (double& w : white) w = noise(rng);
    const std::vector<double> smooth = gaussian_smooth(white, padded, smoothness);
    auto vc = out.v_true.component(c);
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x)
          vc[dims.index(x, y, z)] = smooth[padded.index(x + pad, y + pad, z + pad)];
  }
  double vmax = 0.0;
  for (std::size_t i = 0; i < dims.count(); ++i)
    vmax = std::max(vmax, std::hypot(out.v_true(0, i), out.v_true(1, i), out.v_true(2, i)));
  const double scale = (amplitude == 0.0 || vmax == 0.0) ? 0.0 : amplitude / vmax;
  for (double& v : out.v_true.data()) v *= scale;

  out.phi_true = exp_svf(out.v_true, FlowTime::full, Direction::forward, steps);
  out.y = warp_image(out.x, out.phi_true);
  out.labels_y = warp_labels(out.labels_x, out.phi_true);
  return out;
}

SynthPair synth_translation_pair(std::uint64_t seed, const Dims& dims, const Point3& shift) {
  std::mt19937_64 rng(seed);
  const std::vector<Blob> blobs = make_blobs(rng, dims);
  SynthPair out;
  out.x = Volume(dims);
  out.y = Volume(dims);
  out.labels_x = LabelMap(dims);
  out.labels_y = LabelMap(dims);
  render_into(blobs, {0.0, 0.0, 0.0}, out.x, out.labels_x);
  render_into(blobs, shift, out.y, out.labels_y);
  out.v_true = VelocityField(dims);
  out.phi_true = DeformationField(dims);
  for (int c = 0; c < 3; ++c) {
    std::fill(out.v_true.component(c).begin(), out.v_true.component(c).end(), shift[c]);
    std::fill(out.phi_true.component(c).begin(), out.phi_true.component(c).end(), shift[c]);
  }
  return out;
}

GrayImage extract_slice(const Volume& vol, SliceAxis axis, int index) {
  const Dims& d = vol.dims();
  const int a = static_cast<int>(axis);
  if (index < 0 || index >= d[a])
    throw std::out_of_range("slice index " + std::to_string(index) + " outside axis extent " +
                            std::to_string(d[a]));
  // (column axis, row axis) of the slice plane.
  const int col = a == 0 ? 1 : 0;
  const int row = a == 2 ? 1 : 2;
  GrayImage img;
  img.width = d[col];
  img.height = d[row];
  std::vector<double> vals(static_cast<std::size_t>(img.width) * img.height);
  for (int j = 0; j < img.height; ++j)
    for (int i = 0; i < img.width; ++i) {
      int q[3];
      q[a] = index;
      q[col] = i;
      q[row] = j;
      vals[static_cast<std::size_t>(j) * img.width + i] = vol.at(q[0], q[1], q[2]);
    }
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double vmin = *lo;
  const double range = *hi - *lo;
  img.pixels.resize(vals.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const double t = range > 0.0 ? (vals[k] - vmin) / range : 0.0;
    img.pixels[k] = static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
  return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  GrayImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || img.width <= 0 || img.height <= 0)
    throw std::runtime_error("unsupported PGM " + path.string());
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error("truncated PGM " + path.string());
  return img;
}

}  // namespace symreg
