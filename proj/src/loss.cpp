#include "symreg/loss.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "symreg/warp.hpp"

namespace symreg {

void LossWeights::validate() const {
  if (lambda_jdet < 0.0 || lambda_reg < 0.0 || lambda_mag < 0.0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("ncc window must be odd and positive");
  if (!(eps > 0.0)) throw std::invalid_argument("ncc eps must be positive");
}

double assemble_total(const LossBreakdown& b, const LossWeights& w, const LossTerms& t) {
  const double sim = (t.mean ? b.l_mean : 0.0) + (t.pair ? b.l_pair : 0.0);
  return sim + (t.jdet ? w.lambda_jdet * b.l_jdet : 0.0) + (t.reg ? w.lambda_reg * b.l_reg : 0.0) +
         (t.mag ? w.lambda_mag * b.l_mag : 0.0);
}

std::string to_json_line(const LossBreakdown& b, int iteration) {
  nlohmann::ordered_json j;
  if (iteration >= 0) j["iter"] = iteration;
  j["l_mean"] = b.l_mean;
  j["l_pair"] = b.l_pair;
  j["l_jdet"] = b.l_jdet;
  j["l_reg"] = b.l_reg;
  j["l_mag"] = b.l_mag;
  j["total"] = b.total;
  return j.dump();
}

namespace detail {

double ncc_kernel(std::span<const double> a, std::span<const double> b, const Dims& dims, int w,
                  double eps, std::span<double> g_a, std::span<double> g_b, double scale) {
  if (w < 1 || w % 2 == 0) throw std::invalid_argument("ncc window must be odd and positive");
  const int r = w / 2;
  const std::size_t n = dims.count();

  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const std::vector<double> cnt = box_count(dims, r);
  const std::vector<double> sa = box_sum(a, dims, r);
  const std::vector<double> sb = box_sum(b, dims, r);
  const std::vector<double> saa = box_sum(aa, dims, r);
  const std::vector<double> sbb = box_sum(bb, dims, r);
  const std::vector<double> sab = box_sum(ab, dims, r);

  const bool want_grad = !g_a.empty() || !g_b.empty();
  std::vector<double> gsa, gsb, gsaa, gsbb, gsab;
  if (want_grad) {
    gsa.resize(n);
    gsb.resize(n);
    gsaa.resize(n);
    gsbb.resize(n);
    gsab.resize(n);
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = cnt[i];
    const double cross = sab[i] - sa[i] * sb[i] / m;
    const double va = saa[i] - sa[i] * sa[i] / m;
    const double vb = sbb[i] - sb[i] * sb[i] / m;
    const double den = va * vb + eps;
    const double root = std::sqrt(den);
    acc += cross / root;
    if (want_grad) {
      const double d_cross = 1.0 / root;
      const double d_va = -0.5 * cross * vb / (den * root);
      const double d_vb = -0.5 * cross * va / (den * root);
      gsab[i] = d_cross;
      gsaa[i] = d_va;
      gsbb[i] = d_vb;
      gsa[i] = -d_cross * sb[i] / m - 2.0 * d_va * sa[i] / m;
      gsb[i] = -d_cross * sa[i] / m - 2.0 * d_vb * sb[i] / m;
    }
  }

  if (want_grad) {
    // Window membership is symmetric, so scattering window-sum gradients back
    // to voxels is another truncated box sum.
    const double s = scale / static_cast<double>(n);
    const std::vector<double> bgab = box_sum(gsab, dims, r);
    if (!g_a.empty()) {
      const std::vector<double> bga = box_sum(gsa, dims, r);
      const std::vector<double> bgaa = box_sum(gsaa, dims, r);
      for (std::size_t i = 0; i < n; ++i)
        g_a[i] += s * (bga[i] + 2.0 * a[i] * bgaa[i] + b[i] * bgab[i]);
    }
    if (!g_b.empty()) {
      const std::vector<double> bgb = box_sum(gsb, dims, r);
      const std::vector<double> bgbb = box_sum(gsbb, dims, r);
      for (std::size_t i = 0; i < n; ++i)
        g_b[i] += s * (bgb[i] + 2.0 * b[i] * bgbb[i] + a[i] * bgab[i]);
    }
  }
  return acc / static_cast<double>(n);
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Difference stencil along one axis at coordinate i: returns (lo, hi, factor)
// so that D u = factor * (u[hi] - u[lo]).
struct Diff {
  int lo;
  int hi;
  double factor;
};

Diff diff_at(int i, int n) {
  if (i == 0) return {0, 1, 1.0};
  if (i == n - 1) return {n - 2, n - 1, 1.0};
  return {i - 1, i + 1, 0.5};
}

void require_jacobian_dims(const Dims& d) {
  if (d.nx < 3 || d.ny < 3 || d.nz < 3)
    throw std::invalid_argument("jacobian needs at least 3 voxels per axis, got " + to_string(d));
}

// Visits every voxel with its Jacobian matrix J[a][b] = d phi_a / d x_b and the
// stencils used along each axis.
template <typename Fn>
void for_each_jacobian(const DeformationField& f, Fn&& fn) {
  const Dims& d = f.dims();
  require_jacobian_dims(d);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::array<Diff, 3> st{diff_at(x, d.nx), diff_at(y, d.ny), diff_at(z, d.nz)};
        const std::array<std::size_t, 3> lo{d.index(st[0].lo, y, z), d.index(x, st[1].lo, z),
                                            d.index(x, y, st[2].lo)};
        const std::array<std::size_t, 3> hi{d.index(st[0].hi, y, z), d.index(x, st[1].hi, z),
                                            d.index(x, y, st[2].hi)};
        Mat3 j{};
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            j[a][b] = (a == b ? 1.0 : 0.0) + st[b].factor * (f(a, hi[b]) - f(a, lo[b]));
        fn(d.index(x, y, z), j, st, lo, hi);
      }
    }
  }
}

double det3(const Mat3& j) {
  return j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
         j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
         j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
}

Mat3 cofactor3(const Mat3& j) {
  Mat3 c;
  c[0][0] = j[1][1] * j[2][2] - j[1][2] * j[2][1];
  c[0][1] = -(j[1][0] * j[2][2] - j[1][2] * j[2][0]);
  c[0][2] = j[1][0] * j[2][1] - j[1][1] * j[2][0];
  c[1][0] = -(j[0][1] * j[2][2] - j[0][2] * j[2][1]);
  c[1][1] = j[0][0] * j[2][2] - j[0][2] * j[2][0];
  c[1][2] = -(j[0][0] * j[2][1] - j[0][1] * j[2][0]);
  c[2][0] = j[0][1] * j[1][2] - j[0][2] * j[1][1];
  c[2][1] = -(j[0][0] * j[1][2] - j[0][2] * j[1][0]);
  c[2][2] = j[0][0] * j[1][1] - j[0][1] * j[1][0];
  return c;
}

}  // namespace

double jdet_penalty_kernel(const DeformationField& f, DeformationField* g, double scale) {
  double acc = 0.0;
  for_each_jacobian(f, [&](std::size_t, const Mat3& j, const std::array<Diff, 3>& st,
                           const std::array<std::size_t, 3>& lo,
                           const std::array<std::size_t, 3>& hi) {
    const double det = det3(j);
    if (det >= 0.0) return;
    acc -= det;
    if (g == nullptr) return;
    // d(-det)/dJ = -cofactor; J[a][b] depends on u_a at hi[b] and lo[b].
    const Mat3 c = cofactor3(j);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double gj = -scale * c[a][b] * st[b].factor;
        (*g)(a, hi[b]) += gj;
        (*g)(a, lo[b]) -= gj;
      }
  });
  return acc;
}

double smooth_kernel(const VelocityField& v, VelocityField* g, double scale) {
  const Dims& d = v.dims();
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    auto vc = v.component(c);
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const std::size_t i = d.index(x, y, z);
          const std::array<bool, 3> has{x + 1 < d.nx, y + 1 < d.ny, z + 1 < d.nz};
          const std::array<std::size_t, 3> next{i + 1, i + static_cast<std::size_t>(d.nx),
                                                i + static_cast<std::size_t>(d.nx) * d.ny};
          for (int ax = 0; ax < 3; ++ax) {
            if (!has[ax]) continue;
            const double diff = vc[next[ax]] - vc[i];
            acc += diff * diff;
            if (g != nullptr) {
              (*g)(c, next[ax]) += 2.0 * scale * diff;
              (*g)(c, i) -= 2.0 * scale * diff;
            }
          }
        }
  }
  return acc;
}

double mag_kernel(const VelocityField& v_xy, const VelocityField& v_yx, VelocityField* g_xy,
                  VelocityField* g_yx, double scale) {
  auto a = v_xy.data();
  auto b = v_yx.data();
  double na = 0.0;
  double nb = 0.0;
  for (double v : a) na += v * v;
  for (double v : b) nb += v * v;
  const double n = static_cast<double>(a.size());
  const double diff = na - nb;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  if (g_xy != nullptr && g_yx != nullptr && sign != 0.0) {
    auto ga = g_xy->data();
    auto gb = g_yx->data();
    const double k = 2.0 * scale * sign / n;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ga[i] += k * a[i];
      gb[i] -= k * b[i];
    }
  }
  return std::abs(diff) / n;
}

Pipeline run_pipeline(const Volume& x, const Volume& y, const VelocityField& v_xy,
                      const VelocityField& v_yx, const LossWeights& weights, int steps,
                      const LossTerms& terms) {
  weights.validate();
  require_same_dims(x.dims(), y.dims(), "total_loss images");
  require_same_dims(x.dims(), v_xy.dims(), "total_loss velocity");
  require_same_dims(v_xy.dims(), v_yx.dims(), "total_loss velocities");

  Pipeline p;
  p.xy_half = exp_svf_trajectory(v_xy, FlowTime::half, Direction::forward, steps);
  p.yx_half = exp_svf_trajectory(v_yx, FlowTime::half, Direction::forward, steps);
  p.xy_inv = exp_svf_trajectory(v_xy, FlowTime::half, Direction::inverse, steps);
  p.yx_inv = exp_svf_trajectory(v_yx, FlowTime::half, Direction::inverse, steps);
  p.xy_full = compose(p.yx_inv.back(), p.xy_half.back());
  p.yx_full = compose(p.xy_inv.back(), p.yx_half.back());

  p.x_half = warp_image(x, p.xy_half.back());
  p.y_half = warp_image(y, p.yx_half.back());
  p.x_full = warp_image(x, p.xy_full);
  p.y_full = warp_image(y, p.yx_full);

  const int w = weights.window;
  const double eps = weights.eps;
  LossBreakdown& l = p.loss;
  l.l_mean = loss_mean_shape(p.x_half, p.y_half, w, eps);
  l.l_pair = loss_pair(p.x_full, y, p.y_full, x, w, eps);
  l.l_jdet = loss_jdet(p.xy_half.back(), p.yx_half.back());
  l.l_reg = loss_smooth(v_xy, v_yx);
  l.l_mag = loss_mag(v_xy, v_yx);
  l.total = assemble_total(l, weights, terms);
  return p;
}

}  // namespace detail

double ncc(const Volume& a, const Volume& b, int w, double eps) {
  require_same_dims(a.dims(), b.dims(), "ncc");
  return detail::ncc_kernel(a.data(), b.data(), a.dims(), w, eps, {}, {}, 0.0);
}

double loss_mean_shape(const Volume& x_warped, const Volume& y_warped, int w, double eps) {
  return -ncc(x_warped, y_warped, w, eps);
}

double loss_pair(const Volume& x_full, const Volume& y, const Volume& y_full, const Volume& x,
                 int w, double eps) {
  return -ncc(x_full, y, w, eps) - ncc(y_full, x, w, eps);
}

Volume jacobian_det_field(const DeformationField& d) {
  Volume out(d.dims());
  detail::for_each_jacobian(d, [&](std::size_t i, const auto& j, const auto&, const auto&,
                                   const auto&) { out[i] = detail::det3(j); });
  return out;
}

double loss_jdet(std::span<const DeformationField* const> fields) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const DeformationField* f : fields) {
    acc += detail::jdet_penalty_kernel(*f, nullptr, 0.0);
    n += f->voxels();
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

double loss_jdet(const DeformationField& a, const DeformationField& b) {
  const std::array<const DeformationField*, 2> fields{&a, &b};
  return loss_jdet(fields);
}

double loss_smooth(const VelocityField& v_xy, const VelocityField& v_yx) {
  require_same_dims(v_xy.dims(), v_yx.dims(), "loss_smooth");
  const double s = detail::smooth_kernel(v_xy, nullptr, 0.0) + detail::smooth_kernel(v_yx, nullptr, 0.0);
  return s / static_cast<double>(v_xy.voxels());
}

double loss_mag(const VelocityField& v_xy, const VelocityField& v_yx) {
  require_same_dims(v_xy.dims(), v_yx.dims(), "loss_mag");
  return detail::mag_kernel(v_xy, v_yx, nullptr, nullptr, 0.0);
}

LossBreakdown total_loss(const Volume& x, const Volume& y, const VelocityField& v_xy,
                         const VelocityField& v_yx, const LossWeights& weights, int steps,
                         const LossTerms& terms) {
  return detail::run_pipeline(x, y, v_xy, v_yx, weights, steps, terms).loss;
}

}  // namespace symreg
