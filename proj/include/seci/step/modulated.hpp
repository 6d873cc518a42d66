#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/flow/conjugate.hpp"
#include "seci/spectral/field.hpp"
#include "seci/spectral/norms.hpp"
#include "seci/spectral/ops.hpp"

namespace seci::step {

using flow::FlowSlice;
using spectral::Shape;
using spectral::SpectralField;

// Carrier phase of one sector: exp(i (mo . phi_old + mn . phi_new)).  The
// integer wavevectors are exact; the phases are evaluated from displacement
// samples and never live on the grid themselves.
struct PhaseKey {
  IVec3 mo{0, 0, 0};
  IVec3 mn{0, 0, 0};

  bool is_zero() const {
    return mo == IVec3{0, 0, 0} && mn == IVec3{0, 0, 0};
  }
  PhaseKey negated() const { return {negate(mo), negate(mn)}; }

  friend bool operator==(const PhaseKey& a, const PhaseKey& b) {
    return a.mo == b.mo && a.mn == b.mn;
  }
  friend bool operator<(const PhaseKey& a, const PhaseKey& b) {
    if (a.mo != b.mo) return a.mo < b.mo;
    return a.mn < b.mn;
  }
  friend PhaseKey operator+(const PhaseKey& a, const PhaseKey& b) {
    return {a.mo + b.mo, a.mn + b.mn};
  }
};

// Everything the sector operators need about one flow at one time: forward
// displacement samples, their gradients, and the flow velocity.  Empty
// vectors stand for the identity flow at rest.
struct PhaseFrame {
  int n = 0;
  const flow::FlowSlice* slice = nullptr;
  std::vector<double> disp;    // disp[a*n3+p] = phi_a(x_p) - x_p
  std::vector<double> ddisp;   // ddisp[(3a+b)*n3+p] = d_b disp_a
  std::vector<double> phidot;  // phidot[a*n3+p]
  double ddisp_sup = 0.0;      // sup_p Frobenius norm of ddisp

  bool trivial() const { return disp.empty(); }
  bool moving() const { return !phidot.empty(); }
};

inline PhaseFrame make_phase_frame(const flow::FlowSlice& slice,
                                   std::vector<double> phidot = {}) {
  PhaseFrame pf;
  pf.n = slice.n();
  pf.slice = &slice;
  const std::int64_t n3 = std::int64_t(pf.n) * pf.n * pf.n;
  if (!phidot.empty()) {
    if (std::int64_t(phidot.size()) != 3 * n3)
      throw seci_error("make_phase_frame: phidot layout mismatch");
    bool all0 = true;
    for (double v : phidot)
      if (v != 0.0) {
        all0 = false;
        break;
      }
    if (!all0) pf.phidot = std::move(phidot);
  }
  if (slice.trivial()) return pf;
  pf.disp.resize(3 * n3);
  pf.ddisp.resize(9 * n3);
  for (int a = 0; a < 3; ++a) {
    SpectralField comp = spectral::component_field(slice.disp_fwd(), a);
    std::vector<double> val = comp.component_samples(0);
    std::copy(val.begin(), val.end(), pf.disp.begin() + a * n3);
    for (int b = 0; b < 3; ++b) {
      std::vector<double> d = spectral::partial(comp, b).component_samples(0);
      std::copy(d.begin(), d.end(), pf.ddisp.begin() + (3 * a + b) * n3);
    }
  }
  for (std::int64_t p = 0; p < n3; ++p) {
    double f2 = 0.0;
    for (int e = 0; e < 9; ++e) {
      double v = pf.ddisp[e * n3 + p];
      f2 += v * v;
    }
    pf.ddisp_sup = std::max(pf.ddisp_sup, f2);
  }
  pf.ddisp_sup = std::sqrt(pf.ddisp_sup);
  return pf;
}

// The two flows alive during one step at one time.
struct PhasePair {
  const PhaseFrame* older = nullptr;
  const PhaseFrame* newer = nullptr;

  std::int64_t nodes() const {
    const int n = older->n;
    return std::int64_t(n) * n * n;
  }
};

// exp(i theta) at every node for the given carrier.
inline std::vector<cplx> phase_factors(const PhasePair& pp, const PhaseKey& key) {
  const int n = pp.older->n;
  const std::int64_t n3 = pp.nodes();
  const double h = two_pi / n;
  std::vector<cplx> out(n3);
  std::int64_t p = 0;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3, ++p) {
        double th = (key.mo[0] + key.mn[0]) * (i1 * h) +
                    (key.mo[1] + key.mn[1]) * (i2 * h) +
                    (key.mo[2] + key.mn[2]) * (i3 * h);
        for (int a = 0; a < 3; ++a) {
          if (key.mo[a] != 0 && !pp.older->trivial())
            th += key.mo[a] * pp.older->disp[a * n3 + p];
          if (key.mn[a] != 0 && !pp.newer->trivial())
            th += key.mn[a] * pp.newer->disp[a * n3 + p];
        }
        out[p] = cplx{std::cos(th), std::sin(th)};
      }
  return out;
}

// Conjugated gradient of the carrier phase, w = (grad phi_op)^{-T} grad theta.
// A wavevector riding the operator's own flow contributes itself exactly; the
// foreign contributions are sampled.
struct EffWave {
  Vec3 w0{0, 0, 0};
  std::vector<Vec3> var;  // empty when the wave is uniform

  bool uniform() const { return var.empty(); }
  Vec3 at(std::int64_t p) const {
    if (var.empty()) return w0;
    return {w0[0] + var[p][0], w0[1] + var[p][1], w0[2] + var[p][2]};
  }
};

namespace detail {

inline void add_foreign_wave(EffWave& w, const PhaseFrame& op, const PhaseFrame& rider,
                             const IVec3& m, std::int64_t n3) {
  // grad theta = J_rider^T m, then contract with G_op = J_op^{-T}.
  if (rider.trivial() && op.trivial()) {
    for (int a = 0; a < 3; ++a) w.w0[a] += m[a];
    return;
  }
  if (w.var.empty()) w.var.assign(n3, Vec3{0, 0, 0});
  const std::vector<Mat3>* G = op.trivial() ? nullptr : &op.slice->grad_inv_T();
  for (std::int64_t p = 0; p < n3; ++p) {
    Vec3 grad{double(m[0]), double(m[1]), double(m[2])};
    if (!rider.trivial())
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a)
          grad[b] += rider.ddisp[(3 * a + b) * n3 + p] * m[a];
    Vec3 val = grad;
    if (G) val = mat3_apply((*G)[p], grad);
    for (int a = 0; a < 3; ++a) w.var[p][a] += val[a];
  }
}

}  // namespace detail

inline EffWave effective_wave(const PhaseFrame& op, const PhasePair& pp,
                              const PhaseKey& key) {
  EffWave w;
  const std::int64_t n3 = pp.nodes();
  if (key.mo != IVec3{0, 0, 0}) {
    if (pp.older->slice == op.slice)
      for (int a = 0; a < 3; ++a) w.w0[a] += key.mo[a];
    else
      detail::add_foreign_wave(w, op, *pp.older, key.mo, n3);
  }
  if (key.mn != IVec3{0, 0, 0}) {
    if (pp.newer->slice == op.slice)
      for (int a = 0; a < 3; ++a) w.w0[a] += key.mn[a];
    else
      detail::add_foreign_wave(w, op, *pp.newer, key.mn, n3);
  }
  return w;
}

struct Sector {
  PhaseKey key;
  SpectralField env;
};

// A field plus modulated sectors: f = plain + sum over sectors of
// env(x) exp(i theta_key(x)).  Conjugate sector pairs keep values real.
// The defect accumulates sup bounds of content dropped by capped products.
class ModulatedField {
 public:
  ModulatedField(Shape shape, int n)
      : shape_(shape), n_(n), plain_(shape, n, true) {}

  Shape shape() const { return shape_; }
  int n() const { return n_; }
  std::int64_t nodes() const { return std::int64_t(n_) * n_ * n_; }
  int components() const { return spectral::component_count(shape_); }

  const SpectralField& plain() const { return plain_; }
  SpectralField& plain() { return plain_; }
  const std::vector<Sector>& sectors() const { return sectors_; }
  std::vector<Sector>& sectors() { return sectors_; }

  double defect() const { return defect_; }
  void add_defect(double d) { defect_ += d; }

  void add_plain(const SpectralField& f) { plain_ += f; }

  void set_plain(SpectralField f) {
    if (f.shape() != shape_ || f.n() != n_)
      throw seci_error("ModulatedField: plain layout mismatch");
    plain_ = std::move(f);
  }

  void add_sector(const PhaseKey& key, const SpectralField& env, double weight = 1.0) {
    if (key.is_zero()) throw seci_error("ModulatedField: zero carrier belongs to plain");
    if (env.shape() != shape_ || env.n() != n_)
      throw seci_error("ModulatedField: envelope layout mismatch");
    auto it = std::lower_bound(sectors_.begin(), sectors_.end(), key,
                               [](const Sector& s, const PhaseKey& k) { return s.key < k; });
    if (it != sectors_.end() && it->key == key) {
      for (std::size_t i = 0; i < it->env.data().size(); ++i)
        it->env.data()[i] += weight * env.data()[i];
      return;
    }
    Sector s{key, env};
    s.env.set_real(false);
    if (weight != 1.0)
      for (auto& v : s.env.data()) v *= weight;
    sectors_.insert(it, std::move(s));
  }

  const Sector* find(const PhaseKey& key) const {
    auto it = std::lower_bound(sectors_.begin(), sectors_.end(), key,
                               [](const Sector& s, const PhaseKey& k) { return s.key < k; });
    if (it != sectors_.end() && it->key == key) return &*it;
    return nullptr;
  }

  void add_scaled(const ModulatedField& o, double s) {
    if (o.shape_ != shape_ || o.n_ != n_)
      throw seci_error("ModulatedField: shape mismatch in add");
    for (std::size_t i = 0; i < plain_.data().size(); ++i)
      plain_.data()[i] += s * o.plain_.data()[i];
    for (const Sector& sec : o.sectors_) add_sector(sec.key, sec.env, s);
    defect_ += std::abs(s) * o.defect_;
  }

  ModulatedField& operator+=(const ModulatedField& o) {
    add_scaled(o, 1.0);
    return *this;
  }
  ModulatedField& operator-=(const ModulatedField& o) {
    add_scaled(o, -1.0);
    return *this;
  }
  ModulatedField& operator*=(double s) {
    plain_ *= s;
    for (Sector& sec : sectors_) sec.env *= s;
    defect_ *= std::abs(s);
    return *this;
  }

  // drops sectors with sup below tol, charging them to the defect
  void prune(double tol) {
    std::vector<Sector> kept;
    kept.reserve(sectors_.size());
    for (Sector& s : sectors_) {
      double sup = s.env.sup_norm();
      if (sup <= tol)
        defect_ += sup;
      else
        kept.push_back(std::move(s));
    }
    sectors_ = std::move(kept);
  }

  // keeps the max_sectors largest sectors (conjugate pairs stay together)
  void cap(std::size_t max_sectors) {
    if (sectors_.size() <= max_sectors) return;
    std::vector<std::pair<double, std::size_t>> order(sectors_.size());
    for (std::size_t i = 0; i < sectors_.size(); ++i)
      order[i] = {sectors_[i].env.sup_norm(), i};
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<bool> keep(sectors_.size(), false);
    std::size_t kept = 0;
    for (const auto& [sup, i] : order) {
      if (keep[i]) continue;
      if (kept >= max_sectors) break;
      keep[i] = true;
      ++kept;
      PhaseKey nk = sectors_[i].key.negated();
      for (std::size_t j = 0; j < sectors_.size(); ++j)
        if (!keep[j] && sectors_[j].key == nk) {
          keep[j] = true;
          ++kept;
          break;
        }
    }
    std::vector<Sector> next;
    next.reserve(kept);
    for (std::size_t i = 0; i < sectors_.size(); ++i) {
      if (keep[i])
        next.push_back(std::move(sectors_[i]));
      else
        defect_ += order_sup(order, i);
    }
    sectors_ = std::move(next);
  }

  // worst conjugate-closure violation across sectors
  double closure_defect() const {
    double worst = 0.0;
    for (const Sector& s : sectors_) {
      const Sector* t = find(s.key.negated());
      if (!t) {
        worst = std::max(worst, s.env.sup_norm());
        continue;
      }
      SpectralField c = conj_envelope(s.env);
      for (std::size_t i = 0; i < c.data().size(); ++i)
        worst = std::max(worst, std::abs(c.data()[i] - t->env.data()[i]));
    }
    return worst;
  }

  // certified bound: sup |f| <= sup |plain| + sum of envelope sups (+ defect)
  double sup_bound(bool include_defect = true) const {
    double s = plain_.sup_norm();
    for (const Sector& sec : sectors_) s += sec.env.sup_norm();
    return include_defect ? s + defect_ : s;
  }

  static SpectralField conj_envelope(const SpectralField& env) {
    SpectralField out(env.shape(), env.n(), false);
    const int n = env.n();
    for (std::int64_t i = 0; i < env.modes(); ++i) {
      IVec3 k = spectral::freq_of_linear(i, n);
      IVec3 mk;
      for (int a = 0; a < 3; ++a) mk[a] = (k[a] == -n / 2) ? -n / 2 : -k[a];
      std::int64_t j = spectral::linear_of_freq(mk, n);
      for (int c = 0; c < env.components(); ++c) out.c(c, j) = std::conj(env.c(c, i));
    }
    return out;
  }

 private:
  static double order_sup(const std::vector<std::pair<double, std::size_t>>& order,
                          std::size_t idx) {
    for (const auto& [sup, i] : order)
      if (i == idx) return sup;
    return 0.0;
  }

  Shape shape_;
  int n_;
  SpectralField plain_;
  std::vector<Sector> sectors_;
  double defect_ = 0.0;
};

// Complex node values of the full field, component-major like samples().
inline std::vector<cplx> node_values(const ModulatedField& f, const PhasePair& pp) {
  std::vector<cplx> out = f.plain().complex_samples();
  const std::int64_t n3 = f.nodes();
  for (const Sector& s : f.sectors()) {
    std::vector<cplx> env = s.env.complex_samples();
    std::vector<cplx> ph = phase_factors(pp, s.key);
    for (int c = 0; c < f.components(); ++c)
      for (std::int64_t p = 0; p < n3; ++p) out[c * n3 + p] += env[c * n3 + p] * ph[p];
  }
  return out;
}

inline std::vector<double> real_node_values(const ModulatedField& f, const PhasePair& pp,
                                            double* imag_sup = nullptr) {
  std::vector<cplx> full = node_values(f, pp);
  std::vector<double> out(full.size());
  double im = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    out[i] = full[i].real();
    im = std::max(im, std::abs(full[i].imag()));
  }
  if (imag_sup) *imag_sup = im;
  return out;
}

namespace detail {

// value and partial-derivative samples of every component of one envelope
struct EnvDerivs {
  std::vector<std::vector<cplx>> val;   // [comp][node]
  std::vector<std::vector<cplx>> dval;  // [3*comp+axis][node]
};

inline EnvDerivs env_derivs(const SpectralField& env) {
  EnvDerivs out;
  const int nc = env.components();
  out.val.resize(nc);
  out.dval.resize(3 * nc);
  for (int c = 0; c < nc; ++c) {
    SpectralField comp = spectral::component_field(env, c);
    comp.set_real(false);
    std::vector<cplx> v = comp.complex_samples();
    out.val[c] = std::move(v);
    for (int b = 0; b < 3; ++b)
      out.dval[3 * c + b] = spectral::partial(comp, b).complex_samples();
  }
  return out;
}

// conjugated partial: (grad^phi f)_i = sum_l G_il d_l f, G = identity if flat
inline cplx conj_partial(const EnvDerivs& d, int comp, int i, std::int64_t p,
                         const Mat3* G, std::int64_t n3_unused) {
  (void)n3_unused;
  if (!G) return d.dval[3 * comp + i][p];
  cplx acc{0.0, 0.0};
  for (int l = 0; l < 3; ++l) acc += (*G)[3 * i + l] * d.dval[3 * comp + l][p];
  return acc;
}

}  // namespace detail

// grad^phi of a scalar modulated field under the op flow.
inline ModulatedField local_grad(const ModulatedField& f, const PhaseFrame& op,
                                 const PhasePair& pp) {
  if (f.shape() != Shape::scalar) throw seci_error("local_grad expects a scalar field");
  ModulatedField out(Shape::vector3, f.n());
  out.add_defect(f.defect());
  out.set_plain(flow::grad_phi(f.plain(), *op.slice));
  const std::int64_t n3 = f.nodes();
  const std::vector<Mat3>* G = op.trivial() ? nullptr : &op.slice->grad_inv_T();
  for (const Sector& s : f.sectors()) {
    detail::EnvDerivs d = detail::env_derivs(s.env);
    EffWave w = effective_wave(op, pp, s.key);
    std::vector<cplx> res(3 * n3);
    for (std::int64_t p = 0; p < n3; ++p) {
      const Mat3* g = G ? &(*G)[p] : nullptr;
      Vec3 wp = w.at(p);
      cplx v = d.val[0][p];
      for (int i = 0; i < 3; ++i)
        res[i * n3 + p] =
            detail::conj_partial(d, 0, i, p, g, n3) + cplx{0.0, wp[i]} * v;
    }
    out.add_sector(s.key, SpectralField::from_complex_samples(Shape::vector3, f.n(),
                                                              std::move(res)));
  }
  return out;
}

// div^phi of a vector (to scalar) or symmetric-matrix (to vector) field.
inline ModulatedField local_div(const ModulatedField& f, const PhaseFrame& op,
                                const PhasePair& pp) {
  const std::int64_t n3 = f.nodes();
  const std::vector<Mat3>* G = op.trivial() ? nullptr : &op.slice->grad_inv_T();
  if (f.shape() == Shape::vector3) {
    ModulatedField out(Shape::scalar, f.n());
    out.add_defect(f.defect());
    out.set_plain(flow::div_phi(f.plain(), *op.slice));
    for (const Sector& s : f.sectors()) {
      detail::EnvDerivs d = detail::env_derivs(s.env);
      EffWave w = effective_wave(op, pp, s.key);
      std::vector<cplx> res(n3);
      for (std::int64_t p = 0; p < n3; ++p) {
        const Mat3* g = G ? &(*G)[p] : nullptr;
        Vec3 wp = w.at(p);
        cplx acc{0.0, 0.0};
        for (int i = 0; i < 3; ++i)
          acc += detail::conj_partial(d, i, i, p, g, n3) + cplx{0.0, wp[i]} * d.val[i][p];
        res[p] = acc;
      }
      out.add_sector(s.key, SpectralField::from_complex_samples(Shape::scalar, f.n(),
                                                                std::move(res)));
    }
    return out;
  }
  if (f.shape() == Shape::symmat3) {
    ModulatedField out(Shape::vector3, f.n());
    out.add_defect(f.defect());
    out.set_plain(flow::div_phi(f.plain(), *op.slice));
    for (const Sector& s : f.sectors()) {
      detail::EnvDerivs d = detail::env_derivs(s.env);
      EffWave w = effective_wave(op, pp, s.key);
      std::vector<cplx> res(3 * n3);
      for (std::int64_t p = 0; p < n3; ++p) {
        const Mat3* g = G ? &(*G)[p] : nullptr;
        Vec3 wp = w.at(p);
        for (int j = 0; j < 3; ++j) {
          cplx acc{0.0, 0.0};
          for (int i = 0; i < 3; ++i) {
            int c = spectral::sym_index(i, j);
            acc += detail::conj_partial(d, c, i, p, g, n3) + cplx{0.0, wp[i]} * d.val[c][p];
          }
          res[j * n3 + p] = acc;
        }
      }
      out.add_sector(s.key, SpectralField::from_complex_samples(Shape::vector3, f.n(),
                                                                std::move(res)));
    }
    return out;
  }
  throw seci_error("local_div expects a vector or matrix field");
}

// ---------------------------------------------------------------------------
// Products.  Sector carriers multiply by key addition, so products reduce to
// pointwise products of envelope samples on the coarse grid.  Node values are
// exact; the spectra are the aliased images of those nodes.

namespace detail {

struct TermSamples {
  PhaseKey key;
  double sup = 0.0;
  std::vector<std::vector<cplx>> comp;  // [component][node]
};

inline std::vector<TermSamples> term_samples(const ModulatedField& f) {
  std::vector<TermSamples> out;
  out.reserve(f.sectors().size() + 1);
  {
    TermSamples t;
    t.key = PhaseKey{};
    t.sup = f.plain().sup_norm();
    t.comp.resize(f.components());
    for (int c = 0; c < f.components(); ++c) {
      SpectralField comp = spectral::component_field(f.plain(), c);
      comp.set_real(false);
      t.comp[c] = comp.complex_samples();
    }
    out.push_back(std::move(t));
  }
  for (const Sector& s : f.sectors()) {
    TermSamples t;
    t.key = s.key;
    t.sup = s.env.sup_norm();
    t.comp.resize(f.components());
    for (int c = 0; c < f.components(); ++c) {
      SpectralField comp = spectral::component_field(s.env, c);
      comp.set_real(false);
      t.comp[c] = comp.complex_samples();
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Accumulates kernel(a_term, b_term) samples per summed key, then transforms
// each key once.  Kernel: void(const TermSamples&, const TermSamples&,
// std::vector<std::vector<cplx>>& acc, std::int64_t n3).
template <class Kernel>
ModulatedField mod_bilinear(const ModulatedField& a, const ModulatedField& b,
                            Shape out_shape, Kernel&& kernel, double prune_tol = 0.0) {
  if (a.n() != b.n()) throw seci_error("mod product: grid mismatch");
  ModulatedField out(out_shape, a.n());
  const std::int64_t n3 = a.nodes();
  const int oc = spectral::component_count(out_shape);

  std::vector<TermSamples> ta = term_samples(a);
  std::vector<TermSamples> tb = term_samples(b);

  std::vector<std::pair<PhaseKey, std::vector<std::vector<cplx>>>> acc;
  auto slot = [&](const PhaseKey& k) -> std::vector<std::vector<cplx>>& {
    for (auto& e : acc)
      if (e.first == k) return e.second;
    acc.emplace_back(k, std::vector<std::vector<cplx>>(
                            oc, std::vector<cplx>(n3, cplx{0.0, 0.0})));
    return acc.back().second;
  };

  double dropped = 0.0;
  for (const TermSamples& sa : ta)
    for (const TermSamples& sb : tb) {
      if (prune_tol > 0.0 && sa.sup * sb.sup <= prune_tol) {
        dropped += sa.sup * sb.sup;
        continue;
      }
      kernel(sa, sb, slot(sa.key + sb.key), n3);
    }

  for (auto& [key, comp] : acc) {
    std::vector<cplx> flat(std::int64_t(oc) * n3);
    for (int c = 0; c < oc; ++c)
      std::copy(comp[c].begin(), comp[c].end(), flat.begin() + c * n3);
    if (key.is_zero()) {
      double im = 0.0;
      std::vector<double> re(flat.size());
      for (std::size_t i = 0; i < flat.size(); ++i) {
        re[i] = flat[i].real();
        im = std::max(im, std::abs(flat[i].imag()));
      }
      out.add_plain(SpectralField::from_samples(out_shape, a.n(), re));
      out.add_defect(im);
    } else {
      SpectralField env =
          SpectralField::from_complex_samples(out_shape, a.n(), std::move(flat));
      if (env.sup_norm() > 0.0) out.add_sector(key, env);
    }
  }
  out.add_defect(dropped + a.defect() * b.sup_bound(false) +
                 b.defect() * a.sup_bound(false) + a.defect() * b.defect());
  return out;
}

}  // namespace detail

// scalar * vector (or scalar * scalar)
inline ModulatedField mod_scale(const ModulatedField& s, const ModulatedField& f,
                                double prune_tol = 0.0) {
  if (s.shape() != Shape::scalar) throw seci_error("mod_scale expects a scalar left factor");
  return detail::mod_bilinear(
      s, f, f.shape(),
      [](const detail::TermSamples& sa, const detail::TermSamples& sb,
         std::vector<std::vector<cplx>>& acc, std::int64_t n3) {
        for (std::size_t c = 0; c < sb.comp.size(); ++c)
          for (std::int64_t p = 0; p < n3; ++p) acc[c][p] += sa.comp[0][p] * sb.comp[c][p];
      },
      prune_tol);
}

inline ModulatedField mod_dot(const ModulatedField& a, const ModulatedField& b,
                              double prune_tol = 0.0) {
  if (a.shape() != Shape::vector3 || b.shape() != Shape::vector3)
    throw seci_error("mod_dot expects vector fields");
  return detail::mod_bilinear(
      a, b, Shape::scalar,
      [](const detail::TermSamples& sa, const detail::TermSamples& sb,
         std::vector<std::vector<cplx>>& acc, std::int64_t n3) {
        for (int i = 0; i < 3; ++i)
          for (std::int64_t p = 0; p < n3; ++p) acc[0][p] += sa.comp[i][p] * sb.comp[i][p];
      },
      prune_tol);
}

// symmetric outer product entries a_i b_j; caller passes a == b or a
// symmetrized pair
inline ModulatedField mod_outer(const ModulatedField& a, const ModulatedField& b,
                                double prune_tol = 0.0) {
  if (a.shape() != Shape::vector3 || b.shape() != Shape::vector3)
    throw seci_error("mod_outer expects vector fields");
  return detail::mod_bilinear(
      a, b, Shape::symmat3,
      [](const detail::TermSamples& sa, const detail::TermSamples& sb,
         std::vector<std::vector<cplx>>& acc, std::int64_t n3) {
        for (int i = 0; i < 3; ++i)
          for (int j = i; j < 3; ++j) {
            int c = spectral::sym_index(i, j);
            for (std::int64_t p = 0; p < n3; ++p)
              acc[c][p] += 0.5 * (sa.comp[i][p] * sb.comp[j][p] +
                                  sa.comp[j][p] * sb.comp[i][p]);
          }
      },
      prune_tol);
}

inline ModulatedField mod_component(const ModulatedField& f, int c) {
  ModulatedField out(Shape::scalar, f.n());
  out.set_plain(spectral::component_field(f.plain(), c));
  for (const Sector& s : f.sectors()) {
    SpectralField env = spectral::component_field(s.env, c);
    env.set_real(false);
    out.add_sector(s.key, env);
  }
  out.add_defect(f.defect());
  return out;
}

inline ModulatedField mod_assemble_vector3(const ModulatedField& f0,
                                           const ModulatedField& f1,
                                           const ModulatedField& f2) {
  ModulatedField out(Shape::vector3, f0.n());
  const ModulatedField* in[3] = {&f0, &f1, &f2};
  const std::int64_t n3 = f0.plain().modes();
  SpectralField plain(Shape::vector3, f0.n(), true);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < n3; ++i) plain.c(c, i) = in[c]->plain().c(0, i);
  out.set_plain(plain);
  for (int c = 0; c < 3; ++c) {
    for (const Sector& s : in[c]->sectors()) {
      SpectralField env(Shape::vector3, f0.n(), false);
      for (std::int64_t i = 0; i < n3; ++i) env.c(c, i) = s.env.c(0, i);
      out.add_sector(s.key, env);
    }
    out.add_defect(in[c]->defect());
  }
  return out;
}

inline ModulatedField mod_trace(const ModulatedField& f) {
  ModulatedField out(Shape::scalar, f.n());
  out.set_plain(spectral::trace(f.plain()));
  for (const Sector& s : f.sectors()) {
    SpectralField env = spectral::trace(s.env);
    env.set_real(false);
    out.add_sector(s.key, env);
  }
  out.add_defect(f.defect());
  return out;
}

// q Id as a symmetric matrix field
inline ModulatedField mod_q_identity(const ModulatedField& q) {
  if (q.shape() != Shape::scalar) throw seci_error("mod_q_identity expects a scalar");
  ModulatedField out(Shape::symmat3, q.n());
  const std::int64_t n3 = q.plain().modes();
  auto lift = [&](const SpectralField& src, bool real) {
    SpectralField dst(Shape::symmat3, q.n(), real);
    for (int d = 0; d < 3; ++d) {
      int c = spectral::sym_index(d, d);
      for (std::int64_t i = 0; i < n3; ++i) dst.c(c, i) = src.c(0, i);
    }
    return dst;
  };
  out.set_plain(lift(q.plain(), true));
  for (const Sector& s : q.sectors()) out.add_sector(s.key, lift(s.env, false));
  out.add_defect(q.defect());
  return out;
}

// div^phi of the (generally nonsymmetric) tensor u (x) v, column by column:
// out_j = div^phi of the vector field u_i v_j.
inline ModulatedField div_outer(const ModulatedField& u, const ModulatedField& v,
                                const PhaseFrame& op, const PhasePair& pp,
                                double prune_tol = 0.0) {
  std::vector<ModulatedField> cols;
  cols.reserve(3);
  for (int j = 0; j < 3; ++j) {
    ModulatedField vj = mod_component(v, j);
    ModulatedField Fj = mod_scale(vj, u, prune_tol);
    cols.push_back(local_div(Fj, op, pp));
  }
  return mod_assemble_vector3(cols[0], cols[1], cols[2]);
}

// ---------------------------------------------------------------------------
// Nonlocal conjugated operators on sectors.  Only carriers riding the
// operator's own flow are admitted; their conjugated symbol is the flat
// multiplier evaluated at the integer shift m plus the envelope frequency.

namespace detail {

inline IVec3 own_shift(const PhaseFrame& op, const PhasePair& pp, const PhaseKey& key) {
  bool flat = pp.older->trivial() && pp.newer->trivial() && op.trivial();
  if (flat) return key.mo + key.mn;
  if (key.mo == IVec3{0, 0, 0} && pp.newer->slice == op.slice) return key.mn;
  if (key.mn == IVec3{0, 0, 0} && pp.older->slice == op.slice) return key.mo;
  throw seci_error("mod operator: sector rides a foreign flow");
}

template <class Symbol>
SpectralField shifted_multiplier(const SpectralField& env, const FlowSlice& s,
                                 const IVec3& shift, Shape out_shape, Symbol&& symbol,
                                 double* collision_defect) {
  SpectralField flat = flow::compose_inverse(env, s);
  const int N = flat.n();
  SpectralField out(out_shape, N, false);
  const std::int64_t n3 = flat.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 q = spectral::freq_of_linear(i, N);
    IVec3 xi = shift + q;
    if (xi == IVec3{0, 0, 0}) {
      double mag = 0.0;
      for (int c = 0; c < flat.components(); ++c) mag = std::max(mag, std::abs(flat.c(c, i)));
      if (mag > 1e-10)
        throw seci_error("mod operator: carrier collides with envelope band");
      if (collision_defect) *collision_defect += mag;
      continue;
    }
    symbol(xi, flat, i, out);
  }
  return flow::compose_forward(out, s);
}

inline void symbol_leray_Q(const IVec3& xi, const SpectralField& v, std::int64_t i,
                           SpectralField& out) {
  double k2 = double(xi[0]) * xi[0] + double(xi[1]) * xi[1] + double(xi[2]) * xi[2];
  cplx kv{0.0, 0.0};
  for (int a = 0; a < 3; ++a) kv += double(xi[a]) * v.c(a, i);
  for (int a = 0; a < 3; ++a) out.c(a, i) = kv * double(xi[a]) / k2;
}

inline void symbol_inverse_R(const IVec3& xi, const SpectralField& v, std::int64_t i,
                             SpectralField& out) {
  double k2 = double(xi[0]) * xi[0] + double(xi[1]) * xi[1] + double(xi[2]) * xi[2];
  cplx u[3], pu[3];
  for (int a = 0; a < 3; ++a) u[a] = v.c(a, i) / (-k2);
  cplx ku{0.0, 0.0};
  for (int a = 0; a < 3; ++a) ku += double(xi[a]) * u[a];
  for (int a = 0; a < 3; ++a) pu[a] = u[a] - ku * double(xi[a]) / k2;
  cplx divu = cplx{0.0, 1.0} * ku;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      cplx grad_pu = cplx{0.0, double(xi[a])} * pu[b] + cplx{0.0, double(xi[b])} * pu[a];
      cplx grad_u = cplx{0.0, double(xi[a])} * u[b] + cplx{0.0, double(xi[b])} * u[a];
      cplx val = 0.25 * grad_pu + 0.75 * grad_u;
      if (a == b) val -= 0.5 * divu;
      out.c(spectral::sym_index(a, b), i) = val;
    }
}

}  // namespace detail

inline ModulatedField mod_leray_Q(const ModulatedField& f, const PhaseFrame& op,
                                  const PhasePair& pp) {
  if (f.shape() != Shape::vector3) throw seci_error("mod_leray_Q expects a vector field");
  ModulatedField out(Shape::vector3, f.n());
  out.set_plain(flow::Q_phi(f.plain(), *op.slice));
  out.add_defect(f.defect());
  for (const Sector& s : f.sectors()) {
    IVec3 shift = detail::own_shift(op, pp, s.key);
    double cd = 0.0;
    SpectralField env = detail::shifted_multiplier(s.env, *op.slice, shift, Shape::vector3,
                                                   detail::symbol_leray_Q, &cd);
    out.add_defect(cd);
    out.add_sector(s.key, env);
  }
  return out;
}

inline ModulatedField mod_leray_P(const ModulatedField& f, const PhaseFrame& op,
                                  const PhasePair& pp) {
  ModulatedField out = f;
  out -= mod_leray_Q(f, op, pp);
  return out;
}

inline ModulatedField mod_inverse_R(const ModulatedField& f, const PhaseFrame& op,
                                    const PhasePair& pp) {
  if (f.shape() != Shape::vector3) throw seci_error("mod_inverse_R expects a vector field");
  ModulatedField out(Shape::symmat3, f.n());
  out.set_plain(flow::R_phi(f.plain(), *op.slice));
  out.add_defect(f.defect());
  for (const Sector& s : f.sectors()) {
    IVec3 shift = detail::own_shift(op, pp, s.key);
    double cd = 0.0;
    SpectralField env = detail::shifted_multiplier(s.env, *op.slice, shift, Shape::symmat3,
                                                   detail::symbol_inverse_R, &cd);
    out.add_defect(cd);
    out.add_sector(s.key, env);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rebasing: rewrite every carrier over the new flow only,
// exp(i(mo.phi_o + mn.phi_n)) = exp(i mo.(d_o - d_n)) exp(i(mo+mn).phi_n),
// folding the smooth correction factor into the envelope.  The factor is
// sampled on the coarse grid; the alias defect is measured on the doubled
// grid when requested.

inline ModulatedField rebase_to_new(const ModulatedField& f, const PhasePair& pp,
                                    bool measure_defect = false) {
  ModulatedField out(f.shape(), f.n());
  out.set_plain(f.plain());
  out.add_defect(f.defect());
  const int n = f.n();
  const std::int64_t n3 = f.nodes();
  const int nc = f.components();

  for (const Sector& s : f.sectors()) {
    if (s.key.mo == IVec3{0, 0, 0}) {
      out.add_sector(s.key, s.env);
      continue;
    }
    std::vector<cplx> fac(n3);
    for (std::int64_t p = 0; p < n3; ++p) {
      double th = 0.0;
      for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        if (!pp.older->trivial()) d += pp.older->disp[a * n3 + p];
        if (!pp.newer->trivial()) d -= pp.newer->disp[a * n3 + p];
        th += s.key.mo[a] * d;
      }
      fac[p] = cplx{std::cos(th), std::sin(th)};
    }
    std::vector<cplx> env = s.env.complex_samples();
    std::vector<cplx> prod(env.size());
    for (int c = 0; c < nc; ++c)
      for (std::int64_t p = 0; p < n3; ++p) prod[c * n3 + p] = env[c * n3 + p] * fac[p];

    PhaseKey nk{IVec3{0, 0, 0}, s.key.mo + s.key.mn};
    if (nk.is_zero()) {
      std::vector<double> re(prod.size());
      double im = 0.0;
      for (std::size_t i = 0; i < prod.size(); ++i) {
        re[i] = prod[i].real();
        im = std::max(im, std::abs(prod[i].imag()));
      }
      out.add_plain(SpectralField::from_samples(f.shape(), n, re));
      out.add_defect(im);
    } else {
      SpectralField env2 = SpectralField::from_complex_samples(f.shape(), n, std::move(prod));
      if (measure_defect) {
        const int M = 2 * n;
        const std::int64_t m3 = std::int64_t(M) * M * M;
        std::vector<double> th2(m3, 0.0);
        auto add_disp = [&](const PhaseFrame& pf, double sign) {
          if (pf.trivial()) return;
          const SpectralField& d = pf.slice->disp_fwd();
          for (int a = 0; a < 3; ++a) {
            if (s.key.mo[a] == 0) continue;
            std::vector<cplx> da = spectral::padded_component_samples(d, a, M);
            for (std::int64_t p = 0; p < m3; ++p)
              th2[p] += sign * s.key.mo[a] * da[p].real();
          }
        };
        add_disp(*pp.older, +1.0);
        add_disp(*pp.newer, -1.0);
        double worst = 0.0;
        for (int c = 0; c < nc; ++c) {
          std::vector<cplx> e2 = spectral::padded_component_samples(s.env, c, M);
          std::vector<cplx> o2 = spectral::padded_component_samples(env2, c, M);
          for (std::int64_t p = 0; p < m3; ++p) {
            cplx want = e2[p] * cplx{std::cos(th2[p]), std::sin(th2[p])};
            worst = std::max(worst, std::abs(want - o2[p]));
          }
        }
        out.add_defect(worst);
      }
      out.add_sector(nk, env2);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certified norm bounds.  Sector contributions enter through the triangle
// inequality; phase gradients are bounded by the frame displacement slopes.

inline double phase_gradient_bound(const PhasePair& pp, const PhaseKey& key) {
  auto norm = [](const IVec3& m) {
    return std::sqrt(double(m[0]) * m[0] + double(m[1]) * m[1] + double(m[2]) * m[2]);
  };
  double b = 0.0;
  if (!(key.mo == IVec3{0, 0, 0})) b += (1.0 + pp.older->ddisp_sup) * norm(key.mo);
  if (!(key.mn == IVec3{0, 0, 0})) b += (1.0 + pp.newer->ddisp_sup) * norm(key.mn);
  return b;
}

inline double mod_c1_bound(const ModulatedField& f, const PhasePair& pp) {
  double b = f.plain().sup_norm();
  for (int a = 0; a < 3; ++a) b += spectral::partial(f.plain(), a).sup_norm();
  for (const Sector& s : f.sectors()) {
    double es = s.env.sup_norm();
    double ed = 0.0;
    for (int a = 0; a < 3; ++a) ed += spectral::partial(s.env, a).sup_norm();
    b += es + ed + phase_gradient_bound(pp, s.key) * es;
  }
  return b + f.defect();
}

// Per dyadic block, a sup-norm bound of the composition with the inverse of
// the new flow; sectors must ride the new flow (rebase first).  Entry b[j+1]
// covers block j, starting from the mean block j = -1.
inline std::vector<double> mod_block_sups(const ModulatedField& f, const PhasePair& pp,
                                          int max_block = 16) {
  std::vector<double> blocks(max_block + 2, 0.0);
  const flow::FlowSlice* s = pp.newer->slice;
  SpectralField flat_plain =
      pp.newer->trivial() ? f.plain() : flow::compose_inverse(f.plain(), *s);
  for (int j = -1; j <= max_block; ++j)
    blocks[j + 1] = spectral::lp_block(flat_plain, j).sup_norm();
  const int N = f.n();
  for (const Sector& sec : f.sectors()) {
    if (!(sec.key.mo == IVec3{0, 0, 0}))
      throw seci_error("mod_block_sups: rebase sectors to the new flow first");
    SpectralField flat =
        pp.newer->trivial() ? sec.env : flow::compose_inverse(sec.env, *s);
    std::vector<SpectralField> per_block;
    std::vector<bool> used;
    for (std::int64_t i = 0; i < flat.modes(); ++i) {
      IVec3 xi = sec.key.mn + spectral::freq_of_linear(i, N);
      int j = spectral::besov_block_of(xi) + 1;
      if (j > max_block + 1) j = max_block + 1;
      if (std::size_t(j) >= per_block.size()) {
        per_block.resize(j + 1, SpectralField(flat.shape(), N, false));
        used.resize(j + 1, false);
      }
      used[j] = true;
      for (int c = 0; c < flat.components(); ++c) per_block[j].c(c, i) = flat.c(c, i);
    }
    for (std::size_t j = 0; j < per_block.size(); ++j)
      if (used[j]) blocks[j] += per_block[j].sup_norm();
  }
  return blocks;
}

// certified bound on the B^{-1}_{inf,inf} norm after composition with the new
// flow's inverse
inline double mod_besov_m1(const ModulatedField& f, const PhasePair& pp) {
  std::vector<double> blocks = mod_block_sups(f, pp);
  double best = 0.0;
  for (std::size_t e = 0; e < blocks.size(); ++e) {
    int j = int(e) - 1;
    best = std::max(best, std::pow(2.0, -j) * blocks[e]);
  }
  return best + f.defect();
}

inline Vec3 mod_mean3(const ModulatedField& f) {
  if (f.shape() != Shape::vector3) throw seci_error("mod_mean3 expects a vector field");
  return {f.plain().component_mean(0), f.plain().component_mean(1),
          f.plain().component_mean(2)};
}

}  // namespace seci::step
