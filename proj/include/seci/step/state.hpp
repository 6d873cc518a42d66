#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "seci/flow/flowmap.hpp"
#include "seci/step/modulated.hpp"

namespace seci::step {

// FlowSlices and PhaseFrames for every frame of one FlowMap, with stable
// addresses so slices can be shared by reference across a whole step.
class PhaseBook {
 public:
  explicit PhaseBook(const flow::FlowMap& map) : map_(&map), plan_(map.n) {
    const int fc = map.frame_count();
    slices_.reserve(fc);
    frames_.reserve(fc);
    for (int i = 0; i < fc; ++i) {
      slices_.push_back(std::make_unique<FlowSlice>(map.frames[i], plan_));
      frames_.push_back(make_phase_frame(*slices_[i], map.phidot_samples(i)));
    }
  }

  PhaseBook(const PhaseBook&) = delete;
  PhaseBook& operator=(const PhaseBook&) = delete;

  const flow::FlowMap& map() const { return *map_; }
  const spectral::Nufft& plan() const { return plan_; }
  int frame_count() const { return int(frames_.size()); }
  const PhaseFrame& frame(int i) const { return frames_.at(i); }
  const FlowSlice& slice(int i) const { return *slices_.at(i); }

  // both phases over the same flow, for single-level states
  PhasePair own_pair(int i) const { return PhasePair{&frames_.at(i), &frames_.at(i)}; }

 private:
  const flow::FlowMap* map_;
  spectral::Nufft plan_;
  std::vector<std::unique_ptr<FlowSlice>> slices_;
  std::vector<PhaseFrame> frames_;
};

// Finite-difference time derivative of a frame window plus the analytic
// carrier rate i (mo.phidot_o + mn.phidot_n) of the sectors at the evaluation
// frame.  Windows and weights follow the caller's stencil.
inline ModulatedField mod_time_derivative(const std::vector<const ModulatedField*>& win,
                                          const std::vector<double>& weights,
                                          const ModulatedField& at, const PhasePair& pp) {
  if (win.size() != weights.size() || win.empty())
    throw seci_error("mod_time_derivative: stencil mismatch");
  ModulatedField out(at.shape(), at.n());
  for (std::size_t i = 0; i < win.size(); ++i) out.add_scaled(*win[i], weights[i]);

  const std::int64_t n3 = at.nodes();
  const int nc = at.components();
  for (const Sector& s : at.sectors()) {
    bool has_o = !(s.key.mo == IVec3{0, 0, 0}) && pp.older->moving();
    bool has_n = !(s.key.mn == IVec3{0, 0, 0}) && pp.newer->moving();
    if (!has_o && !has_n) continue;
    std::vector<cplx> env = s.env.complex_samples();
    for (std::int64_t p = 0; p < n3; ++p) {
      double rate = 0.0;
      if (has_o)
        for (int a = 0; a < 3; ++a) rate += s.key.mo[a] * pp.older->phidot[a * n3 + p];
      if (has_n)
        for (int a = 0; a < 3; ++a) rate += s.key.mn[a] * pp.newer->phidot[a * n3 + p];
      cplx f{0.0, rate};
      for (int c = 0; c < nc; ++c) env[c * n3 + p] *= f;
    }
    out.add_sector(s.key, SpectralField::from_complex_samples(at.shape(), at.n(),
                                                              std::move(env)));
  }
  return out;
}

// centered interior stencil, one-sided second order at the ends
inline void fd_stencil(int i, int frames, double dt, std::vector<int>& idx,
                       std::vector<double>& w) {
  idx.clear();
  w.clear();
  if (frames < 3) throw seci_error("fd_stencil: need at least three frames");
  if (i == 0) {
    idx = {0, 1, 2};
    w = {-1.5 / dt, 2.0 / dt, -0.5 / dt};
  } else if (i == frames - 1) {
    idx = {i, i - 1, i - 2};
    w = {1.5 / dt, -2.0 / dt, 0.5 / dt};
  } else {
    idx = {i - 1, i + 1};
    w = {-0.5 / dt, 0.5 / dt};
  }
}

struct StateFrame {
  ModulatedField v;
  ModulatedField q;
  ModulatedField R;

  StateFrame(ModulatedField v_, ModulatedField q_, ModulatedField R_)
      : v(std::move(v_)), q(std::move(q_)), R(std::move(R_)) {}
};

// One iteration quadruple on its own time grid: velocity, pressure, stress,
// and the flow they ride, plus the per-time diagnostics the contract names.
struct EulerReynoldsState {
  int level = 0;
  int n = 0;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<StateFrame> frames;
  flow::FlowMap flow;
  std::vector<double> divergence_report;  // B^{-1}_{inf,inf} of div^phi v per time
  std::vector<Vec3> mean_v;               // spatial average of v per time
  double residual_sup = 0.0;              // recomputed discrete residual
  double residual_tol = 1e-6;             // relative, times residual_scale()
  double defect = 0.0;                    // accumulated representation defects

  int frame_count() const { return int(frames.size()); }
  double time(int i) const { return t0 + i * dt; }

  double residual_scale() const {
    double s = 1.0;
    for (const StateFrame& f : frames)
      s = std::max(s, f.v.sup_bound(false) * (1.0 + f.v.sup_bound(false)) +
                          f.q.sup_bound(false) + f.R.sup_bound(false));
    return s;
  }
};

inline EulerReynoldsState zero_state(int n, const flow::FlowGrid& grid, int level = 0) {
  EulerReynoldsState st;
  st.level = level;
  st.n = n;
  st.t0 = grid.t0;
  st.dt = grid.dt;
  st.flow = flow::identity_flow(n, grid, level);
  for (int i = 0; i < grid.frames; ++i) {
    st.frames.emplace_back(ModulatedField(Shape::vector3, n),
                           ModulatedField(Shape::scalar, n),
                           ModulatedField(Shape::symmat3, n));
    st.divergence_report.push_back(0.0);
    st.mean_v.push_back(Vec3{0, 0, 0});
  }
  return st;
}

// Exact integral of |f|^2 keeping the non-oscillatory terms: the plain
// Plancherel mass plus each envelope's mass.  Cross terms oscillate at the
// carrier scale and are omitted.
inline double mod_energy(const ModulatedField& f) {
  auto mass = [](const SpectralField& g) {
    std::vector<cplx> s = g.complex_samples();
    double acc = 0.0;
    for (const cplx& v : s) acc += std::norm(v);
    return torus_volume * acc / double(g.modes());
  };
  double e = mass(f.plain());
  for (const Sector& s : f.sectors()) e += mass(s.env);
  return e;
}

// spatial terms of the discrete Euler-Reynolds operator at one frame
inline ModulatedField spatial_residual(const StateFrame& f, const PhaseFrame& fr,
                                       const PhasePair& pp, double prune_tol = 0.0) {
  ModulatedField out = div_outer(f.v, f.v, fr, pp, prune_tol);
  out += local_grad(f.q, fr, pp);
  out -= local_div(f.R, fr, pp);
  return out;
}

// Recomputes the Euler-Reynolds residual of a stored state by differencing
// synthesized node values in time; returns the worst node magnitude.
inline double state_residual_sup(const EulerReynoldsState& st, const PhaseBook& book) {
  if (st.frame_count() < 3) throw seci_error("state_residual_sup: too few frames");
  const std::int64_t n3 = std::int64_t(st.n) * st.n * st.n;
  double worst = 0.0;
  std::vector<int> idx;
  std::vector<double> w;
  for (int i = 0; i < st.frame_count(); ++i) {
    PhasePair pp = book.own_pair(i);
    std::vector<double> acc(3 * n3, 0.0);
    fd_stencil(i, st.frame_count(), st.dt, idx, w);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      std::vector<double> vs = real_node_values(st.frames[idx[s]].v, book.own_pair(idx[s]));
      for (std::int64_t e = 0; e < 3 * n3; ++e) acc[e] += w[s] * vs[e];
    }
    ModulatedField sp = spatial_residual(st.frames[i], book.frame(i), pp);
    std::vector<double> ss = real_node_values(sp, pp);
    for (std::int64_t p = 0; p < n3; ++p) {
      double m2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        double r = acc[a * n3 + p] + ss[a * n3 + p];
        m2 += r * r;
      }
      worst = std::max(worst, std::sqrt(m2));
    }
  }
  return worst;
}

inline std::vector<double> divergence_report_of(const EulerReynoldsState& st,
                                                const PhaseBook& book) {
  std::vector<double> out;
  out.reserve(st.frame_count());
  for (int i = 0; i < st.frame_count(); ++i) {
    PhasePair pp = book.own_pair(i);
    ModulatedField dv = local_div(st.frames[i].v, book.frame(i), pp);
    out.push_back(mod_besov_m1(dv, pp));
  }
  return out;
}

// contract invariants of a stored state; throws naming the first violation
inline void validate_state(const EulerReynoldsState& st, const PhaseBook& book,
                           bool check_residual = true) {
  if (st.frame_count() < 3) throw seci_error("state: needs at least three frames");
  if (int(st.mean_v.size()) != st.frame_count() ||
      int(st.divergence_report.size()) != st.frame_count())
    throw seci_error("state: diagnostic arrays disagree with the frame count");
  for (int i = 0; i < st.frame_count(); ++i) {
    const StateFrame& f = st.frames[i];
    if (f.v.shape() != Shape::vector3 || f.q.shape() != Shape::scalar ||
        f.R.shape() != Shape::symmat3)
      throw seci_error("state: frame shapes are wrong");
    if (mod_trace(f.R).sup_bound(false) > 1e-10)
      throw seci_error("state: stress trace exceeds 1e-10");
    Vec3 m = mod_mean3(f.v);
    if (std::abs(m[0]) + std::abs(m[1]) + std::abs(m[2]) > 1e-10)
      throw seci_error("state: velocity mean is nonzero");
  }
  if (check_residual) {
    double sup = state_residual_sup(st, book);
    if (sup > st.residual_tol * st.residual_scale())
      throw seci_error("state: Euler-Reynolds residual exceeds tolerance");
  }
}

}  // namespace seci::step
