#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "seci/blocks/amplitude.hpp"
#include "seci/blocks/beltrami.hpp"
#include "seci/blocks/pump.hpp"
#include "seci/blocks/transport.hpp"
#include "seci/spectral/mollify.hpp"
#include "seci/step/modulated.hpp"
#include "seci/step/state.hpp"

namespace seci::step {

struct StepConfig {
  double ell = 0.0;          // space-time mollification length
  int lambda = 8;            // carrier frequency of the new perturbation
  double mu = 2.0;           // velocity lattice spacing parameter
  double delta_next = 0.1;   // energy increment of the new level
  double eta = 0.05;         // pump floor margin
  std::function<double(double)> e_profile;
  double t_lo = 0.0;         // pump sampling window
  double t_stop = 0.0;       // gluing time of the pumping target
  double pump_dt_sample = 1.0 / 128.0;
  double prune_tol = 0.0;        // pair pruning threshold for products
  std::size_t cap_v = 192;       // sector budget of the stored velocity
  std::size_t cap_qr = 96;       // sector budget of stored pressure and stress
  double residual_tol = 1e-6;    // relative residual bound of the new state
  double residual_mean_tol = 1e-6;
  bool measure_rebase_defect = false;
  bool r_images = true;          // per-part inverse-divergence images
  bool validate_output = true;
};

struct PartRow {
  double sup_norm = 0.0;   // certified upper bound
  double c1_norm = 0.0;    // certified upper bound
  double besov_m1 = 0.0;   // after composition with the new inverse flow
};

struct ErrorPart {
  std::string name;
  spectral::SpaceTimeField field;    // node-value synthesis per frame
  spectral::SpaceTimeField r_image;  // ditto for the inverse-divergence image
  std::vector<PartRow> rows;
  std::vector<PartRow> rows_r;
};

struct ErrorDecomposition {
  std::vector<ErrorPart> parts;
  spectral::SpaceTimeField total;
  double misfit = 0.0;         // worst node gap between the part sum and the total
  double residual_mean = 0.0;  // worst |spatial mean of the total| over frames

  const ErrorPart& part(const std::string& name) const {
    for (const ErrorPart& p : parts)
      if (p.name == name) return p;
    throw seci_error("ErrorDecomposition: unknown part " + name);
  }

  // schema: one row per (frame, part); R-image rows carry the _R suffix
  void write_csv(std::ostream& os, int iteration) const {
    os << "# seci-errors v1\n";
    os << "iteration,time,part_name,sup_norm,C1_norm,besov_m1\n";
    for (const ErrorPart& p : parts) {
      for (std::size_t j = 0; j < p.rows.size(); ++j)
        os << iteration << ',' << p.field.time(int(j)) << ',' << p.name << ','
           << p.rows[j].sup_norm << ',' << p.rows[j].c1_norm << ','
           << p.rows[j].besov_m1 << '\n';
      for (std::size_t j = 0; j < p.rows_r.size(); ++j)
        os << iteration << ',' << p.r_image.time(int(j)) << ',' << p.name << "_R,"
           << p.rows_r[j].sup_norm << ',' << p.rows_r[j].c1_norm << ','
           << p.rows_r[j].besov_m1 << '\n';
    }
  }
};

// stored states key their sectors over their own flow; inside a step that
// flow is the older one
inline ModulatedField rekey_old(const ModulatedField& f) {
  ModulatedField out(f.shape(), f.n());
  out.set_plain(f.plain());
  for (const Sector& s : f.sectors()) {
    if (!(s.key.mo == IVec3{0, 0, 0}))
      throw seci_error("rekey_old: stored sector is already two-phase");
    out.add_sector(PhaseKey{s.key.mn, IVec3{0, 0, 0}}, s.env);
  }
  out.add_defect(f.defect());
  return out;
}

// weighted history combine ending at frame hi, then the space symbol on the
// plain part and on every envelope
inline ModulatedField mollify_combine(const std::vector<ModulatedField>& seq, int hi,
                                      const std::vector<double>& weights,
                                      const spectral::SpaceTimeMollifier& moll) {
  if (hi - int(weights.size()) + 1 < 0 || hi >= int(seq.size()))
    throw seci_error("mollifier needs more history frames");
  ModulatedField out(seq[0].shape(), seq[0].n());
  for (int i = 0; i < int(weights.size()); ++i)
    if (weights[i] != 0.0) out.add_scaled(seq[hi - i], weights[i]);
  out.set_plain(moll.apply_space(out.plain()));
  for (Sector& s : out.sectors()) {
    SpectralField e = moll.apply_space(s.env);
    e.set_real(false);
    s.env = std::move(e);
  }
  return out;
}

struct MollifiedTriple {
  std::vector<ModulatedField> v, q, R;
  int base = 0;  // output frame j sits at state frame j + base
};

// (v_ell, q_ell, R_ell) on the output frames from the rekeyed state sequences
inline MollifiedTriple mollify_state(const std::vector<ModulatedField>& vn,
                                     const std::vector<ModulatedField>& qn,
                                     const std::vector<ModulatedField>& Rn,
                                     const spectral::SpaceTimeMollifier& moll) {
  MollifiedTriple out;
  out.base = moll.past_frames();
  const int frames = int(vn.size());
  if (frames - out.base < 3)
    throw seci_error("mollify_state: not enough frames for the kernel and the stencil");
  const std::vector<double>& w = moll.value_weights();
  for (int j = 0; j + out.base < frames; ++j) {
    int sj = j + out.base;
    out.v.push_back(mollify_combine(vn, sj, w, moll));
    out.q.push_back(mollify_combine(qn, sj, w, moll));
    out.R.push_back(mollify_combine(Rn, sj, w, moll));
  }
  return out;
}

struct WoFrame {
  ModulatedField w;
  std::vector<double> rho_tilde;  // per node
  std::vector<double> rho;        // rho_tilde + gamma(t)
  double ball_defect = 0.0;
  double max_rho = 0.0;

  explicit WoFrame(int n) : w(Shape::vector3, n) {}
};

// W(x, t, lambda phi_{n+1}, lambda t) as carrier sectors over the new flow,
// with amplitudes fed by the plain mollified state and the flow velocity
inline WoFrame build_wo_frame(const blocks::BeltramiSystem& sys,
                              const blocks::TransportCoeffSystem& psi,
                              const blocks::PumpState& pump, const ModulatedField& v_ell,
                              const ModulatedField& R_ell, const PhaseFrame& fr_new,
                              double t, int lambda) {
  const int n = v_ell.n();
  const std::int64_t n3 = std::int64_t(n) * n * n;

  std::array<std::vector<double>, 3> v_tilde;
  for (int a = 0; a < 3; ++a) {
    v_tilde[a] = v_ell.plain().component_samples(a);
    if (fr_new.moving())
      for (std::int64_t p = 0; p < n3; ++p) v_tilde[a][p] += fr_new.phidot[a * n3 + p];
  }

  std::vector<double> r_sym(6 * n3);
  for (int c = 0; c < 6; ++c) {
    std::vector<double> comp = R_ell.plain().component_samples(c);
    std::copy(comp.begin(), comp.end(), r_sym.begin() + c * n3);
  }

  WoFrame out(n);
  out.rho_tilde = blocks::rho_tilde_samples(r_sym, n3, pump.eta(), pump.delta_next(),
                                            pump.r0());
  out.rho = blocks::rho_samples(out.rho_tilde, pump.gamma(t));
  out.ball_defect = blocks::ball_defect(out.rho, r_sym);
  for (double v : out.rho) out.max_rho = std::max(out.max_rho, v);

  const double tau = double(lambda) * t;
  ModulatedField w(Shape::vector3, n);
  for (int j = 0; j < sys.family_count(); ++j) {
    std::array<std::vector<cplx>, 6> amp =
        blocks::family_amplitudes(sys, psi, j, out.rho, r_sym, v_tilde, tau);
    const std::array<blocks::BeltramiPair, 6>& fam = sys.family(j);
    for (int p = 0; p < 6; ++p) {
      double sup = 0.0;
      for (const cplx& a : amp[p]) sup = std::max(sup, std::abs(a));
      if (sup == 0.0) continue;
      std::array<cplx, 3> E = sys.E_of(fam[p].k);
      std::vector<cplx> env(3 * n3);
      for (int a = 0; a < 3; ++a)
        for (std::int64_t i = 0; i < n3; ++i) env[a * n3 + i] = amp[p][i] * E[a];
      SpectralField ef = SpectralField::from_complex_samples(Shape::vector3, n, env);
      IVec3 m{lambda * fam[p].k[0], lambda * fam[p].k[1], lambda * fam[p].k[2]};
      w.add_sector(PhaseKey{IVec3{0, 0, 0}, m}, ef);
      w.add_sector(PhaseKey{IVec3{0, 0, 0}, negate(m)},
                   ModulatedField::conj_envelope(ef));
    }
  }
  out.w = std::move(w);
  return out;
}

struct StepDiagnostics {
  double wo_sup = 0.0;
  double ball_defect = 0.0;
  double max_rho = 0.0;
  double misfit = 0.0;
  double residual_mean = 0.0;
  double q_mean_gap = 0.0;
  double closure_defect = 0.0;
  double stored_defect = 0.0;
  std::vector<double> energy;  // integral of |v_{n+1}|^2 per output frame
};

struct StepResult {
  EulerReynoldsState next;
  ErrorDecomposition errors;
  StepDiagnostics diag;
};

namespace detail {

inline std::vector<double> synth(const ModulatedField& f, const PhasePair& pp) {
  return real_node_values(f, pp);
}

inline PartRow part_row(const ModulatedField& rebased, const PhasePair& pp) {
  PartRow r;
  r.sup_norm = rebased.sup_bound();
  r.c1_norm = mod_c1_bound(rebased, pp);
  r.besov_m1 = mod_besov_m1(rebased, pp);
  return r;
}

}  // namespace detail

// One full convex-integration step.  The state must carry enough history for
// the one-sided kernel; the two flows live on the state's frame grid.
inline StepResult ci_step(const EulerReynoldsState& st, const PhaseBook& book_o,
                          const flow::FlowMap& flow_new, const PhaseBook& book_n,
                          const blocks::BeltramiSystem& sys, const StepConfig& cfg) {
  if (st.n != flow_new.n || st.frame_count() != flow_new.frame_count() ||
      std::abs(st.t0 - flow_new.t0) > 1e-12 || std::abs(st.dt - flow_new.dt) > 1e-12)
    throw seci_error("ci_step: state and new flow disagree on the frame grid");
  if (!cfg.e_profile) throw seci_error("ci_step: missing energy profile");

  const int n = st.n;
  const double dt = st.dt;
  const std::int64_t n3 = std::int64_t(n) * n * n;
  const int sframes = st.frame_count();

  spectral::SpaceTimeMollifier moll(n, cfg.ell, dt);
  const int base = moll.past_frames();
  const int oframes = sframes - base;
  if (oframes < 3) throw seci_error("ci_step: not enough frames after the kernel margin");
  const double out_t0 = st.time(base);

  // level-n fields in step keys, their squares, and their flat defect
  std::vector<ModulatedField> vn, qn, Rn, vnvn, spat_n;
  vn.reserve(sframes);
  for (int i = 0; i < sframes; ++i) {
    vn.push_back(rekey_old(st.frames[i].v));
    qn.push_back(rekey_old(st.frames[i].q));
    Rn.push_back(rekey_old(st.frames[i].R));
  }
  for (int i = 0; i < sframes; ++i) {
    PhasePair pp{&book_o.frame(i), &book_n.frame(i)};
    const PhaseFrame& fr0 = book_o.frame(i);
    vnvn.push_back(mod_outer(vn[i], vn[i], cfg.prune_tol));
    ModulatedField sp = local_div(vnvn[i], fr0, pp);
    sp += local_grad(qn[i], fr0, pp);
    sp -= local_div(Rn[i], fr0, pp);
    spat_n.push_back(std::move(sp));
  }

  MollifiedTriple ml = mollify_state(vn, qn, Rn, moll);
  std::vector<ModulatedField> Mvv, Mspat;
  for (int j = 0; j < oframes; ++j) {
    Mvv.push_back(mollify_combine(vnvn, j + base, moll.value_weights(), moll));
    Mspat.push_back(mollify_combine(spat_n, j + base, moll.value_weights(), moll));
  }

  // energy pump over the mollified velocity
  auto v_ell_energy = [&](double t) {
    double x = (t - out_t0) / dt;
    int j = int(std::floor(x));
    if (j < 0) return mod_energy(ml.v.front());
    if (j >= oframes - 1) return mod_energy(ml.v.back());
    double a = x - j;
    return (1.0 - a) * mod_energy(ml.v[j]) + a * mod_energy(ml.v[j + 1]);
  };
  blocks::PumpConfig pc;
  pc.e_profile = cfg.e_profile;
  pc.v_ell_energy = v_ell_energy;
  pc.delta_next = cfg.delta_next;
  pc.eta = cfg.eta;
  pc.r0 = sys.r0();
  pc.t_stop = cfg.t_stop;
  pc.t_lo = cfg.t_lo;
  pc.dt_sample = cfg.pump_dt_sample;
  blocks::PumpState pump(std::move(pc));

  blocks::TransportCoeffSystem psi(cfg.mu);

  // perturbation and correctors per output frame
  std::vector<WoFrame> wof;
  std::vector<ModulatedField> wo, wc1, wc1_dt, wc2, wc, v1;
  std::vector<ModulatedField> qv;  // Q^{phi_n} v_n at state frames
  for (int i = 0; i < sframes; ++i) {
    PhasePair pp{&book_o.frame(i), &book_n.frame(i)};
    qv.push_back(mod_leray_Q(vn[i], book_o.frame(i), pp));
  }
  for (int j = 0; j < oframes; ++j) {
    int sj = j + base;
    PhasePair pp{&book_o.frame(sj), &book_n.frame(sj)};
    wof.push_back(build_wo_frame(sys, psi, pump, ml.v[j], ml.R[j], book_n.frame(sj),
                                 out_t0 + j * dt, cfg.lambda));
    wo.push_back(wof[j].w);
    ModulatedField a = mollify_combine(qv, sj, moll.value_weights(), moll);
    a *= -1.0;
    wc1.push_back(std::move(a));
    ModulatedField b = mollify_combine(qv, sj, moll.dt_weights(), moll);
    b *= -1.0;
    wc1_dt.push_back(std::move(b));
    ModulatedField c = mod_leray_Q(wo[j], book_n.frame(sj), pp);
    c *= -1.0;
    wc2.push_back(std::move(c));
    ModulatedField sum = wc1[j];
    sum += wc2[j];
    wc.push_back(std::move(sum));
    ModulatedField v = ml.v[j];
    v += wo[j];
    v += wc[j];
    v1.push_back(std::move(v));
  }

  static const std::array<const char*, 7> part_names = {
      "transport",     "mollification_I", "mollification_II", "oscillation",
      "flow_error",    "compressibility", "inherited"};

  StepResult res;
  res.errors.parts.resize(part_names.size());
  for (std::size_t p = 0; p < part_names.size(); ++p) {
    res.errors.parts[p].name = part_names[p];
    res.errors.parts[p].field = spectral::SpaceTimeField{out_t0, dt, {}};
    res.errors.parts[p].r_image = spectral::SpaceTimeField{out_t0, dt, {}};
  }
  res.errors.total = spectral::SpaceTimeField{out_t0, dt, {}};

  EulerReynoldsState next;
  next.level = st.level + 1;
  next.n = n;
  next.t0 = out_t0;
  next.dt = dt;
  next.residual_tol = cfg.residual_tol;

  std::vector<int> fidx;
  std::vector<double> fw;
  auto dmf = [&](const std::vector<ModulatedField>& seq, int j, const PhasePair& pp) {
    fd_stencil(j, oframes, dt, fidx, fw);
    std::vector<const ModulatedField*> win(fidx.size());
    for (std::size_t s = 0; s < fidx.size(); ++s) win[s] = &seq[fidx[s]];
    return mod_time_derivative(win, fw, seq[j], pp);
  };

  for (int j = 0; j < oframes; ++j) {
    int sj = j + base;
    PhasePair pp{&book_o.frame(sj), &book_n.frame(sj)};
    const PhaseFrame& fr0 = book_o.frame(sj);
    const PhaseFrame& fr1 = book_n.frame(sj);

    ModulatedField dt_vl = dmf(ml.v, j, pp);
    ModulatedField dt_wo = dmf(wo, j, pp);
    ModulatedField dt_wc = dmf(wc2, j, pp);
    dt_wc += wc1_dt[j];

    const ModulatedField* u3[3] = {&ml.v[j], &wo[j], &wc[j]};
    std::array<std::array<ModulatedField*, 3>, 3> douter{};
    std::vector<ModulatedField> douter_store;
    douter_store.reserve(9);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        douter_store.push_back(div_outer(*u3[a], *u3[b], fr1, pp, cfg.prune_tol));
        douter[a][b] = &douter_store.back();
      }

    ModulatedField div1_vl = local_div(ml.v[j], fr1, pp);
    ModulatedField wo_div1vl = mod_scale(div1_vl, wo[j], cfg.prune_tol);
    ModulatedField grad1_ql = local_grad(ml.q[j], fr1, pp);
    ModulatedField grad0_ql = local_grad(ml.q[j], fr0, pp);
    ModulatedField div1_Rl = local_div(ml.R[j], fr1, pp);
    ModulatedField div0_Rl = local_div(ml.R[j], fr0, pp);
    ModulatedField div1_Mvv = local_div(Mvv[j], fr1, pp);
    ModulatedField div0_Mvv = local_div(Mvv[j], fr0, pp);

    ModulatedField wo2 = mod_dot(wo[j], wo[j], cfg.prune_tol);
    ModulatedField P(Shape::scalar, n);
    {
      std::vector<double> rt = wof[j].rho_tilde;
      P.set_plain(SpectralField::from_samples(Shape::scalar, n, rt));
      P *= -1.0;
      P += wo2;
      P *= 0.5;
    }
    ModulatedField grad1_P = local_grad(P, fr1, pp);

    // the seven rows; every operand above is shared with the total
    std::vector<ModulatedField> parts;
    parts.reserve(7);
    {
      ModulatedField t = dt_wo;
      t += *douter[1][0];
      t -= wo_div1vl;
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = *douter[0][0];
      t -= div1_Mvv;
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = div0_Mvv;
      t += grad0_ql;
      t -= div0_Rl;
      t -= Mspat[j];
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = *douter[1][1];
      t -= grad1_P;
      t += div1_Rl;
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = div1_Mvv;
      t -= div0_Mvv;
      t += grad1_ql;
      t -= grad0_ql;
      t -= div1_Rl;
      t += div0_Rl;
      t += wo_div1vl;
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = dt_wc;
      for (int b = 0; b < 3; ++b) t += *douter[2][b];  // (wc, *)
      t += *douter[0][2];                              // (vl, wc)
      t += *douter[1][2];                              // (wo, wc)
      t -= *douter[2][2];                              // minus (wc, wc)
      t += *douter[0][1];                              // (vl, wo)
      parts.push_back(std::move(t));
    }
    {
      ModulatedField t = dt_vl;
      t += Mspat[j];
      parts.push_back(std::move(t));
    }

    ModulatedField total = dt_vl;
    total += dt_wo;
    total += dt_wc;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) total += *douter[a][b];
    total += grad1_ql;
    total -= grad1_P;

    // node-level identity check and field storage
    std::vector<double> tot_nodes = detail::synth(total, pp);
    {
      std::vector<double> acc(3 * n3, 0.0);
      for (std::size_t p = 0; p < parts.size(); ++p) {
        std::vector<double> pn = detail::synth(parts[p], pp);
        for (std::int64_t e = 0; e < 3 * n3; ++e) acc[e] += pn[e];
        res.errors.parts[p].field.frames.push_back(
            SpectralField::from_samples(Shape::vector3, n, pn));
      }
      double mis = 0.0;
      for (std::int64_t e = 0; e < 3 * n3; ++e)
        mis = std::max(mis, std::abs(acc[e] - tot_nodes[e]));
      res.errors.misfit = std::max(res.errors.misfit, mis);
      res.errors.total.frames.push_back(
          SpectralField::from_samples(Shape::vector3, n, tot_nodes));
    }

    Vec3 tmean = mod_mean3(total);
    double mean_mag =
        std::max(std::abs(tmean[0]), std::max(std::abs(tmean[1]), std::abs(tmean[2])));
    res.errors.residual_mean = std::max(res.errors.residual_mean, mean_mag);
    if (mean_mag > cfg.residual_mean_tol)
      throw seci_error("assemble_next: residual mean exceeds tolerance");

    // per-part norms and optional inverse-divergence images
    for (std::size_t p = 0; p < parts.size(); ++p) {
      ModulatedField rb = rebase_to_new(parts[p], pp, cfg.measure_rebase_defect);
      res.errors.parts[p].rows.push_back(detail::part_row(rb, pp));
      if (cfg.r_images) {
        ModulatedField img = mod_inverse_R(rb, fr1, pp);
        res.errors.parts[p].rows_r.push_back(detail::part_row(img, pp));
        res.errors.parts[p].r_image.frames.push_back(
            SpectralField::from_samples(Shape::vector3, n, detail::synth(img, pp)));
      }
    }

    // new stress, pressure, velocity
    ModulatedField total_rb = rebase_to_new(total, pp, cfg.measure_rebase_defect);
    ModulatedField R1 = mod_inverse_R(total_rb, fr1, pp);
    R1.prune(1e-300);
    R1.cap(cfg.cap_qr);

    ModulatedField q1 = ml.q[j];
    q1 -= P;
    {
      Vec3 dummy{};
      (void)dummy;
      double want = ml.q[j].plain().component_mean(0) - P.plain().component_mean(0);
      double got = q1.plain().component_mean(0);
      res.diag.q_mean_gap = std::max(res.diag.q_mean_gap, std::abs(got - want));
    }
    ModulatedField q1s = rebase_to_new(q1, pp, cfg.measure_rebase_defect);
    q1s.prune(1e-300);
    q1s.cap(cfg.cap_qr);

    ModulatedField v1s = rebase_to_new(v1[j], pp, cfg.measure_rebase_defect);
    v1s.prune(1e-300);
    v1s.cap(cfg.cap_v);

    res.diag.wo_sup = std::max(res.diag.wo_sup, wo[j].sup_bound(false));
    res.diag.ball_defect = std::max(res.diag.ball_defect, wof[j].ball_defect);
    res.diag.max_rho = std::max(res.diag.max_rho, wof[j].max_rho);
    res.diag.closure_defect = std::max(res.diag.closure_defect, v1s.closure_defect());
    res.diag.stored_defect =
        std::max(res.diag.stored_defect,
                 std::max(v1s.defect(), std::max(q1s.defect(), R1.defect())));
    res.diag.energy.push_back(mod_energy(v1s));

    next.frames.emplace_back(std::move(v1s), std::move(q1s), std::move(R1));
  }

  res.diag.misfit = res.errors.misfit;
  res.diag.residual_mean = res.errors.residual_mean;

  // the new state's flow is the tail of the new-level flow
  next.flow = flow_new;
  next.flow.t0 = out_t0;
  next.flow.frames.assign(flow_new.frames.begin() + base, flow_new.frames.end());

  PhaseBook book_next(next.flow);
  for (int j = 0; j < oframes; ++j) next.mean_v.push_back(mod_mean3(next.frames[j].v));
  next.divergence_report = divergence_report_of(next, book_next);
  next.residual_sup = state_residual_sup(next, book_next);
  next.defect = st.defect;
  for (const StateFrame& f : next.frames)
    next.defect = std::max(next.defect,
                           std::max(f.v.defect(), std::max(f.q.defect(), f.R.defect())));
  if (cfg.validate_output) validate_state(next, book_next);

  res.next = std::move(next);
  return res;
}

}  // namespace seci::step
