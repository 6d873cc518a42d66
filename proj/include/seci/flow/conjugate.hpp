#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/flow/flowmap.hpp"
#include "seci/spectral/field.hpp"
#include "seci/spectral/nufft.hpp"
#include "seci/spectral/ops.hpp"

namespace seci::flow {

using spectral::Shape;
using spectral::SpectralField;

// One time slice of a flow, with everything the conjugated operators need.
// A trivial slice short-circuits every operator to its flat version.
class FlowSlice {
 public:
  FlowSlice(const FlowFrame& frame, const Nufft& plan)
      : fwd_(&frame.disp_fwd), inv_(&frame.disp_inv), plan_(&plan) {
    trivial_ = all_zero(*fwd_) && all_zero(*inv_);
  }

  // The slice aliases the frame's displacement fields; a temporary would dangle.
  FlowSlice(FlowFrame&&, const Nufft&) = delete;

  static FlowSlice identity(const Nufft& plan) { return FlowSlice(plan); }

  bool trivial() const { return trivial_; }
  const SpectralField& disp_fwd() const { return *fwd_; }
  const SpectralField& disp_inv() const { return *inv_; }
  const Nufft& plan() const { return *plan_; }
  int n() const { return plan_->n(); }

  // Spreading stencil at the displaced nodes, built once per slice.
  const Nufft::PointPlan& points_fwd() const {
    if (pp_fwd_.count == 0) pp_fwd_ = plan_->prepare(displaced_nodes(*fwd_));
    return pp_fwd_;
  }

  const Nufft::PointPlan& points_inv() const {
    if (pp_inv_.count == 0) pp_inv_ = plan_->prepare(displaced_nodes(*inv_));
    return pp_inv_;
  }

  // Inverse transpose of grad phi at every node, row-major.
  const std::vector<Mat3>& grad_inv_T() const {
    if (ginv_.empty()) {
      std::int64_t n3 = std::int64_t(n()) * n() * n();
      ginv_.resize(n3, mat3_identity());
      if (!trivial_) {
        std::array<std::vector<double>, 9> dd;
        for (int a = 0; a < 3; ++a) {
          SpectralField comp = spectral::component_field(*fwd_, a);
          for (int b = 0; b < 3; ++b) dd[3 * a + b] = spectral::partial(comp, b).component_samples(0);
        }
        for (std::int64_t p = 0; p < n3; ++p) {
          Mat3 g = mat3_identity();
          for (int e = 0; e < 9; ++e) g[e] += dd[e][p];
          Mat3 gi = inv3(g);
          Mat3& out = ginv_[p];
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out[3 * r + c] = gi[3 * c + r];
        }
      }
    }
    return ginv_;
  }

 private:
  explicit FlowSlice(const Nufft& plan)
      : owned_zero_(SpectralField(Shape::vector3, plan.n())), plan_(&plan), trivial_(true) {
    fwd_ = &*owned_zero_;
    inv_ = &*owned_zero_;
  }

  static bool all_zero(const SpectralField& f) {
    for (const cplx& c : f.data())
      if (c != cplx{0.0, 0.0}) return false;
    return true;
  }

  static std::vector<Vec3> displaced_nodes(const SpectralField& disp) {
    std::vector<Vec3> pts = FlowMap::grid_nodes(disp.n());
    std::int64_t n3 = static_cast<std::int64_t>(pts.size());
    for (int a = 0; a < 3; ++a) {
      std::vector<double> d = disp.component_samples(a);
      for (std::int64_t p = 0; p < n3; ++p) pts[p][a] += d[p];
    }
    return pts;
  }

  std::optional<SpectralField> owned_zero_;
  const SpectralField* fwd_ = nullptr;
  const SpectralField* inv_ = nullptr;
  const Nufft* plan_ = nullptr;
  bool trivial_ = false;
  mutable std::vector<Mat3> ginv_;
  mutable Nufft::PointPlan pp_fwd_;
  mutable Nufft::PointPlan pp_inv_;
};

namespace detail {

inline SpectralField compose_prepared(const SpectralField& f, const Nufft::PointPlan& pts, const Nufft& plan) {
  std::vector<cplx> vals = plan.eval(f, pts);
  if (f.is_real()) {
    std::vector<double> samples(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) samples[i] = vals[i].real();
    return SpectralField::from_samples(f.shape(), f.n(), samples);
  }
  return SpectralField::from_complex_samples(f.shape(), f.n(), std::move(vals));
}

}  // namespace detail

// f composed with the flow: samples f(x + disp_fwd(x)).
inline SpectralField compose_forward(const SpectralField& f, const FlowSlice& s) {
  if (s.trivial()) return f;
  return detail::compose_prepared(f, s.points_fwd(), s.plan());
}

// f composed with the inverse flow: samples f(x + disp_inv(x)).
inline SpectralField compose_inverse(const SpectralField& f, const FlowSlice& s) {
  if (s.trivial()) return f;
  return detail::compose_prepared(f, s.points_inv(), s.plan());
}

// Conjugated derivatives are pointwise: the chain rule turns the composition
// sandwich into a contraction against (grad phi)^{-T} at each node, so no
// resampling is involved.
inline SpectralField grad_phi(const SpectralField& f, const FlowSlice& s) {
  if (f.shape() != Shape::scalar) throw seci_error("grad_phi expects a scalar field");
  if (s.trivial()) return spectral::gradient(f);
  const std::vector<Mat3>& gt = s.grad_inv_T();
  std::int64_t n3 = f.modes();
  std::array<std::vector<double>, 3> df;
  for (int b = 0; b < 3; ++b) df[b] = spectral::partial(f, b).component_samples(0);
  std::vector<double> samples(3 * n3);
  for (std::int64_t p = 0; p < n3; ++p)
    for (int i = 0; i < 3; ++i) {
      const Mat3& m = gt[p];
      samples[i * n3 + p] = m[3 * i + 0] * df[0][p] + m[3 * i + 1] * df[1][p] + m[3 * i + 2] * df[2][p];
    }
  return SpectralField::from_samples(Shape::vector3, f.n(), samples);
}

inline SpectralField div_phi(const SpectralField& f, const FlowSlice& s) {
  if (s.trivial()) return spectral::divergence(f);
  const std::vector<Mat3>& gt = s.grad_inv_T();
  std::int64_t n3 = f.modes();
  if (f.shape() == Shape::vector3) {
    std::array<std::array<std::vector<double>, 3>, 3> d;  // d[k][i] = partial_k f_i
    for (int i = 0; i < 3; ++i) {
      SpectralField comp = spectral::component_field(f, i);
      for (int k = 0; k < 3; ++k) d[k][i] = spectral::partial(comp, k).component_samples(0);
    }
    std::vector<double> samples(n3);
    for (std::int64_t p = 0; p < n3; ++p) {
      const Mat3& m = gt[p];
      double acc = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) acc += m[3 * i + k] * d[k][i][p];
      samples[p] = acc;
    }
    return SpectralField::from_samples(Shape::scalar, f.n(), samples);
  }
  if (f.shape() == Shape::symmat3) {
    std::vector<double> samples(3 * n3);
    for (int i = 0; i < 3; ++i) {
      std::array<std::array<std::vector<double>, 3>, 3> d;  // d[k][j] = partial_k S_{ij}
      for (int j = 0; j < 3; ++j) {
        SpectralField comp = spectral::component_field(f, spectral::sym_index(i, j));
        for (int k = 0; k < 3; ++k) d[k][j] = spectral::partial(comp, k).component_samples(0);
      }
      for (std::int64_t p = 0; p < n3; ++p) {
        const Mat3& m = gt[p];
        double acc = 0.0;
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k) acc += m[3 * j + k] * d[k][j][p];
        samples[i * n3 + p] = acc;
      }
    }
    return SpectralField::from_samples(Shape::vector3, f.n(), samples);
  }
  throw seci_error("div_phi expects a vector or matrix field");
}

inline SpectralField curl_phi(const SpectralField& v, const FlowSlice& s) {
  if (v.shape() != Shape::vector3) throw seci_error("curl_phi expects a vector field");
  const std::vector<Mat3>* gt = s.trivial() ? nullptr : &s.grad_inv_T();
  std::int64_t n3 = v.modes();
  std::array<std::array<std::vector<double>, 3>, 3> d;  // d[k][i] = partial_k v_i
  for (int i = 0; i < 3; ++i) {
    SpectralField comp = spectral::component_field(v, i);
    for (int k = 0; k < 3; ++k) d[k][i] = spectral::partial(comp, k).component_samples(0);
  }
  std::vector<double> samples(3 * n3);
  for (std::int64_t p = 0; p < n3; ++p) {
    Mat3 m = gt ? (*gt)[p] : mat3_identity();
    // dphi[j][i] = conjugated partial_j of v_i at p.
    Mat3 dphi{};
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
        dphi[3 * j + i] = m[3 * j + 0] * d[0][i][p] + m[3 * j + 1] * d[1][i][p] + m[3 * j + 2] * d[2][i][p];
    samples[0 * n3 + p] = dphi[3 * 1 + 2] - dphi[3 * 2 + 1];
    samples[1 * n3 + p] = dphi[3 * 2 + 0] - dphi[3 * 0 + 2];
    samples[2 * n3 + p] = dphi[3 * 0 + 1] - dphi[3 * 1 + 0];
  }
  return SpectralField::from_samples(Shape::vector3, v.n(), samples);
}

// Zero-mean u with laplace_phi(u) = f - mean; the solve happens in the flat
// frame reached through the inverse flow.
inline SpectralField laplace_phi_solve(const SpectralField& f, const FlowSlice& s) {
  if (s.trivial()) return spectral::inverse_laplacian(f);
  SpectralField flat = compose_inverse(f, s);
  return compose_forward(spectral::inverse_laplacian(flat), s);
}

inline SpectralField Q_phi(const SpectralField& v, const FlowSlice& s) {
  if (s.trivial()) return spectral::leray_Q(v);
  SpectralField flat = compose_inverse(v, s);
  return compose_forward(spectral::leray_Q(flat), s);
}

inline SpectralField P_phi(const SpectralField& v, const FlowSlice& s) { return v - Q_phi(v, s); }

inline SpectralField R_phi(const SpectralField& v, const FlowSlice& s) {
  if (s.trivial()) return spectral::inverse_divergence_R(v);
  SpectralField flat = compose_inverse(v, s);
  return compose_forward(spectral::inverse_divergence_R(flat), s);
}

}  // namespace seci::flow
