#pragma once

#include <cmath>
#include <vector>

#include "srf/gamma.hpp"

namespace srf {

enum class Direction { forward, adjoint };

/// One propagator solve. Trajectories (one field matrix per grid time
/// between s and t) are stored on request; columns are independent inputs.
struct PropagatorRun {
  double s = 0.0, t = 0.0;
  int i_s = 0, i_t = 0;
  Direction direction = Direction::forward;
  Mat initial;  // boundary data (at s for forward, at t for adjoint)
  Mat final;    // result (at t for forward, at s for adjoint)
  std::vector<Mat> trajectory;  // index j <-> grid time i_s + j; empty unless stored
  int substeps = 0;
  int max_truncation_order = 0;

  const Mat& at_index(int grid_index) const {
    return trajectory.at(static_cast<std::size_t>(grid_index - i_s));
  }
};

namespace detail {

template <class ApplyFn>
Mat counted_exp(ApplyFn&& apply, double rate, double r, Mat U, int& max_order) {
  // same as uniformized_exp but tracks the truncation order
  int order = 0;
  auto counting = [&](const Mat& V) {
    ++order;
    return apply(V);
  };
  Mat out = uniformized_exp(counting, rate, r, std::move(U));
  max_order = std::max(max_order, order);
  return out;
}

}  // namespace detail

/// Heat propagator P_{t,s}: integrates du/dr = Delta_r u from s to t with
/// per-substep uniformization of the midpoint-frozen generator. Constants
/// and positivity are preserved to rounding.
inline PropagatorRun forward(const FlowSpec& flow, double s, double t, Mat u,
                             bool store_trajectory = false) {
  int is = flow.grid.index_of(s), it = flow.grid.index_of(t);
  if (is >= it) throw DomainError("forward: need s < t on the grid");
  const double dt = flow.grid.dt();

  PropagatorRun run;
  run.s = s;
  run.t = t;
  run.i_s = is;
  run.i_t = it;
  run.direction = Direction::forward;
  run.initial = u;
  if (store_trajectory) run.trajectory.push_back(u);

  for (int j = is; j < it; ++j) {
    double mid = flow.grid.time(j) + 0.5 * dt;
    GeneratorSnapshot snap = snapshot_at(flow, mid);
    auto apply = [&snap](const Mat& U) {
      Mat out(U.rows(), U.cols());
      for (int c = 0; c < U.cols(); ++c) out.col(c) = snap.apply(U.col(c));
      return out;
    };
    u = detail::counted_exp(apply, snap.max_rate(), dt, std::move(u),
                            run.max_truncation_order);
    ++run.substeps;
    if (store_trajectory) run.trajectory.push_back(u);
  }
  run.final = std::move(u);
  return run;
}

inline PropagatorRun forward(const FlowSpec& flow, double s, double t, const Field& u,
                             bool store_trajectory = false) {
  Mat U(u.size(), 1);
  U.col(0) = u;
  return forward(flow, s, t, std::move(U), store_trajectory);
}

/// Adjoint propagator P*_{t,s}: integrates dv/ds = -Delta_s v + v df/ds
/// backward from t to s with the midpoint-frozen operator
/// (Delta - df/ds). The rate df/ds uses the central stencil about the
/// substep midpoint.
inline PropagatorRun adjoint(const FlowSpec& flow, double t, double s, Mat g,
                             bool store_trajectory = false) {
  int is = flow.grid.index_of(s), it = flow.grid.index_of(t);
  if (is >= it) throw DomainError("adjoint: need s < t on the grid");
  const double dt = flow.grid.dt();

  PropagatorRun run;
  run.s = s;
  run.t = t;
  run.i_s = is;
  run.i_t = it;
  run.direction = Direction::adjoint;
  run.initial = g;
  if (store_trajectory) run.trajectory.assign(static_cast<std::size_t>(it - is + 1), Mat());
  if (store_trajectory) run.trajectory.back() = g;

  for (int j = it; j > is; --j) {
    double mid = flow.grid.time(j) - 0.5 * dt;
    GeneratorSnapshot snap = snapshot_at(flow, mid);
    Vec fdot = flow.logdensity_rate(mid, 0.5 * dt);
    auto apply = [&snap, &fdot](const Mat& U) {
      Mat out(U.rows(), U.cols());
      for (int c = 0; c < U.cols(); ++c)
        out.col(c) = snap.apply(U.col(c)) - fdot.cwiseProduct(U.col(c));
      return out;
    };
    double rate = std::max(snap.max_rate() + fdot.maxCoeff(), 1e-12);
    g = detail::counted_exp(apply, rate, dt, std::move(g), run.max_truncation_order);
    ++run.substeps;
    if (store_trajectory) run.trajectory[static_cast<std::size_t>(j - 1 - is)] = g;
  }
  run.final = std::move(g);
  return run;
}

inline PropagatorRun adjoint(const FlowSpec& flow, double t, double s, const Field& g,
                             bool store_trajectory = false) {
  Mat G(g.size(), 1);
  G.col(0) = g;
  return adjoint(flow, t, s, std::move(G), store_trajectory);
}

/// Absolute defect of  int P_{t,s}h g dm_t = int h P*_{t,s}g dm_s.
inline double duality_check(const FlowSpec& flow, double s, double t, const Field& h,
                            const Field& g) {
  Field ph = forward(flow, s, t, h).final.col(0);
  Field pg = adjoint(flow, t, s, g).final.col(0);
  double lhs = integrate(ph.cwiseProduct(g), flow.measure_any(t));
  double rhs = integrate(h.cwiseProduct(pg), flow.measure_any(s));
  return std::abs(lhs - rhs);
}

/// Dual propagator on probability measures: (P*_{t,s}(dmu/dm_t)) m_s,
/// renormalized; the renormalization defect measures integrator error.
struct DualMeasureResult {
  ProbabilityMeasure measure;
  double renormalization_defect = 0.0;
};

inline DualMeasureResult dual_on_measures(const FlowSpec& flow, double t, double s,
                                          const ProbabilityMeasure& mu) {
  Measure mt = flow.measure_any(t);
  for (int x = 0; x < mt.size(); ++x)
    if (!(mt(x) > 0.0)) throw StructuralError("dual_on_measures: zero m_t weight");
  Field density = mu.weights.cwiseQuotient(mt.weights);
  Field v = adjoint(flow, t, s, density).final.col(0);
  Vec w = v.cwiseProduct(flow.measure_any(s).weights);
  DualMeasureResult out;
  out.renormalization_defect = std::abs(w.sum() - 1.0);
  out.measure = ProbabilityMeasure::normalized(w);
  return out;
}

/// ||u||_{L^p(m)} for p in [1, inf); p = inf handled by the caller via maxCoeff.
inline double lp_norm(const Field& u, const Measure& m, double p) {
  return std::pow(u.array().abs().pow(p).matrix().dot(m.weights), 1.0 / p);
}

/// Energy-dissipation report along a stored forward run:
/// int_s^t int |Delta_r u_r|^2 dm_r dr <= C (E_s(u_s) - E_t(u_t)).
struct RegularityReport {
  double dissipation_integral = 0.0;
  double energy_drop = 0.0;
  double smallest_C = 0.0;
  bool violation = false;  // no admissible C <= e^{10 L (t-s)}
};

inline RegularityReport regularity_report(const FlowSpec& flow, const PropagatorRun& run) {
  if (run.direction != Direction::forward || run.trajectory.empty())
    throw DomainError("regularity_report: needs a stored forward run");
  RegularityReport rep;
  const double dt = flow.grid.dt();
  for (int j = run.i_s; j <= run.i_t; ++j) {
    GeneratorSnapshot snap = snapshot_at(flow, flow.grid.time(j));
    Field du = snap.apply(run.at_index(j).col(0));
    double val = integrate(du.cwiseProduct(du), snap.m);
    double wq = (j == run.i_s || j == run.i_t) ? 0.5 * dt : dt;  // trapezoid
    rep.dissipation_integral += wq * val;
  }
  GeneratorSnapshot ss = snapshot_at(flow, run.s);
  GeneratorSnapshot st = snapshot_at(flow, run.t);
  rep.energy_drop = dirichlet_form(ss, run.initial.col(0)) -
                    dirichlet_form(st, run.final.col(0));
  double cap = std::exp(10.0 * flow.lipschitz * (run.t - run.s));
  if (rep.dissipation_integral <= 1e-14 * std::max(1.0, rep.energy_drop)) {
    rep.smallest_C = 0.0;
  } else if (rep.energy_drop > 0.0) {
    rep.smallest_C = rep.dissipation_integral / rep.energy_drop;
    rep.violation = rep.smallest_C > cap;
  } else {
    rep.violation = true;
  }
  return rep;
}

/// Relative defect of the exact variance identity
///   int g ((P_{t,s}u)^2 - P_{t,s}(u^2)) dm_t
///     = -2 int_s^t int P*_{t,r} g  Gamma_r(P_{r,s}u) dm_r dr
/// with trapezoidal quadrature in r. Holds for every Dirichlet form.
inline double variance_identity_defect(const FlowSpec& flow, double s, double t,
                                       const Field& u, const Field& g) {
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u);
  PropagatorRun fwd = forward(flow, s, t, std::move(U), true);
  PropagatorRun adj = adjoint(flow, t, s, g, true);

  Field pu = fwd.final.col(0);
  Field pu2 = fwd.final.col(1);
  double lhs = integrate(g.cwiseProduct(pu.cwiseProduct(pu) - pu2), flow.measure_any(t));

  const double dt = flow.grid.dt();
  double rhs = 0.0;
  for (int j = fwd.i_s; j <= fwd.i_t; ++j) {
    GeneratorSnapshot snap = snapshot_at(flow, flow.grid.time(j));
    Field gr = adj.at_index(j).col(0);
    Field gam = gamma(snap, fwd.at_index(j).col(0));
    double wq = (j == fwd.i_s || j == fwd.i_t) ? 0.5 * dt : dt;
    rhs += wq * integrate(gr.cwiseProduct(gam), snap.m);
  }
  rhs *= -2.0;
  double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

}  // namespace srf
