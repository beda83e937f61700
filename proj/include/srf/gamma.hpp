#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "srf/flow.hpp"

namespace srf {

/// Frozen-time generator: Delta_t u(x) = (1/m_t(x)) sum_y c_t(x,y) (u(y)-u(x)).
struct GeneratorSnapshot {
  double t = 0.0;
  Measure m;
  std::vector<std::pair<int, int>> edges;
  Vec cond;  // conductance per edge

  int n() const { return m.size(); }

  Field apply(const Field& u) const {
    Field out = Field::Zero(n());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [a, b] = edges[e];
      double flux = cond[e] * (u[b] - u[a]);
      out[a] += flux;
      out[b] -= flux;
    }
    out.array() /= m.weights.array();
    return out;
  }

  /// max_x (sum_y c(x,y)) / m(x), the uniformization rate of -Delta.
  double max_rate() const {
    Vec deg = Vec::Zero(n());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      deg[edges[e].first] += cond[e];
      deg[edges[e].second] += cond[e];
    }
    return (deg.array() / m.weights.array()).maxCoeff();
  }

  std::vector<std::vector<std::pair<int, double>>> adjacency() const {
    std::vector<std::vector<std::pair<int, double>>> adj(n());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].first].emplace_back(edges[e].second, cond[e]);
      adj[edges[e].second].emplace_back(edges[e].first, cond[e]);
    }
    return adj;
  }
};

inline GeneratorSnapshot snapshot_at(const FlowSpec& flow, double t) {
  GeneratorSnapshot s;
  s.t = t;
  s.m = flow.measure_any(t);
  s.edges = flow.edges;
  s.cond = flow.conductances(t);
  return s;
}

/// Grid-aligned snapshot.
inline GeneratorSnapshot snapshot(const FlowSpec& flow, double t) {
  flow.grid.index_of(t);
  return snapshot_at(flow, t);
}

/// E_t(u,v) = 1/2 sum_{x,y} c_t(x,y) (u(x)-u(y)) (v(x)-v(y)).
inline double dirichlet_form(const GeneratorSnapshot& snap, const Field& u, const Field& v) {
  double s = 0.0;
  for (std::size_t e = 0; e < snap.edges.size(); ++e) {
    auto [a, b] = snap.edges[e];
    s += snap.cond[e] * (u[a] - u[b]) * (v[a] - v[b]);
  }
  return s;
}

inline double dirichlet_form(const GeneratorSnapshot& snap, const Field& u) {
  return dirichlet_form(snap, u, u);
}

/// Square field: Gamma_t(u,v)(x) = (1/(2 m_t(x))) sum_y c_t(x,y)(u(y)-u(x))(v(y)-v(x)).
inline Field gamma(const GeneratorSnapshot& snap, const Field& u, const Field& v) {
  Field out = Field::Zero(snap.n());
  for (std::size_t e = 0; e < snap.edges.size(); ++e) {
    auto [a, b] = snap.edges[e];
    double q = snap.cond[e] * (u[b] - u[a]) * (v[b] - v[a]);
    out[a] += q;
    out[b] += q;
  }
  out.array() /= 2.0 * snap.m.weights.array();
  return out;
}

inline Field gamma(const GeneratorSnapshot& snap, const Field& u) { return gamma(snap, u, u); }

/// The three summands of the distribution-valued Gamma_2 form and their sum:
/// 1/2 int Gamma(u) Delta g + int (Delta u)^2 g + int Gamma(u,g) Delta u  dm.
struct Gamma2Evaluation {
  double part_gamma_dg = 0.0;   // 1/2 int Gamma(u) Delta g dm
  double part_lap_sq = 0.0;     // int (Delta u)^2 g dm
  double part_mixed = 0.0;      // int Gamma(u,g) Delta u dm
  double value = 0.0;
};

inline Gamma2Evaluation gamma2_form(const GeneratorSnapshot& snap, const Field& u,
                                    const Field& g) {
  Gamma2Evaluation ev;
  Field du = snap.apply(u);
  Field dg = snap.apply(g);
  ev.part_gamma_dg = 0.5 * integrate(gamma(snap, u).cwiseProduct(dg), snap.m);
  ev.part_lap_sq = integrate(du.cwiseProduct(du).cwiseProduct(g), snap.m);
  ev.part_mixed = integrate(gamma(snap, u, g).cwiseProduct(du), snap.m);
  ev.value = ev.part_gamma_dg + ev.part_lap_sq + ev.part_mixed;
  return ev;
}

/// Pointwise companion Gamma_2(u)(x) = 1/2 Delta Gamma(u)(x) - Gamma(u, Delta u)(x).
/// Its m_t-integral against g reproduces gamma2_form (asserted in tests).
inline Field gamma2_pointwise(const GeneratorSnapshot& snap, const Field& u) {
  Field gu = gamma(snap, u);
  Field du = snap.apply(u);
  return 0.5 * snap.apply(gu) - gamma(snap, u, du);
}

/// Symmetric difference quotient of t -> Gamma_t(u) with u frozen.
struct DtGamma {
  Field value;
  bool one_sided = false;  // set when t is a grid boundary
};

inline DtGamma dt_gamma(const FlowSpec& flow, double t, const Field& u) {
  int i = flow.grid.index_of(t);
  double dt = flow.grid.dt();
  DtGamma out;
  if (i == 0) {
    out.one_sided = true;
    out.value = (gamma(snapshot_at(flow, t + dt), u) - gamma(snapshot_at(flow, t), u)) / dt;
  } else if (i == flow.grid.n_steps) {
    out.one_sided = true;
    out.value = (gamma(snapshot_at(flow, t), u) - gamma(snapshot_at(flow, t - dt), u)) / dt;
  } else {
    out.value =
        (gamma(snapshot_at(flow, t + dt), u) - gamma(snapshot_at(flow, t - dt), u)) / (2.0 * dt);
  }
  return out;
}

namespace detail {

/// exp(r A) applied to the columns of U by uniformization, where A has
/// nonnegative off-diagonal entries. With shift = 0 and zero row sums the
/// step is a Markov average: constants and positivity are preserved to
/// rounding (the truncated Poisson weights are renormalized to sum to one).
///
/// apply(U) must act column-wise as A U.
template <class ApplyFn>
Mat uniformized_exp(ApplyFn&& apply, double max_diag_rate, double r, Mat U) {
  if (r == 0.0) return U;
  const double lambda = std::max(max_diag_rate, 1e-300);
  const double a = lambda * r;

  // Poisson(a) weights, truncated at a + 12 sqrt(a) + 25 terms (the omitted
  // tail mass is below 1e-16 for every a).
  std::vector<double> w;
  const int kmax = static_cast<int>(a + 12.0 * std::sqrt(a + 1.0) + 25.0);
  if (a < 700.0) {
    double term = std::exp(-a);
    double cum = term;
    w.push_back(term);
    for (int k = 1; k <= kmax && cum < 1.0 - 1e-16; ++k) {
      term *= a / k;
      cum += term;
      w.push_back(term);
    }
  } else {
    // log-space accumulation for very stiff substeps
    std::vector<double> logw;
    double lga = std::log(a);
    double lw = -a;
    logw.reserve(kmax + 1);
    logw.push_back(lw);
    for (int k = 1; k <= kmax; ++k) {
      lw += lga - std::log(static_cast<double>(k));
      logw.push_back(lw);
    }
    double mx = *std::max_element(logw.begin(), logw.end());
    w.resize(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) w[k] = std::exp(logw[k] - mx);
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;

  Mat acc = w[0] * U;
  Mat Pk = std::move(U);
  for (std::size_t k = 1; k < w.size(); ++k) {
    Pk = Pk + apply(Pk) / lambda;  // P = I + A/lambda, entrywise nonnegative
    acc += w[k] * Pk;
  }
  return acc;
}

}  // namespace detail

/// Static heat semigroup H^t_r = exp(r Delta_t) by uniformization.
inline Mat frozen_semigroup(const GeneratorSnapshot& snap, double r, Mat fields) {
  if (r < 0.0) throw DomainError("frozen_semigroup: negative duration");
  auto apply = [&snap](const Mat& U) {
    Mat out(U.rows(), U.cols());
    for (int c = 0; c < U.cols(); ++c) out.col(c) = snap.apply(U.col(c));
    return out;
  };
  return detail::uniformized_exp(apply, snap.max_rate(), r, std::move(fields));
}

inline Field frozen_semigroup(const GeneratorSnapshot& snap, double r, const Field& u) {
  Mat U(u.size(), 1);
  U.col(0) = u;
  return frozen_semigroup(snap, r, std::move(U)).col(0);
}

}  // namespace srf
