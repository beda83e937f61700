#pragma once

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "srf/scenario.hpp"

namespace srf::testing {

/// Two-point flow with conductance c(t) = c0 e^{lam t} and log-density
/// f(t, x) = phi_x + beta t. The generator family commutes, so the exact
/// propagators are matrix exponentials of time-integrated generators.
struct TwoPointParams {
  double c0 = 1.0;
  double lam = 0.0;
  double phi0 = 0.0, phi1 = 0.0;
  double beta = 0.0;
};

inline FlowSpec two_point_flow(const TimeGrid& grid, TwoPointParams p = {}) {
  StateSpace space;
  space.n = 2;
  space.base_measure = Vec::Ones(2);
  FlowSpec flow = build_graph(
      space, grid, {{0, 1}},
      [p](double t, int) { return p.c0 * std::exp(p.lam * t); },
      [p](double t, int x) { return (x == 0 ? p.phi0 : p.phi1) + p.beta * t; }, 0.0);
  flow.lipschitz = validate_a1(flow).fitted_L * (1.0 + 1e-9) + 1e-12;
  return flow;
}

/// Dense matrix of the frozen generator at time t.
inline Mat dense_generator(const FlowSpec& flow, double t) {
  GeneratorSnapshot snap = snapshot_at(flow, t);
  const int n = snap.n();
  Mat A(n, n);
  for (int j = 0; j < n; ++j) {
    Field e = Field::Zero(n);
    e[j] = 1.0;
    A.col(j) = snap.apply(e);
  }
  return A;
}

/// Exact forward propagator for two_point_flow by the commuting-family
/// closed form: exp(int_s^t Delta_r dr).
inline Mat two_point_forward_oracle(const FlowSpec& flow, const TwoPointParams& p, double s,
                                    double t) {
  // Delta_r = g(r) B with B = diag(e^{phi_x}) A0 and g(r) = c0 e^{(lam+beta) r}
  Mat A0(2, 2);
  A0 << -1.0, 1.0, 1.0, -1.0;
  Vec dphi(2);
  dphi << std::exp(p.phi0), std::exp(p.phi1);
  Mat B = dphi.asDiagonal() * A0;
  double rate = p.lam + p.beta;
  double G = std::abs(rate) < 1e-14
                 ? p.c0 * (t - s) * (1.0 + 0.5 * rate * (t + s))
                 : p.c0 * (std::exp(rate * t) - std::exp(rate * s)) / rate;
  (void)flow;
  return (G * B).exp();
}

/// Exact adjoint propagator P*_{t,s} for two_point_flow: the operator family
/// Delta_r - beta I also commutes.
inline Mat two_point_adjoint_oracle(const FlowSpec& flow, const TwoPointParams& p, double t,
                                    double s) {
  Mat F = two_point_forward_oracle(flow, p, s, t);
  return F * std::exp(-p.beta * (t - s));
}

/// Random connected graph flow on n states: ring plus chords, conductances
/// c_e(t) = c0_e (1 + a_e sin(w_e t + q_e)), log-density
/// f(t,x) = b_x sin(v_x t + r_x), amplitudes small enough to stay gentle.
inline FlowSpec random_graph_flow(std::uint64_t seed, int n, const TimeGrid& grid,
                                  double amplitude = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  int chords = n / 3;
  for (int k = 0; k < chords; ++k) {
    int a = static_cast<int>(uni(rng) * n) % n;
    int b = static_cast<int>(uni(rng) * n) % n;
    if (a == b || (std::abs(a - b) % (n - 1)) <= 1) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (auto [x, y] : edges) dup = dup || (x == a && y == b);
    if (!dup) edges.emplace_back(a, b);
  }

  struct EdgeLaw {
    double c0, a, w, q;
  };
  struct NodeLaw {
    double b, v, r;
  };
  std::vector<EdgeLaw> elaw;
  for (std::size_t e = 0; e < edges.size(); ++e)
    elaw.push_back({0.5 + uni(rng), amplitude * uni(rng), 0.5 + uni(rng), 6.28 * uni(rng)});
  std::vector<NodeLaw> nlaw;
  for (int x = 0; x < n; ++x)
    nlaw.push_back({amplitude * uni(rng), 0.5 + uni(rng), 6.28 * uni(rng)});

  StateSpace space;
  space.n = n;
  space.base_measure = Vec::Ones(n);
  FlowSpec flow = build_graph(
      space, grid, edges,
      [elaw](double t, int e) {
        const EdgeLaw& l = elaw[std::size_t(e)];
        return l.c0 * (1.0 + l.a * std::sin(l.w * t + l.q));
      },
      [nlaw](double t, int x) {
        const NodeLaw& l = nlaw[std::size_t(x)];
        return l.b * std::sin(l.v * t + l.r);
      },
      0.0);
  flow.lipschitz = validate_a1(flow).fitted_L * (1.0 + 1e-9) + 1e-12;
  return flow;
}

inline FlowSpec circle_flow(int n, double a_cos, const TimeGrid& grid) {
  FlowSpec flow = build_circle1d(
      n, [](double, double) { return 0.0; },
      [a_cos](double, double x) { return a_cos * std::cos(x); }, grid, 0.0);
  flow.lipschitz = validate_a1(flow).fitted_L * (1.0 + 1e-9) + 1e-12;
  return flow;
}

inline Field random_field(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Field u(n);
  for (int i = 0; i < n; ++i) u[i] = gauss(rng);
  return u;
}

}  // namespace srf::testing
