#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "srf/transport.hpp"

namespace srf {

struct Witness {
  double s = 0.0, t = 0.0;
  double r = 0.0;   // interior time, for the integrated Bochner rows
  int x = -1, y = -1;
  std::string u_id, g_id;
};

struct CheckReport {
  std::string id;
  double margin = 0.0;  // min over the evaluation grid of (RHS - LHS)
  Witness witness;
  double tol = 0.0;
  bool pass = false;
  bool informational = false;
  std::string grid_description;
};

inline void finalize(CheckReport& rep) { rep.pass = rep.margin >= -rep.tol; }

/// Deterministic family of test fields standing in for "all u in F".
struct BankField {
  std::string id;
  Field u;
  bool is_constant = false;
};

struct TestFunctionBank {
  std::uint64_t seed = 0;
  std::vector<BankField> fields;

  /// Affine copy of a field squeezed into [lo, hi]; constants map to the midpoint.
  static Field positive_version(const Field& u, double lo = 0.05, double hi = 1.05) {
    double mn = u.minCoeff(), mx = u.maxCoeff();
    if (mx - mn < 1e-14) return Field::Constant(u.size(), 0.5 * (lo + hi));
    return ((u.array() - mn) / (mx - mn) * (hi - lo) + lo).matrix();
  }
};

/// Builds the bank: constants, indicators, mode-like fields, and seeded
/// random smooth fields (low-frequency trigonometric samples on the circle,
/// semigroup-mollified noise on graphs).
inline TestFunctionBank make_bank(const FlowSpec& flow, std::uint64_t seed, int n_random = 12) {
  TestFunctionBank bank;
  bank.seed = seed;
  const int n = flow.n();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  bank.fields.push_back({"const1", Field::Constant(n, 1.0), true});

  int n_ind = std::min(4, n);
  for (int k = 0; k < n_ind; ++k) {
    Field u = Field::Zero(n);
    u[(k * n) / n_ind] = 1.0;
    bank.fields.push_back({"ind" + std::to_string(k), u, false});
  }

  if (flow.backend == Backend::circle1d) {
    for (int k = 1; k <= 4; ++k) {
      Field c(n), s(n);
      for (int i = 0; i < n; ++i) {
        double x = 2.0 * M_PI * i / n;
        c[i] = std::cos(k * x);
        s[i] = std::sin(k * x);
      }
      bank.fields.push_back({"cos" + std::to_string(k), c, false});
      bank.fields.push_back({"sin" + std::to_string(k), s, false});
    }
    for (int j = 0; j < n_random; ++j) {
      Field u = Field::Zero(n);
      for (int k = 1; k <= 3; ++k) {
        double a = gauss(rng), b = gauss(rng);
        for (int i = 0; i < n; ++i) {
          double x = 2.0 * M_PI * i / n;
          u[i] += a * std::cos(k * x) + b * std::sin(k * x);
        }
      }
      bank.fields.push_back({"rand" + std::to_string(j), u, false});
    }
  } else {
    // coordinate-like modes: distances from a few anchor states
    Mat d = flow.metric_matrix(flow.grid.t_start);
    for (int k = 0; k < std::min(3, n); ++k)
      bank.fields.push_back({"dist" + std::to_string(k), d.col((k * n) / 3), false});
    GeneratorSnapshot snap = snapshot_at(flow, flow.grid.t_start);
    double r_mollify = 0.2 / std::max(snap.max_rate(), 1e-12);
    for (int j = 0; j < n_random; ++j) {
      Field u(n);
      for (int i = 0; i < n; ++i) u[i] = gauss(rng);
      bank.fields.push_back(
          {"rand" + std::to_string(j), frozen_semigroup(snap, r_mollify, u), false});
    }
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Per-inequality margin cores (RHS - LHS). Pointwise checkers return a Field,
// pairwise (Harnack-type) checkers a Mat over state pairs (x rows, y cols).
// ---------------------------------------------------------------------------

inline double log_clamp_epsilon(const Field& u) {
  return 1e-8 * std::max(u.cwiseAbs().maxCoeff(), 1e-300);
}

/// E3, L^2 gradient estimate: P(Gamma_s u) - Gamma_t(P u).
inline Field e3_margin(const FlowSpec& flow, double s, double t, const Field& u) {
  GeneratorSnapshot ss = snapshot_at(flow, s), st = snapshot_at(flow, t);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = gamma(ss, u);
  Mat out = forward(flow, s, t, std::move(U)).final;
  return out.col(1) - gamma(st, out.col(0));
}

/// E6, L^1 gradient estimate: P(sqrt(Gamma_s u)) - sqrt(Gamma_t(P u)).
inline Field e6_margin(const FlowSpec& flow, double s, double t, const Field& u) {
  GeneratorSnapshot ss = snapshot_at(flow, s), st = snapshot_at(flow, t);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = gamma(ss, u).cwiseSqrt();
  Mat out = forward(flow, s, t, std::move(U)).final;
  return out.col(1) - gamma(st, out.col(0)).cwiseSqrt();
}

/// E7, local Poincare: 2(t-s) P(Gamma_s u) - [P(u^2) - (Pu)^2].
inline Field e7_margin(const FlowSpec& flow, double s, double t, const Field& u) {
  GeneratorSnapshot ss = snapshot_at(flow, s);
  Mat U(u.size(), 3);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u);
  U.col(2) = gamma(ss, u);
  Mat out = forward(flow, s, t, std::move(U)).final;
  Field variance = out.col(1) - out.col(0).cwiseProduct(out.col(0));
  return 2.0 * (t - s) * out.col(2) - variance;
}

/// E8, reverse local Poincare: [P(u^2) - (Pu)^2] - 2(t-s) Gamma_t(Pu).
inline Field e8_margin(const FlowSpec& flow, double s, double t, const Field& u) {
  GeneratorSnapshot st = snapshot_at(flow, t);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u);
  Mat out = forward(flow, s, t, std::move(U)).final;
  Field variance = out.col(1) - out.col(0).cwiseProduct(out.col(0));
  return variance - 2.0 * (t - s) * gamma(st, out.col(0));
}

/// E9, local log-Sobolev: (t-s) P(Gamma_s u / u) - [P(u log u) - Pu log Pu].
inline Field e9_margin(const FlowSpec& flow, double s, double t, Field u) {
  double eps = log_clamp_epsilon(u);
  u = u.cwiseMax(eps);
  GeneratorSnapshot ss = snapshot_at(flow, s);
  Mat U(u.size(), 3);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u.array().log().matrix());
  U.col(2) = gamma(ss, u).cwiseQuotient(u);
  Mat out = forward(flow, s, t, std::move(U)).final;
  Field ent = out.col(1) - out.col(0).cwiseProduct(out.col(0).array().log().matrix());
  return (t - s) * out.col(2) - ent;
}

/// E10, reverse local log-Sobolev: [P(u log u) - Pu log Pu] - (t-s) Gamma_t(Pu)/Pu.
inline Field e10_margin(const FlowSpec& flow, double s, double t, Field u) {
  double eps = log_clamp_epsilon(u);
  u = u.cwiseMax(eps);
  GeneratorSnapshot st = snapshot_at(flow, t);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u.array().log().matrix());
  Mat out = forward(flow, s, t, std::move(U)).final;
  Field ent = out.col(1) - out.col(0).cwiseProduct(out.col(0).array().log().matrix());
  return ent - (t - s) * gamma(st, out.col(0)).cwiseQuotient(out.col(0));
}

/// E11, dimension-independent Harnack at exponent alpha > 1; margin of
/// log RHS - log LHS over state pairs (x rows, y cols).
inline Mat e11_margin(const FlowSpec& flow, double s, double t, Field u, double alpha) {
  if (!(alpha > 1.0)) throw DomainError("e11_margin: need alpha > 1");
  double eps = log_clamp_epsilon(u);
  u = u.cwiseMax(eps);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = u.array().pow(alpha).matrix();
  Mat out = forward(flow, s, t, std::move(U)).final;
  Mat d = flow.metric_matrix(t);
  const int n = flow.n();
  Mat margin(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      margin(x, y) = std::log(out(x, 1)) +
                     alpha * d(x, y) * d(x, y) / (4.0 * (alpha - 1.0) * (t - s)) -
                     alpha * std::log(out(y, 0));
  return margin;
}

/// E12, log-Harnack: log(Pu)(y) + d_t^2(x,y)/(4(t-s)) - P(log u)(x).
inline Mat e12_margin(const FlowSpec& flow, double s, double t, Field u) {
  double eps = log_clamp_epsilon(u);
  u = u.cwiseMax(eps);
  Mat U(u.size(), 2);
  U.col(0) = u;
  U.col(1) = u.array().log().matrix();
  Mat out = forward(flow, s, t, std::move(U)).final;
  Mat d = flow.metric_matrix(t);
  const int n = flow.n();
  Mat margin(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      margin(x, y) =
          std::log(out(y, 0)) + d(x, y) * d(x, y) / (4.0 * (t - s)) - out(x, 1);
  return margin;
}

/// E4, dynamic Bochner integrated in time: for each interior grid r,
/// Gamma2-form(u_r)(g_r) - 1/2 int dGamma/dt(u_r) g_r dm_r with
/// u_r = P_{r,S}u and g_r = P*_{T,r}g.
struct E4Row {
  double r = 0.0;
  double value = 0.0;
};

inline std::vector<E4Row> e4_rows(const FlowSpec& flow, double S, double T, const Field& u,
                                  const Field& g) {
  PropagatorRun fwd = forward(flow, S, T, u, true);
  PropagatorRun adj = adjoint(flow, T, S, g, true);
  std::vector<E4Row> rows;
  for (int j = fwd.i_s + 1; j < fwd.i_t; ++j) {
    double r = flow.grid.time(j);
    GeneratorSnapshot snap = snapshot_at(flow, r);
    Field ur = fwd.at_index(j).col(0);
    Field gr = adj.at_index(j).col(0);
    double lhs = gamma2_form(snap, ur, gr).value;
    double rhs = 0.5 * integrate(dt_gamma(flow, r, ur).value.cwiseProduct(gr), snap.m);
    rows.push_back({r, lhs - rhs});
  }
  return rows;
}

/// E5, dynamic Bochner pointwise in time:
/// int [Gamma_t(u) Dg + 2 (Du)^2 g + 2 Gamma(u,g) Du - dGamma/dt(u) g] dm_t.
inline double e5_margin(const FlowSpec& flow, double t, const Field& u, const Field& g) {
  GeneratorSnapshot snap = snapshot_at(flow, t);
  double form = 2.0 * gamma2_form(snap, u, g).value;
  double gdot = integrate(dt_gamma(flow, t, u).value.cwiseProduct(g), snap.m);
  return form - gdot;
}

// ---------------------------------------------------------------------------
// Static (frozen-time) variants with K-dependent constants.
// ---------------------------------------------------------------------------

/// c1(K,t) = (1 - e^{-2Kt})/K, with the K -> 0 limit 2t.
inline double static_c1(double K, double t) {
  if (std::abs(K) < 1e-12) return 2.0 * t * (1.0 - K * t);
  return -std::expm1(-2.0 * K * t) / K;
}

/// c2(K,t) = (e^{2Kt} - 1)/K, with the K -> 0 limit 2t.
inline double static_c2(double K, double t) {
  if (std::abs(K) < 1e-12) return 2.0 * t * (1.0 + K * t);
  return std::expm1(2.0 * K * t) / K;
}

/// K/(2(1 - e^{-2Kt})), the Harnack cost prefactor; K -> 0 limit 1/(4t).
inline double static_harnack_coeff(double K, double t) {
  if (std::abs(K) < 1e-12) return 1.0 / (4.0 * t);
  return K / (2.0 * -std::expm1(-2.0 * K * t));
}

enum class StaticVariant { iia, iib, iiia, iiib, iv, v };

inline std::string to_string(StaticVariant v) {
  switch (v) {
    case StaticVariant::iia: return "static-iia";
    case StaticVariant::iib: return "static-iib";
    case StaticVariant::iiia: return "static-iiia";
    case StaticVariant::iiib: return "static-iiib";
    case StaticVariant::iv: return "static-iv";
    case StaticVariant::v: return "static-v";
  }
  return "?";
}

/// Margins of the static inequalities on a frozen snapshot.
/// Pointwise variants return an n-vector reshaped as an n x 1 matrix;
/// Harnack variants return the full pair matrix. `dist` is d at the frozen
/// time, only used by the pair variants. alpha only used by (iv).
inline Mat check_static(const GeneratorSnapshot& snap, const Mat& dist, double K, double t_dur,
                        Field u, StaticVariant variant, double alpha = 2.0) {
  const int n = snap.n();
  if (variant == StaticVariant::iiia || variant == StaticVariant::iiib ||
      variant == StaticVariant::iv || variant == StaticVariant::v)
    u = u.cwiseMax(log_clamp_epsilon(u));

  Mat U(n, 4);
  U.col(0) = u;
  U.col(1) = u.cwiseProduct(u);
  U.col(2) = u.cwiseProduct(u.array().max(1e-300).log().matrix());
  U.col(3) = gamma(snap, u);
  Mat out = frozen_semigroup(snap, t_dur, U);
  Field pu = out.col(0), pu2 = out.col(1), pulogu = out.col(2), pgam = out.col(3);
  Field variance = pu2 - pu.cwiseProduct(pu);

  switch (variant) {
    case StaticVariant::iia:
      return static_c1(K, t_dur) * pgam - variance;
    case StaticVariant::iib:
      return variance - static_c2(K, t_dur) * gamma(snap, pu);
    case StaticVariant::iiia: {
      Field pratio = frozen_semigroup(snap, t_dur, Field(gamma(snap, u).cwiseQuotient(u)));
      Field ent = pulogu - pu.cwiseProduct(pu.array().log().matrix());
      return 0.5 * static_c1(K, t_dur) * pratio - ent;
    }
    case StaticVariant::iiib: {
      Field ent = pulogu - pu.cwiseProduct(pu.array().log().matrix());
      return ent - 0.5 * static_c2(K, t_dur) * gamma(snap, pu).cwiseQuotient(pu);
    }
    case StaticVariant::iv: {
      Field pua = frozen_semigroup(snap, t_dur, Field(u.array().pow(alpha).matrix()));
      double coeff = alpha / (alpha - 1.0) * static_harnack_coeff(K, t_dur);
      Mat margin(n, n);
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          margin(x, y) = std::log(pua[x]) + coeff * dist(x, y) * dist(x, y) -
                         alpha * std::log(pu[y]);
      return margin;
    }
    case StaticVariant::v: {
      Field plog = frozen_semigroup(snap, t_dur, Field(u.array().log().matrix()));
      double coeff = static_harnack_coeff(K, t_dur);  // K/(2(1-e^{-2Kt}))
      Mat margin(n, n);
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          margin(x, y) = std::log(pu[y]) + coeff * dist(x, y) * dist(x, y) - plog[x];
      return margin;
    }
  }
  throw DomainError("check_static: unknown variant");
}

// ---------------------------------------------------------------------------
// Curvature estimator.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> two_ball(const GeneratorSnapshot& snap,
                                 const std::vector<std::vector<std::pair<int, double>>>& adj,
                                 int x) {
  std::vector<int> ball{x};
  std::vector<char> in(snap.n(), 0);
  in[x] = 1;
  for (auto [y, c] : adj[x])
    if (c > 0.0 && !in[y]) {
      in[y] = 1;
      ball.push_back(y);
    }
  std::size_t one_ball_end = ball.size();
  for (std::size_t k = 1; k < one_ball_end; ++k)
    for (auto [z, c] : adj[ball[k]])
      if (c > 0.0 && !in[z]) {
        in[z] = 1;
        ball.push_back(z);
      }
  return ball;
}

}  // namespace detail

/// Bakry-Emery curvature at one state: the smallest generalized eigenvalue of
/// the local quadratic forms Gamma_2(.)(x) vs Gamma(.)(x) on the 2-ball of x,
/// with the Gamma-null directions eliminated by a Schur complement.
inline double curvature_at(const GeneratorSnapshot& snap,
                           const std::vector<std::vector<std::pair<int, double>>>& adj, int x) {
  std::vector<int> ball = detail::two_ball(snap, adj, x);
  const int k = static_cast<int>(ball.size());
  if (k < 2) throw StructuralError("curvature_at: isolated state " + std::to_string(x));

  // Quadratic forms on u restricted to the 2-ball (values outside do not
  // enter Gamma or Gamma_2 at x).
  auto lift = [&](const Vec& loc) {
    Field u = Field::Zero(snap.n());
    for (int i = 0; i < k; ++i) u[ball[i]] = loc[i];
    return u;
  };
  auto qa = [&](const Vec& loc) { return gamma2_pointwise(snap, lift(loc))[x]; };
  auto qb = [&](const Vec& loc) { return gamma(snap, lift(loc))[x]; };

  Mat A(k, k), B(k, k);
  std::vector<double> qa_diag(k), qb_diag(k);
  for (int i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e[i] = 1.0;
    qa_diag[i] = qa(e);
    qb_diag[i] = qb(e);
    A(i, i) = qa_diag[i];
    B(i, i) = qb_diag[i];
  }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      Vec e = Vec::Zero(k);
      e[i] = 1.0;
      e[j] = 1.0;
      A(i, j) = A(j, i) = 0.5 * (qa(e) - qa_diag[i] - qa_diag[j]);
      B(i, j) = B(j, i) = 0.5 * (qb(e) - qb_diag[i] - qb_diag[j]);
    }

  Eigen::SelfAdjointEigenSolver<Mat> eb(B);
  double bmax = eb.eigenvalues().cwiseAbs().maxCoeff();
  double cut = std::max(bmax, 1.0) * 1e-12;
  std::vector<int> range, kernel;
  for (int i = 0; i < k; ++i)
    (eb.eigenvalues()[i] > cut ? range : kernel).push_back(i);
  if (range.empty()) throw StructuralError("curvature_at: degenerate Gamma form");

  Mat R(k, static_cast<int>(range.size())), N(k, static_cast<int>(kernel.size()));
  for (std::size_t i = 0; i < range.size(); ++i) R.col(i) = eb.eigenvectors().col(range[i]);
  for (std::size_t i = 0; i < kernel.size(); ++i) N.col(i) = eb.eigenvectors().col(kernel[i]);

  Mat A11 = R.transpose() * A * R;
  Mat B11 = R.transpose() * B * R;  // positive diagonal in this basis
  Mat Aeff = A11;
  if (N.cols() > 0) {
    Mat A22 = N.transpose() * A * N;  // PSD: Gamma_2 >= 0 on Gamma-null directions
    Mat A21 = N.transpose() * A * R;
    Eigen::SelfAdjointEigenSolver<Mat> ea(A22);
    double amax = std::max(ea.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
    Vec inv = Vec::Zero(A22.rows());
    for (int i = 0; i < A22.rows(); ++i)
      if (ea.eigenvalues()[i] > amax * 1e-12) inv[i] = 1.0 / ea.eigenvalues()[i];
    Mat pinv = ea.eigenvectors() * inv.asDiagonal() * ea.eigenvectors().transpose();
    Aeff -= A21.transpose() * pinv * A21;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Aeff, B11);
  return ges.eigenvalues().minCoeff();
}

/// K* = min over states of the local curvature.
inline double estimate_curvature(const GeneratorSnapshot& snap) {
  auto adj = snap.adjacency();
  double k = std::numeric_limits<double>::infinity();
  for (int x = 0; x < snap.n(); ++x) k = std::min(k, curvature_at(snap, adj, x));
  return k;
}

}  // namespace srf
