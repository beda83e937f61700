#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "srf/propagator.hpp"

namespace srf {

struct TransportPlan {
  Mat coupling;  // nonnegative, row sums = first marginal, col sums = second
  double cost = 0.0;
  int p = 2;
  bool exact = true;  // false on the entropic large-n path
  ProbabilityMeasure first, second;

  double wasserstein() const { return std::pow(std::max(cost, 0.0), 1.0 / p); }
};

namespace detail {

/// Exact solver for the balanced transportation problem
///   min sum_{ij} C(i,j) x(i,j),  x >= 0, row sums = a, col sums = b
/// by the primal transportation (network) simplex on the basis tree.
/// Anti-cycling via marginal perturbation; the final flows are re-solved on
/// the optimal basis from the unperturbed marginals, so the returned vertex
/// is exact up to floating point additions.
class TransportationSimplex {
 public:
  TransportationSimplex(const Mat& C, const Vec& a, const Vec& b)
      : C_(C), n_(static_cast<int>(a.size())), m_(static_cast<int>(b.size())) {
    // Golden-ratio-spread perturbation keeps the intermediate problems in
    // general position (no exact ties during pivoting).
    double delta = 1e-9 / (n_ + m_);
    const double phi = 0.6180339887498949;
    a_ = a;
    b_ = b;
    for (int i = 0; i < n_; ++i) a_[i] += delta * (1.0 + std::fmod(phi * (i + 1), 1.0));
    for (int j = 0; j < m_; ++j) b_[j] += delta * (1.0 + std::fmod(phi * (n_ + j + 1), 1.0));
    // rebalance rounding drift onto the last demand
    b_[m_ - 1] += a_.sum() - b_.sum();
    a_exact_ = a;
    b_exact_ = b;
  }

  Mat solve() {
    northwest_corner();
    const double scale = std::max(C_.cwiseAbs().maxCoeff(), 1.0);
    const double opt_tol = 1e-13 * scale;
    const int max_iter = 200 * (n_ + m_) * (n_ + m_);
    for (int iter = 0; iter < max_iter; ++iter) {
      compute_potentials();
      int bi = -1, bj = -1;
      double best = -opt_tol;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j) {
          double rc = C_(i, j) - u_[i] - v_[j];
          if (rc < best && !is_basic(i, j)) {
            best = rc;
            bi = i;
            bj = j;
          }
        }
      if (bi < 0) return exact_flows_on_basis();
      pivot(bi, bj);
    }
    throw std::runtime_error("transportation simplex failed to converge");
  }

 private:
  struct Arc {
    int i, j;
    double flow;
    bool active;
  };

  const Mat& C_;
  int n_, m_;
  Vec a_, b_, a_exact_, b_exact_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adj_;  // node -> arc ids; nodes: rows, then cols
  std::vector<double> u_, v_;
  std::vector<std::vector<char>> basic_;

  int col_node(int j) const { return n_ + j; }

  bool is_basic(int i, int j) const { return basic_[i][j]; }

  void add_arc(int i, int j, double flow) {
    int id = static_cast<int>(arcs_.size());
    arcs_.push_back({i, j, flow, true});
    adj_[i].push_back(id);
    adj_[col_node(j)].push_back(id);
    basic_[i][j] = 1;
  }

  void drop_arc(int id) {
    arcs_[id].active = false;
    basic_[arcs_[id].i][arcs_[id].j] = 0;
    auto scrub = [this, id](int node) {
      auto& v = adj_[node];
      v.erase(std::remove(v.begin(), v.end(), id), v.end());
    };
    scrub(arcs_[id].i);
    scrub(col_node(arcs_[id].j));
  }

  void northwest_corner() {
    adj_.assign(n_ + m_, {});
    basic_.assign(n_, std::vector<char>(m_, 0));
    Vec ra = a_, rb = b_;
    int i = 0, j = 0;
    while (i < n_ && j < m_) {
      double f = std::min(ra[i], rb[j]);
      add_arc(i, j, f);
      ra[i] -= f;
      rb[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (ra[i] <= rb[j] && i < n_ - 1)
        ++i;
      else if (j < m_ - 1)
        ++j;
      else
        ++i;
    }
  }

  void compute_potentials() {
    u_.assign(n_, 0.0);
    v_.assign(m_, 0.0);
    std::vector<char> seen(n_ + m_, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      for (int id : adj_[node]) {
        const Arc& arc = arcs_[id];
        int other = (node == arc.i) ? col_node(arc.j) : arc.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= n_)
          v_[other - n_] = C_(arc.i, arc.j) - u_[arc.i];
        else
          u_[other] = C_(arc.i, arc.j) - v_[arc.j];
        queue.push_back(other);
      }
    }
  }

  /// Tree path between two nodes as a sequence of arc ids.
  std::vector<int> tree_path(int from, int to) const {
    std::vector<int> parent_arc(n_ + m_, -1), parent(n_ + m_, -1);
    std::vector<char> seen(n_ + m_, 0);
    std::deque<int> queue{from};
    seen[from] = 1;
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      if (node == to) break;
      for (int id : adj_[node]) {
        const Arc& arc = arcs_[id];
        int other = (node == arc.i) ? col_node(arc.j) : arc.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        parent_arc[other] = id;
        queue.push_back(other);
      }
    }
    std::vector<int> path;
    for (int node = to; node != from; node = parent[node]) path.push_back(parent_arc[node]);
    std::reverse(path.begin(), path.end());
    return path;
  }

  void pivot(int bi, int bj) {
    // cycle: entering cell (+), then the tree path from col bj back to row bi
    // with alternating signs starting at -.
    std::vector<int> path = tree_path(col_node(bj), bi);
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t l = 0; l < path.size(); l += 2) {  // minus positions
      if (arcs_[path[l]].flow < theta ||
          (arcs_[path[l]].flow == theta && path[l] < leaving)) {
        theta = arcs_[path[l]].flow;
        leaving = path[l];
      }
    }
    for (std::size_t l = 0; l < path.size(); ++l)
      arcs_[path[l]].flow += (l % 2 == 0) ? -theta : theta;
    drop_arc(leaving);
    add_arc(bi, bj, theta);
  }

  /// Re-solves the basic flows from the unperturbed marginals by leaf stripping.
  Mat exact_flows_on_basis() {
    std::vector<double> residual(n_ + m_);
    for (int i = 0; i < n_; ++i) residual[i] = a_exact_[i];
    for (int j = 0; j < m_; ++j) residual[col_node(j)] = b_exact_[j];
    std::vector<int> degree(n_ + m_);
    auto live_adj = adj_;
    for (int x = 0; x < n_ + m_; ++x) degree[x] = static_cast<int>(live_adj[x].size());

    Mat X = Mat::Zero(n_, m_);
    std::deque<int> leaves;
    for (int x = 0; x < n_ + m_; ++x)
      if (degree[x] == 1) leaves.push_back(x);
    std::vector<char> done_arc(arcs_.size(), 0);
    while (!leaves.empty()) {
      int node = leaves.front();
      leaves.pop_front();
      int arc_id = -1;
      for (int id : live_adj[node])
        if (!done_arc[id]) arc_id = id;
      if (arc_id < 0) continue;
      const Arc& arc = arcs_[arc_id];
      double f = residual[node];
      X(arc.i, arc.j) = std::max(f, 0.0);  // clamp degenerate negatives ~ perturbation size
      int other = (node == arc.i) ? col_node(arc.j) : arc.i;
      residual[other] -= f;
      residual[node] = 0.0;
      done_arc[arc_id] = 1;
      if (--degree[other] == 1) leaves.push_back(other);
      --degree[node];
    }
    return X;
  }
};

/// Entropic fallback for large instances: log-domain Sinkhorn with epsilon
/// annealing, rounded to an exactly feasible coupling (row/column scaling
/// plus a rank-one residual). Only engaged above the exact-solver size cap.
inline Mat sinkhorn_plan(const Mat& C, const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  const double cmax = std::max(C.maxCoeff(), 1e-300);
  Vec f = Vec::Zero(n), g = Vec::Zero(m);
  Vec loga = a.array().log().matrix(), logb = b.array().log().matrix();
  for (double eps = cmax / 10.0; ; eps /= 4.0) {
    eps = std::max(eps, 1e-5 * cmax);
    for (int it = 0; it < 400; ++it) {
      for (int i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) mx = std::max(mx, (g[j] - C(i, j)) / eps);
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += std::exp((g[j] - C(i, j)) / eps - mx);
        f[i] = eps * (loga[i] - mx - std::log(s));
      }
      double err = 0.0;
      for (int j = 0; j < m; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) mx = std::max(mx, (f[i] - C(i, j)) / eps);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::exp((f[i] - C(i, j)) / eps - mx);
        double gj = eps * (logb[j] - mx - std::log(s));
        err = std::max(err, std::abs(gj - g[j]));
        g[j] = gj;
      }
      if (err < 1e-12 * cmax) break;
    }
    if (eps <= 1e-5 * cmax * 1.0000001) break;
  }
  const double eps = 1e-5 * cmax;
  Mat X(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) X(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eps);
  // round to the transport polytope
  for (int i = 0; i < n; ++i) {
    double rs = X.row(i).sum();
    if (rs > a[i]) X.row(i) *= a[i] / rs;
  }
  for (int j = 0; j < m; ++j) {
    double cs = X.col(j).sum();
    if (cs > b[j]) X.col(j) *= b[j] / cs;
  }
  Vec ra = (a - X.rowwise().sum()).cwiseMax(0.0);
  Vec rb = (b - X.colwise().sum().transpose()).cwiseMax(0.0);
  double mass = ra.sum();
  if (mass > 0.0) X += (ra / mass) * rb.transpose();
  return X.cwiseMax(0.0);
}

}  // namespace detail

/// Exact optimum of the finite transportation LP with cost d_t(x,y)^p.
inline TransportPlan wasserstein(const FlowSpec& flow, double t, const ProbabilityMeasure& mu,
                                 const ProbabilityMeasure& nu, int p = 2) {
  if (p != 1 && p != 2) throw DomainError("wasserstein: p must be 1 or 2");
  flow.grid.index_of(t);
  if (std::abs(mu.total - nu.total) > 1e-10)
    throw StructuralError("wasserstein: unbalanced masses");
  Mat d = flow.metric_matrix(t);
  Mat C = (p == 1) ? d : Mat(d.cwiseProduct(d));
  TransportPlan plan;
  if (flow.n() > 200) {
    plan.exact = false;
    plan.coupling = detail::sinkhorn_plan(C, mu.weights, nu.weights);
  } else {
    detail::TransportationSimplex simplex(C, mu.weights, nu.weights);
    plan.coupling = simplex.solve();
  }
  plan.cost = (plan.coupling.cwiseProduct(C)).sum();
  plan.p = p;
  plan.first = mu;
  plan.second = nu;
  return plan;
}

/// Hopf-Lax semigroup Q_r phi(x) = min_y [ phi(y) + d_t(x,y)^2 / (2r) ].
inline Field hopf_lax(const FlowSpec& flow, double t, double r, const Field& phi) {
  if (!(r > 0.0)) throw DomainError("hopf_lax: need r > 0");
  Mat d = flow.metric_matrix(t);
  const int n = flow.n();
  Field out(n);
  for (int x = 0; x < n; ++x) {
    double best = phi[x];
    for (int y = 0; y < n; ++y)
      best = std::min(best, phi[y] + d(x, y) * d(x, y) / (2.0 * r));
    out[x] = best;
  }
  return out;
}

/// Relative Boltzmann entropy S_t(mu) = sum_x mu(x) log(mu(x)/m_t(x)).
inline double entropy(const FlowSpec& flow, double t, const ProbabilityMeasure& mu) {
  Measure mt = flow.measure_any(t);
  double s = 0.0;
  for (int x = 0; x < mu.size(); ++x)
    if (mu(x) > 0.0) s += mu(x) * std::log(mu(x) / mt(x));
  return s;
}

/// Wasserstein contraction margin W_t(mu,nu) - W_s(dual mu, dual nu), p = 2.
struct E2Result {
  double margin = 0.0;
  double w_t = 0.0;
  double w_s = 0.0;
};

inline E2Result check_E2(const FlowSpec& flow, double s, double t,
                         const ProbabilityMeasure& mu, const ProbabilityMeasure& nu) {
  E2Result res;
  res.w_t = wasserstein(flow, t, mu, nu, 2).wasserstein();
  ProbabilityMeasure mu_s = dual_on_measures(flow, t, s, mu).measure;
  ProbabilityMeasure nu_s = dual_on_measures(flow, t, s, nu).measure;
  res.w_s = wasserstein(flow, s, mu_s, nu_s, 2).wasserstein();
  res.margin = res.w_t - res.w_s;
  return res;
}

}  // namespace srf
