#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "srf/core.hpp"

namespace srf {

enum class Backend { graph, circle1d };

inline std::string to_string(Backend b) {
  return b == Backend::graph ? "graph" : "circle1d";
}

enum class MetricChoice { user_supplied, intrinsic };

/// A sampled-in-time finite mm-space: base measure, log-density path f_t,
/// conductance path c_t on a fixed edge set, and metric path d_t.
///
/// Paths are stored as callables so that the integrator can evaluate them at
/// substep midpoints; the public grid-aligned operations enforce alignment.
struct FlowSpec {
  StateSpace space;
  TimeGrid grid;
  Backend backend = Backend::graph;
  MetricChoice metric_choice = MetricChoice::user_supplied;
  double lipschitz = 0.0;  // declared constant L

  std::vector<std::pair<int, int>> edges;
  std::function<double(double, int)> f_fn;       // f_t(x)
  std::function<double(double, int)> c_fn;       // c_t(edge index)
  std::function<Mat(double)> metric_fn;          // full d_t matrix

  int n() const { return space.n; }

  Vec logdensity_field(double t) const {
    Vec f(space.n);
    for (int x = 0; x < space.n; ++x) f[x] = f_fn(t, x);
    return f;
  }

  Vec conductances(double t) const {
    Vec c(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      c[e] = c_fn(t, static_cast<int>(e));
      if (c[e] < 0.0)
        throw StructuralError("negative conductance on edge " + std::to_string(e));
    }
    return c;
  }

  /// m_t = e^{-f_t} m, at an arbitrary (not necessarily grid) time.
  Measure measure_any(double t) const {
    Vec w(space.n);
    for (int x = 0; x < space.n; ++x)
      w[x] = std::exp(-f_fn(t, x)) * space.base_measure[x];
    return Measure::from_weights(std::move(w));
  }

  Mat metric_matrix(double t) const { return metric_fn(t); }

  /// Time derivative of the log-density, central difference about t with
  /// half-step h (the one differentiation convention of the codebase).
  Vec logdensity_rate(double t, double h) const {
    Vec df(space.n);
    for (int x = 0; x < space.n; ++x)
      df[x] = (f_fn(t + h, x) - f_fn(t - h, x)) / (2.0 * h);
    return df;
  }

  void validate_structure() const;
};

/// m_t = e^{-f_t} m at a grid time.
inline Measure measure_at(const FlowSpec& flow, double t) {
  flow.grid.index_of(t);  // throws GridError when off grid
  return flow.measure_any(t);
}

namespace detail {

/// Checks the metric axioms and names the violated triangle on failure.
inline void require_metric(const Mat& d, double t, double tol = 1e-9) {
  const int n = static_cast<int>(d.rows());
  for (int i = 0; i < n; ++i) {
    if (std::abs(d(i, i)) > tol)
      throw StructuralError("d_t at t=" + std::to_string(t) + " has nonzero diagonal at " +
                            std::to_string(i));
    for (int j = 0; j < n; ++j) {
      if (i != j && !(d(i, j) > 0.0))
        throw StructuralError("d_t at t=" + std::to_string(t) + " not positive off-diagonal at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      if (std::abs(d(i, j) - d(j, i)) > tol)
        throw StructuralError("d_t at t=" + std::to_string(t) + " not symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (d(i, j) > d(i, k) + d(k, j) + tol)
          throw StructuralError("triangle inequality violated at t=" + std::to_string(t) +
                                ": d(" + std::to_string(i) + "," + std::to_string(j) +
                                ") > d(" + std::to_string(i) + "," + std::to_string(k) +
                                ") + d(" + std::to_string(k) + "," + std::to_string(j) + ")");
}

/// All-pairs shortest path (Floyd-Warshall) from edge lengths.
inline Mat shortest_path_metric(int n, const std::vector<std::pair<int, int>>& edges,
                                const Vec& lengths) {
  Mat d = Mat::Constant(n, n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) d(i, i) = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [a, b] = edges[e];
    d(a, b) = std::min(d(a, b), lengths[e]);
    d(b, a) = d(a, b);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
  return d;
}

inline bool connected(int n, const std::vector<std::pair<int, int>>& edges, const Vec& c) {
  std::vector<std::vector<int>> adj(n);
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (c[e] > 0.0) {
      adj[edges[e].first].push_back(edges[e].second);
      adj[edges[e].second].push_back(edges[e].first);
    }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int y : adj[x])
      if (!seen[y]) {
        seen[y] = 1;
        ++count;
        stack.push_back(y);
      }
  }
  return count == n;
}

/// Subsampled grid indices, at most max_samples, always containing both ends.
inline std::vector<int> sample_indices(int n_times, int max_samples = 33) {
  std::vector<int> idx;
  if (n_times <= max_samples) {
    for (int i = 0; i < n_times; ++i) idx.push_back(i);
    return idx;
  }
  for (int k = 0; k < max_samples; ++k)
    idx.push_back(static_cast<int>(std::lround(k * double(n_times - 1) / (max_samples - 1))));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace detail

inline void FlowSpec::validate_structure() const {
  space.validate();
  grid.validate();
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= space.n || b >= space.n || a == b)
      throw StructuralError("invalid edge");
  }
  for (int i = 0; i <= grid.n_steps; ++i) {
    Vec c = conductances(grid.time(i));
    if (!detail::connected(space.n, edges, c))
      throw StructuralError("support graph disconnected at t=" + std::to_string(grid.time(i)));
  }
}

/// Result of the standing-assumption validator.
struct A1Report {
  double fitted_L = 0.0;         // smallest L' satisfying both A1.a inequalities
  double fitted_L_time = 0.0;    // time part (metric log-ratio + f time increments)
  double fitted_L_space = 0.0;   // spatial Lipschitz part of f
  double ellipticity_L = 0.0;    // smallest L'' with e^{-2L''|t-s|} Gamma_s <= Gamma_t <= ...
  double declared_L = 0.0;
  bool pass = false;
  std::string grid_description;
};

/// Fits the smallest constant making both A1.a inequalities hold over sampled
/// grid pairs, and reports the uniform-ellipticity constant of the
/// conductance path as a side check.
inline A1Report validate_a1(const FlowSpec& flow) {
  flow.validate_structure();
  const int n = flow.n();
  auto idx = detail::sample_indices(flow.grid.n_times());

  std::vector<Mat> dmats(idx.size());
  std::vector<Vec> fs(idx.size()), cs(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    double t = flow.grid.time(idx[a]);
    dmats[a] = flow.metric_matrix(t);
    detail::require_metric(dmats[a], t);
    fs[a] = flow.logdensity_field(t);
    cs[a] = flow.conductances(t);
  }

  A1Report rep;
  rep.declared_L = flow.lipschitz;

  // Spatial part at fixed time: |f_t(x)-f_t(y)| <= L d_t(x,y).
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (int x = 0; x < n; ++x)
      for (int y = x + 1; y < n; ++y)
        rep.fitted_L_space =
            std::max(rep.fitted_L_space, std::abs(fs[a][x] - fs[a][y]) / dmats[a](x, y));

  // Time parts over distinct sampled times.
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      double ts = flow.grid.time(idx[a]), tt = flow.grid.time(idx[b]);
      double dtab = std::abs(tt - ts);
      for (int x = 0; x < n; ++x) {
        // same-point time increment of f
        rep.fitted_L_time =
            std::max(rep.fitted_L_time, std::abs(fs[b][x] - fs[a][x]) / dtab);
        for (int y = x + 1; y < n; ++y)
          rep.fitted_L_time = std::max(
              rep.fitted_L_time, std::abs(std::log(dmats[b](x, y) / dmats[a](x, y))) / dtab);
      }
      // cross terms |f_t(x)-f_s(y)| <= L|t-s| + L d_t(x,y): fit L by bisection-free
      // direct formula L >= |df| / (|t-s| + d).
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          if (x != y) {
            double need = std::abs(fs[b][x] - fs[a][y]) / (dtab + dmats[b](x, y));
            rep.fitted_L = std::max(rep.fitted_L, need);
          }
    }
  rep.fitted_L = std::max({rep.fitted_L, rep.fitted_L_time, rep.fitted_L_space});

  // Uniform ellipticity of the conductance path: pointwise Gamma ratios are
  // controlled by per-edge conductance ratios combined with the density ratio.
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      double dtab = std::abs(flow.grid.time(idx[b]) - flow.grid.time(idx[a]));
      for (std::size_t e = 0; e < flow.edges.size(); ++e) {
        if (cs[a][e] <= 0.0 && cs[b][e] <= 0.0) continue;
        if (cs[a][e] <= 0.0 || cs[b][e] <= 0.0) {
          rep.ellipticity_L = std::numeric_limits<double>::infinity();
          continue;
        }
        for (int x : {flow.edges[e].first, flow.edges[e].second}) {
          double r = std::log(cs[b][e] / cs[a][e]) + (fs[b][x] - fs[a][x]);
          rep.ellipticity_L = std::max(rep.ellipticity_L, std::abs(r) / (2.0 * dtab));
        }
      }
    }

  rep.pass = rep.fitted_L <= flow.lipschitz * (1.0 + 1e-9) + 1e-12;
  rep.grid_description =
      "sampled " + std::to_string(idx.size()) + " of " + std::to_string(flow.grid.n_times()) +
      " grid times, all state pairs";
  return rep;
}

/// Finite weighted graph backend. When no metric is supplied, d_t is the
/// shortest-path metric with edge lengths c_t(x,y)^{-1/2}.
inline FlowSpec build_graph(StateSpace space, TimeGrid grid,
                            std::vector<std::pair<int, int>> edges,
                            std::function<double(double, int)> conductance,
                            std::function<double(double, int)> logdensity,
                            double lipschitz,
                            std::function<Mat(double)> metric = nullptr) {
  FlowSpec flow;
  flow.space = std::move(space);
  flow.grid = grid;
  flow.backend = Backend::graph;
  flow.edges = std::move(edges);
  flow.c_fn = std::move(conductance);
  flow.f_fn = std::move(logdensity);
  flow.lipschitz = lipschitz;
  if (metric) {
    flow.metric_choice = MetricChoice::user_supplied;
    flow.metric_fn = std::move(metric);
  } else {
    flow.metric_choice = MetricChoice::intrinsic;
    // capture by value: FlowSpec may outlive the builder arguments
    auto edges_copy = flow.edges;
    auto c_fn = flow.c_fn;
    int n = flow.space.n;
    flow.metric_fn = [edges_copy, c_fn, n](double t) {
      Vec len(edges_copy.size());
      for (std::size_t e = 0; e < edges_copy.size(); ++e) {
        double c = c_fn(t, static_cast<int>(e));
        len[e] = c > 0.0 ? 1.0 / std::sqrt(c) : std::numeric_limits<double>::infinity();
      }
      return detail::shortest_path_metric(n, edges_copy, len);
    };
  }
  flow.validate_structure();
  return flow;
}

/// Discretized weighted circle backend. States are n equispaced points on
/// [0, 2pi); the generator is the second-order divergence-form discretization
/// of  Delta u = e^{-2 phi} (u'' - f' u'),  and d_t is cumulative trapezoidal
/// arc length under e^{phi} with circular shortest-path reduction.
///
/// Internally the log-density stored in the FlowSpec is f - 2 phi against the
/// uniform base measure h per node, so that m_t = e^{-f_t} m reproduces the
/// invariant measure of the discretized operator.
inline FlowSpec build_circle1d(int n, std::function<double(double, double)> phi,
                               std::function<double(double, double)> f, TimeGrid grid,
                               double lipschitz) {
  if (n < 16) throw StructuralError("build_circle1d: need at least 16 grid points");
  grid.validate();
  const double h = 2.0 * M_PI / n;

  FlowSpec flow;
  flow.backend = Backend::circle1d;
  flow.grid = grid;
  flow.lipschitz = lipschitz;
  flow.metric_choice = MetricChoice::intrinsic;
  flow.space.n = n;
  flow.space.base_measure = Vec::Constant(n, h);

  flow.edges.reserve(n);
  for (int i = 0; i < n; ++i) flow.edges.emplace_back(i, (i + 1) % n);

  auto xcoord = [h](int i) { return i * h; };
  flow.f_fn = [phi, f, xcoord](double t, int i) {
    double x = xcoord(i);
    return f(t, x) - 2.0 * phi(t, x);
  };
  // conductance across the midpoint of edge (i, i+1): e^{-f(mid)} / h
  flow.c_fn = [f, h, xcoord](double t, int e) {
    double xm = xcoord(e) + 0.5 * h;
    return std::exp(-f(t, xm)) / h;
  };
  flow.metric_fn = [phi, h, n, xcoord](double t) {
    // trapezoidal arc length of each edge under e^{phi}
    Vec ell(n);
    for (int i = 0; i < n; ++i)
      ell[i] = 0.5 * h * (std::exp(phi(t, xcoord(i))) + std::exp(phi(t, xcoord((i + 1) % n))));
    Vec prefix(n + 1);
    prefix[0] = 0.0;
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + ell[i];
    double total = prefix[n];
    Mat d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double cw = std::abs(prefix[j] - prefix[i]);
        d(i, j) = std::min(cw, total - cw);
      }
    return d;
  };
  flow.validate_structure();
  return flow;
}

}  // namespace srf
