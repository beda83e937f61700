#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace srf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

/// A real-valued function on the state set.
using Field = Vec;

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Finite state set with a positive reference measure.
struct StateSpace {
  int n = 0;
  Vec base_measure;                 // m(x) > 0
  std::vector<std::string> labels;  // optional, size 0 or n

  void validate() const {
    if (n < 2) throw StructuralError("StateSpace: need at least 2 states");
    if (base_measure.size() != n)
      throw StructuralError("StateSpace: base_measure size mismatch");
    for (int i = 0; i < n; ++i)
      if (!(base_measure[i] > 0.0))
        throw StructuralError("StateSpace: base measure must be positive at state " +
                              std::to_string(i));
    if (!labels.empty() && static_cast<int>(labels.size()) != n)
      throw StructuralError("StateSpace: labels size mismatch");
  }
};

/// Uniform time grid on the open interval (t_start, t_end).
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  int n_steps = 0;

  double dt() const { return (t_end - t_start) / n_steps; }
  int n_times() const { return n_steps + 1; }
  double time(int i) const { return t_start + i * dt(); }

  void validate() const {
    if (!(0.0 < t_start && t_start < t_end))
      throw StructuralError("TimeGrid: need 0 < t_start < t_end");
    if (n_steps < 1) throw StructuralError("TimeGrid: need n_steps >= 1");
  }

  /// Index of a grid time; throws GridError when t is not aligned.
  int index_of(double t, double tol = 1e-9) const {
    double x = (t - t_start) / dt();
    int i = static_cast<int>(std::lround(x));
    if (i < 0 || i > n_steps || std::abs(x - i) > tol)
      throw GridError("time " + std::to_string(t) + " is not on the grid");
    return i;
  }

  bool contains(double t, double tol = 1e-9) const {
    double x = (t - t_start) / dt();
    int i = static_cast<int>(std::lround(x));
    return i >= 0 && i <= n_steps && std::abs(x - i) <= tol;
  }
};

/// Nonnegative weights per state.
struct Measure {
  Vec weights;
  double total = 0.0;

  static Measure from_weights(Vec w) {
    Measure m;
    m.total = w.sum();
    m.weights = std::move(w);
    return m;
  }

  double operator()(int x) const { return weights[x]; }
  int size() const { return static_cast<int>(weights.size()); }
};

struct ProbabilityMeasure : Measure {
  static ProbabilityMeasure from_weights(Vec w, double tol = 1e-12) {
    ProbabilityMeasure p;
    p.total = w.sum();
    if (std::abs(p.total - 1.0) > tol)
      throw StructuralError("ProbabilityMeasure: total mass " + std::to_string(p.total) +
                            " differs from 1");
    p.weights = std::move(w);
    return p;
  }

  static ProbabilityMeasure dirac(int n, int x) {
    Vec w = Vec::Zero(n);
    w[x] = 1.0;
    return from_weights(std::move(w));
  }

  static ProbabilityMeasure normalized(const Vec& w) {
    double s = w.sum();
    if (!(s > 0.0)) throw StructuralError("cannot normalize a zero measure");
    return from_weights(w / s);
  }
};

inline double integrate(const Field& u, const Measure& m) {
  return u.dot(m.weights);
}

}  // namespace srf
