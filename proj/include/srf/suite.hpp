#pragma once

#include <atomic>
#include <future>
#include <map>
#include <optional>
#include <thread>

#include "srf/inequalities.hpp"

namespace srf {

/// One evaluated row: inequality x test function x (s,t) window.
struct RowResult {
  std::string inequality;
  std::string u_id;
  std::string g_id;  // second field / measure / alpha tag where applicable
  double s = 0.0, t = 0.0;
  double margin = 0.0;
  int x = -1, y = -1;  // witness state (pair)
  double r = 0.0;      // witness interior time (E4)
  double tol = 0.0;
  bool pass = false;
  bool informational = false;
};

struct Implication {
  std::string name;
  std::vector<std::string> premises;
  std::vector<std::string> conclusions;
  std::string status;  // "consistent" | "violated" | "vacuous"
};

struct SuiteResult {
  std::vector<RowResult> rows;
  std::vector<CheckReport> reports;  // one per inequality id, min over rows
  std::vector<Implication> implications;
};

struct SuiteConfig {
  std::vector<std::pair<double, double>> st_pairs;
  std::vector<double> alphas{2.0, 4.0, 8.0, 16.0};
  std::optional<double> tol_override;
  int jobs = 1;
  int max_e2_fields = 3;     // smooth densities used as W2 endpoints
  bool e2_delta_pairs = true;  // add Dirac pairs on the graph backend
  int max_bochner_g = 2;     // nonnegative g fields per u for E4/E5
  int max_e5_times = 17;     // interior grid times sampled by E5
  // scenario-supplied W2 endpoints (e.g. bumps near a curvature defect)
  std::vector<std::pair<std::string, Vec>> extra_e2_densities;
};

/// Default tolerance: exact identities on graphs, discretization-limited on
/// the circle.
inline double default_tol(const FlowSpec& flow) {
  if (flow.backend == Backend::graph) return 1e-9;
  double h = 2.0 * M_PI / flow.n();
  double dt = flow.grid.dt();
  return std::max(5e-3, 10.0 * h * h + 10.0 * dt * dt);
}

/// (s,t) pairs spanning the grid: the full window, nested halves, and a
/// short window at the start (short windows localize the inequalities).
inline std::vector<std::pair<double, double>> default_st_pairs(const TimeGrid& grid) {
  std::vector<std::pair<int, int>> iv = {
      {0, grid.n_steps},
      {0, grid.n_steps / 2},
      {grid.n_steps / 2, grid.n_steps},
      {grid.n_steps / 4, (3 * grid.n_steps) / 4},
      {(3 * grid.n_steps) / 8, (5 * grid.n_steps) / 8},
      {0, std::max(1, grid.n_steps / 20)},
  };
  std::vector<std::pair<double, double>> pairs;
  for (auto [a, b] : iv) {
    if (a >= b) continue;
    std::pair<double, double> p{grid.time(a), grid.time(b)};
    bool dup = false;
    for (const auto& q : pairs) dup = dup || (q == p);
    if (!dup) pairs.push_back(p);
  }
  return pairs;
}

namespace detail {

template <class Fn>
void parallel_tasks(int n_tasks, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : workers) th.join();
}

inline void min_witness_field(RowResult& row, const Field& margin) {
  int idx = 0;
  row.margin = margin.minCoeff(&idx);
  row.x = idx;
}

inline void min_witness_mat(RowResult& row, const Mat& margin) {
  int ix = 0, iy = 0;
  row.margin = margin.minCoeff(&ix, &iy);
  row.x = ix;
  row.y = iy;
}

}  // namespace detail

/// W2 endpoints for the E2 rows: positive bank densities, scenario-supplied
/// densities, and Dirac pairs on the graph backend.
inline std::vector<std::pair<std::string, ProbabilityMeasure>> e2_measures(
    const FlowSpec& flow, const TestFunctionBank& bank, const SuiteConfig& config) {
  std::vector<std::pair<std::string, ProbabilityMeasure>> measures;
  const Measure m_end = flow.measure_any(flow.grid.t_end);
  int taken = 0;
  for (const auto& bf : bank.fields) {
    if (bf.is_constant) continue;
    if (taken++ >= config.max_e2_fields) break;
    Vec w = TestFunctionBank::positive_version(bf.u).cwiseProduct(m_end.weights);
    measures.emplace_back(bf.id, ProbabilityMeasure::normalized(w));
  }
  for (const auto& [id, dens] : config.extra_e2_densities)
    measures.emplace_back(id, ProbabilityMeasure::normalized(dens.cwiseProduct(m_end.weights)));
  if (config.e2_delta_pairs && flow.backend == Backend::graph) {
    int n = flow.n();
    measures.emplace_back("delta0", ProbabilityMeasure::dirac(n, 0));
    measures.emplace_back("delta" + std::to_string(n / 2),
                          ProbabilityMeasure::dirac(n, n / 2));
    if (n > 2)
      measures.emplace_back("delta" + std::to_string(n - 1),
                            ProbabilityMeasure::dirac(n, n - 1));
  }
  return measures;
}

/// Runs the full inequality suite. Rows are evaluated in a deterministic
/// order; parallel workers only fill independent row slots.
inline SuiteResult run_suite(const FlowSpec& flow, const TestFunctionBank& bank,
                             SuiteConfig config = {}) {
  if (config.st_pairs.empty()) config.st_pairs = default_st_pairs(flow.grid);
  const double tol = config.tol_override.value_or(default_tol(flow));
  const bool graph = flow.backend == Backend::graph;

  // chain-rule caveat: log-type and Harnack rows are informational on graphs
  auto is_informational = [&](const std::string& id) {
    if (!graph) return false;
    return id == "E6" || id == "E9" || id == "E10" || id.rfind("E11", 0) == 0 || id == "E12";
  };

  std::vector<RowResult> rows;
  std::vector<std::function<void(RowResult&)>> tasks;
  auto add_task = [&](RowResult proto, std::function<void(RowResult&)> fn) {
    proto.tol = tol;
    proto.informational = is_informational(proto.inequality);
    rows.push_back(std::move(proto));
    tasks.push_back(std::move(fn));
  };

  // --- E2: Wasserstein contraction on smooth densities (and Dirac pairs on graphs)
  {
    auto measures = e2_measures(flow, bank, config);
    for (auto [s, t] : config.st_pairs)
      for (std::size_t i = 0; i < measures.size(); ++i)
        for (std::size_t j = i + 1; j < measures.size(); ++j) {
          RowResult proto;
          proto.inequality = "E2";
          proto.u_id = measures[i].first;
          proto.g_id = measures[j].first;
          proto.s = s;
          proto.t = t;
          auto mu = measures[i].second, nu = measures[j].second;
          double ss = s, tt = t;
          add_task(proto, [&flow, mu, nu, ss, tt](RowResult& row) {
            row.margin = check_E2(flow, ss, tt, mu, nu).margin;
          });
        }
  }

  // --- pointwise and pairwise function inequalities
  for (auto [s, t] : config.st_pairs) {
    for (const auto& bf : bank.fields) {
      const Field u = bf.u;
      const Field upos = TestFunctionBank::positive_version(u);
      double ss = s, tt = t;

      auto field_task = [&](const std::string& id, auto&& eval) {
        RowResult proto;
        proto.inequality = id;
        proto.u_id = bf.id;
        proto.s = ss;
        proto.t = tt;
        add_task(proto, [eval](RowResult& row) {
          detail::min_witness_field(row, eval());
        });
      };
      auto pair_task = [&](const std::string& id, auto&& eval) {
        RowResult proto;
        proto.inequality = id;
        proto.u_id = bf.id;
        proto.s = ss;
        proto.t = tt;
        add_task(proto, [eval](RowResult& row) { detail::min_witness_mat(row, eval()); });
      };

      field_task("E3", [&flow, ss, tt, u]() { return e3_margin(flow, ss, tt, u); });
      field_task("E6", [&flow, ss, tt, u]() { return e6_margin(flow, ss, tt, u); });
      field_task("E7", [&flow, ss, tt, u]() { return e7_margin(flow, ss, tt, u); });
      field_task("E8", [&flow, ss, tt, u]() { return e8_margin(flow, ss, tt, u); });
      field_task("E9", [&flow, ss, tt, upos]() { return e9_margin(flow, ss, tt, upos); });
      field_task("E10", [&flow, ss, tt, upos]() { return e10_margin(flow, ss, tt, upos); });
      for (double alpha : config.alphas) {
        std::string id = "E11@" + std::to_string(static_cast<int>(alpha));
        pair_task(id, [&flow, ss, tt, upos, alpha]() {
          return e11_margin(flow, ss, tt, upos, alpha);
        });
      }
      pair_task("E12", [&flow, ss, tt, upos]() { return e12_margin(flow, ss, tt, upos); });
    }
  }

  // --- dynamic Bochner rows (E4 over the full window, E5 on sampled times)
  {
    std::vector<const BankField*> us, gs;
    for (const auto& bf : bank.fields)
      if (!bf.is_constant) us.push_back(&bf);
    gs.push_back(nullptr);  // g = 1
    for (const auto& bf : bank.fields) {
      if (bf.is_constant) continue;
      gs.push_back(&bf);
      if (static_cast<int>(gs.size()) > config.max_bochner_g) break;
    }
    double S = flow.grid.t_start, T = flow.grid.t_end;
    std::vector<double> e5_times;
    {
      auto idx = detail::sample_indices(flow.grid.n_times(), config.max_e5_times + 2);
      for (int i : idx)
        if (i != 0 && i != flow.grid.n_steps) e5_times.push_back(flow.grid.time(i));
    }
    for (const BankField* ubf : us) {
      for (const BankField* gbf : gs) {
        Field g = gbf ? TestFunctionBank::positive_version(gbf->u)
                      : Field::Constant(flow.n(), 1.0);
        std::string gid = gbf ? gbf->id : "const1";
        Field u = ubf->u;

        RowResult proto4;
        proto4.inequality = "E4";
        proto4.u_id = ubf->id;
        proto4.g_id = gid;
        proto4.s = S;
        proto4.t = T;
        add_task(proto4, [&flow, u, g, S, T](RowResult& row) {
          auto rws = e4_rows(flow, S, T, u, g);
          row.margin = std::numeric_limits<double>::infinity();
          for (const auto& rw : rws)
            if (rw.value < row.margin) {
              row.margin = rw.value;
              row.r = rw.r;
            }
        });

        RowResult proto5;
        proto5.inequality = "E5";
        proto5.u_id = ubf->id;
        proto5.g_id = gid;
        proto5.s = S;
        proto5.t = T;
        add_task(proto5, [&flow, u, g, e5_times](RowResult& row) {
          row.margin = std::numeric_limits<double>::infinity();
          for (double tt : e5_times) {
            double v = e5_margin(flow, tt, u, g);
            if (v < row.margin) {
              row.margin = v;
              row.r = tt;
            }
          }
        });
      }
    }
  }

  detail::parallel_tasks(static_cast<int>(tasks.size()), config.jobs,
                         [&](int i) { tasks[i](rows[i]); });
  for (auto& row : rows) row.pass = row.margin >= -row.tol;

  SuiteResult result;
  result.rows = std::move(rows);

  // aggregate per inequality id (deterministic: first minimal row wins)
  std::map<std::string, CheckReport> agg;
  for (const auto& row : result.rows) {
    auto it = agg.find(row.inequality);
    if (it == agg.end() || row.margin < it->second.margin) {
      CheckReport rep;
      rep.id = row.inequality;
      rep.margin = row.margin;
      rep.witness = {row.s, row.t, row.r, row.x, row.y, row.u_id, row.g_id};
      rep.tol = tol;
      rep.informational = row.informational;
      rep.grid_description = std::to_string(config.st_pairs.size()) + " (s,t) windows, " +
                             std::to_string(bank.fields.size()) + " bank fields";
      finalize(rep);
      agg[row.inequality] = rep;
    }
  }
  for (auto& [id, rep] : agg) result.reports.push_back(rep);

  // implication matrix
  auto passed = [&](const std::string& id) -> std::optional<bool> {
    auto it = agg.find(id);
    if (it == agg.end()) return std::nullopt;
    return it->second.pass;
  };
  auto add_impl = [&](std::string name, std::vector<std::string> prem,
                      std::vector<std::string> conc) {
    Implication imp{std::move(name), std::move(prem), std::move(conc), "vacuous"};
    bool all_prem = true, known = true;
    for (const auto& p : imp.premises) {
      auto v = passed(p);
      if (!v) known = false;
      else all_prem = all_prem && *v;
    }
    if (known && all_prem) {
      imp.status = "consistent";
      for (const auto& c : imp.conclusions) {
        auto v = passed(c);
        if (v && !*v) imp.status = "violated";
      }
    }
    result.implications.push_back(std::move(imp));
  };
  add_impl("E3=>E7,E8", {"E3"}, {"E7", "E8"});
  add_impl("E7,E8=>E3", {"E7", "E8"}, {"E3"});
  add_impl("E6=>E9,E10", {"E6"}, {"E9", "E10"});
  add_impl("E6=>E11@2", {"E6"}, {"E11@2"});
  add_impl("E6=>E11@4", {"E6"}, {"E11@4"});
  add_impl("E11@2=>E11@4", {"E11@2"}, {"E11@4"});
  add_impl("E11=>E12", {"E11@2", "E11@4", "E11@8", "E11@16"}, {"E12"});
  add_impl("E8=>E4", {"E8"}, {"E4"});
  return result;
}

/// Recomputes the margin described by a report's witness from scratch.
/// Reports are only trusted when this reproduces the stored margin.
inline double reevaluate_margin(const FlowSpec& flow, const TestFunctionBank& bank,
                                const SuiteConfig& config, const CheckReport& rep) {
  const Witness& w = rep.witness;
  auto field_of = [&](const std::string& id) -> const Field& {
    for (const auto& bf : bank.fields)
      if (bf.id == id) return bf.u;
    throw DomainError("reevaluate_margin: unknown bank field " + id);
  };
  const std::string& id = rep.id;
  if (id == "E2") {
    auto measures = e2_measures(flow, bank, config);
    const ProbabilityMeasure *mu = nullptr, *nu = nullptr;
    for (const auto& [mid, m] : measures) {
      if (mid == w.u_id) mu = &m;
      if (mid == w.g_id) nu = &m;
    }
    if (!mu || !nu) throw DomainError("reevaluate_margin: unknown E2 measures");
    return check_E2(flow, w.s, w.t, *mu, *nu).margin;
  }
  if (id == "E3") return e3_margin(flow, w.s, w.t, field_of(w.u_id))[w.x];
  if (id == "E6") return e6_margin(flow, w.s, w.t, field_of(w.u_id))[w.x];
  if (id == "E7") return e7_margin(flow, w.s, w.t, field_of(w.u_id))[w.x];
  if (id == "E8") return e8_margin(flow, w.s, w.t, field_of(w.u_id))[w.x];
  if (id == "E9")
    return e9_margin(flow, w.s, w.t,
                     TestFunctionBank::positive_version(field_of(w.u_id)))[w.x];
  if (id == "E10")
    return e10_margin(flow, w.s, w.t,
                      TestFunctionBank::positive_version(field_of(w.u_id)))[w.x];
  if (id.rfind("E11@", 0) == 0) {
    double alpha = std::stod(id.substr(4));
    return e11_margin(flow, w.s, w.t, TestFunctionBank::positive_version(field_of(w.u_id)),
                      alpha)(w.x, w.y);
  }
  if (id == "E12")
    return e12_margin(flow, w.s, w.t,
                      TestFunctionBank::positive_version(field_of(w.u_id)))(w.x, w.y);
  auto g_field = [&]() {
    return w.g_id == "const1" ? Field(Field::Constant(flow.n(), 1.0))
                              : Field(TestFunctionBank::positive_version(field_of(w.g_id)));
  };
  if (id == "E4") {
    auto rows = e4_rows(flow, w.s, w.t, field_of(w.u_id), g_field());
    for (const auto& r : rows)
      if (r.r == w.r) return r.value;
    throw DomainError("reevaluate_margin: E4 witness time off grid");
  }
  if (id == "E5") return e5_margin(flow, w.r, field_of(w.u_id), g_field());
  throw DomainError("reevaluate_margin: unknown inequality " + id);
}

}  // namespace srf
