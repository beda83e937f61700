// Acceptance suite: one test case per criterion, each printing a single
// summary line. Criteria are asserted as specified; a failing CHECK here is
// a real finding, not a flaky tolerance.
#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "srf/report.hpp"
#include "srf/scenario.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using namespace srf;
using namespace srf::testing;
namespace fs = std::filesystem;

namespace {

void verdict_line(int criterion, bool pass, const std::string& detail) {
  std::cout << "ACCEPTANCE " << criterion << ": " << (pass ? "PASS" : "FAIL") << " - "
            << detail << std::endl;
}

std::string sci(double x) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << x;
  return ss.str();
}

const CheckReport* find_report(const SuiteResult& result, const std::string& id) {
  for (const auto& rep : result.reports)
    if (rep.id == id) return &rep;
  return nullptr;
}

}  // namespace

TEST_CASE("exact identity suite on random graphs", "[criterion1]") {
  const double s = 0.25, t = 1.25;
  double max_duality = 0.0, max_pos = 0.0, max_maxprin = 0.0, max_lp_excess = 0.0;

  for (auto [seed, n] : std::vector<std::pair<std::uint64_t, int>>{{101, 8}, {102, 14},
                                                                   {103, 20}}) {
    TimeGrid grid{s, t, 1000};  // dt = 1e-3
    FlowSpec flow = random_graph_flow(seed, n, grid);
    Field h = random_field(seed + 1, n), g = random_field(seed + 2, n);
    max_duality = std::max(max_duality, duality_check(flow, s, t, h, g));

    Field u = random_field(seed + 3, n);
    Field pu = forward(flow, s, t, u).final.col(0);
    Field pabs = forward(flow, s, t, Field(u.array().abs().matrix())).final.col(0);
    max_pos = std::max(max_pos, -pabs.minCoeff());
    max_maxprin = std::max({max_maxprin, pu.maxCoeff() - u.maxCoeff(),
                            u.minCoeff() - pu.minCoeff()});

    Measure ms = measure_at(flow, s), mt = measure_at(flow, t);
    for (double p : {1.0, 2.0}) {
      double excess = lp_norm(pu, mt, p) -
                      std::exp(flow.lipschitz * (t - s) / p) * lp_norm(u, ms, p);
      max_lp_excess = std::max(max_lp_excess, excess);
    }
    max_lp_excess =
        std::max(max_lp_excess, pu.cwiseAbs().maxCoeff() - u.cwiseAbs().maxCoeff());
  }

  auto duality_at = [&](int n_steps) {
    TimeGrid grid{s, t, n_steps};
    FlowSpec flow = random_graph_flow(101, 8, grid);
    return duality_check(flow, s, t, random_field(102, 8), random_field(103, 8));
  };
  double order = std::log2(duality_at(100) / duality_at(200));

  bool pass = max_duality <= 1e-6 && order >= 1.8 && max_pos <= 1e-12 &&
              max_maxprin <= 1e-12 && max_lp_excess <= 1e-12;
  verdict_line(1, pass,
               "duality " + sci(max_duality) + " (<=1e-06), order " + sci(order) +
                   " (>=1.8), positivity " + sci(max_pos) + ", max principle " +
                   sci(max_maxprin) + ", Lp excess " + sci(max_lp_excess) + " (<=1e-12)");
  CHECK(max_duality <= 1e-6);
  CHECK(order >= 1.8);
  CHECK(max_pos <= 1e-12);
  CHECK(max_maxprin <= 1e-12);
  CHECK(max_lp_excess <= 1e-12);
}

TEST_CASE("variance identity on both backends", "[criterion2]") {
  auto graph_defect = [](int n_steps) {
    TimeGrid grid{0.25, 1.25, n_steps};
    FlowSpec flow = random_graph_flow(47, 12, grid);
    return variance_identity_defect(flow, 0.25, 1.25, random_field(48, 12),
                                    Field(random_field(49, 12).array().abs() + 0.1));
  };
  double graph_fine = graph_defect(1000);  // dt = 1e-3
  double order = std::log2(graph_defect(125) / graph_defect(250));

  TimeGrid grid{0.25, 1.25, 1000};
  FlowSpec circ = circle_flow(32, 0.5, grid);
  Field uc(32), gc(32);
  for (int i = 0; i < 32; ++i) {
    double x = 2.0 * M_PI * i / 32;
    uc[i] = std::cos(x) + 0.3 * std::sin(2.0 * x);
    gc[i] = 1.0 + 0.5 * std::cos(x);
  }
  double circle_fine = variance_identity_defect(circ, 0.25, 1.25, uc, gc);

  bool pass = graph_fine <= 1e-4 && circle_fine <= 1e-4 && order >= 1.8;
  verdict_line(2, pass,
               "relative defect graph " + sci(graph_fine) + ", circle " + sci(circle_fine) +
                   " (<=1e-04), refinement order " + sci(order) + " (~2)");
  CHECK(graph_fine <= 1e-4);
  CHECK(circle_fine <= 1e-4);
  CHECK(order >= 1.8);
}

TEST_CASE("two-point closed forms and static variants", "[criterion3]") {
  // trajectories vs the commuting-family matrix exponential
  TwoPointParams p{.c0 = 1.0, .lam = 0.5, .phi0 = 0.0, .phi1 = std::log(2.0), .beta = 0.3};
  TimeGrid grid{0.25, 1.25, 2000};
  FlowSpec flow = two_point_flow(grid, p);
  Mat I2 = Mat::Identity(2, 2);
  PropagatorRun fwd = forward(flow, 0.25, 1.25, I2, true);
  PropagatorRun adj = adjoint(flow, 1.25, 0.25, I2, true);
  double traj_err = 0.0;
  for (int j = 0; j <= 2000; j += 100) {
    double tj = grid.time(j);
    traj_err = std::max(traj_err, (fwd.at_index(j) - two_point_forward_oracle(flow, p, 0.25, tj))
                                      .cwiseAbs()
                                      .maxCoeff());
    traj_err = std::max(traj_err, (adj.at_index(j) - two_point_adjoint_oracle(flow, p, 1.25, tj))
                                      .cwiseAbs()
                                      .maxCoeff());
  }

  // curvature of the unit two-point space
  FlowSpec unit = two_point_flow(TimeGrid{0.25, 1.25, 16});
  double kstar = estimate_curvature(snapshot_at(unit, 0.25));
  double curv_err = std::abs(kstar - 2.0);

  // static variants at K = 2 over the bank
  GeneratorSnapshot snap = snapshot_at(unit, 0.25);
  Mat dist = unit.metric_matrix(0.25);
  TestFunctionBank bank = make_bank(unit, 7, 6);
  std::map<StaticVariant, double> variant_min;
  for (auto v : {StaticVariant::iia, StaticVariant::iib, StaticVariant::iiia,
                 StaticVariant::iiib, StaticVariant::iv, StaticVariant::v}) {
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& bf : bank.fields) {
      Field u = TestFunctionBank::positive_version(bf.u);
      for (double td : {0.1, 0.25, 0.5, 1.0, 2.0})
        mn = std::min(mn, check_static(snap, dist, 2.0, td, u, v).minCoeff());
    }
    variant_min[v] = mn;
  }
  // "margin > 0" graded as >= -1e-12: (iia)/(iib) are sharp on this space and
  // their minima are exact zeros up to rounding
  double worst_variant = std::numeric_limits<double>::infinity();
  std::string variant_detail;
  for (auto& [v, mn] : variant_min) {
    worst_variant = std::min(worst_variant, mn);
    variant_detail += to_string(v) + " " + sci(mn) + "  ";
  }

  bool pass = traj_err <= 1e-8 && curv_err <= 1e-9 && worst_variant >= -1e-12;
  verdict_line(3, pass,
               "trajectory error " + sci(traj_err) + " (<=1e-08), curvature error " +
                   sci(curv_err) + " (<=1e-09), static variant minima: " + variant_detail);
  CHECK(traj_err <= 1e-8);
  CHECK(curv_err <= 1e-9);
  for (auto& [v, mn] : variant_min) {
    INFO(to_string(v));
    CHECK(mn >= -1e-12);
  }
}

TEST_CASE("circle curvature at N = 256", "[criterion4]") {
  TimeGrid grid{0.25, 1.25, 16};
  double k_curved = estimate_curvature(snapshot_at(circle_flow(256, 0.5, grid), 0.25));
  double k_flat = estimate_curvature(snapshot_at(circle_flow(256, 0.0, grid), 0.25));
  bool pass = std::abs(k_curved + 0.5) <= 0.05 && std::abs(k_flat) <= 0.02;
  verdict_line(4, pass,
               "f = 0.5 cos x: K* = " + sci(k_curved) + " (target -0.5 +- 0.05), flat: K* = " +
                   sci(k_flat) + " (target 0 +- 0.02)");
  CHECK(std::abs(k_curved + 0.5) <= 0.05);
  CHECK(std::abs(k_flat) <= 0.02);
}

TEST_CASE("equivalence round-trip on the circle", "[criterion5]") {
  // the K = -0.5 circle from criterion 4, reparametrized with the same K,
  // is the flow on which every checker is expected to hold simultaneously
  Scenario sc = scenario_from_json(reparametrized_circle_json());
  TestFunctionBank bank = make_bank(sc.flow, sc.seed, sc.n_random);
  bool bank_ok = bank.fields.size() >= 20;
  SuiteResult result = run_suite(sc.flow, bank, suite_config_for(sc));

  double h = 2.0 * M_PI / sc.flow.n();
  double dt = sc.flow.grid.dt();
  double tol = 5e-3 + 10.0 * h * h + 10.0 * dt * dt;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto& rep : result.reports) min_margin = std::min(min_margin, rep.margin);

  bool implications_ok = true;
  std::string bad;
  for (const char* name : {"E3=>E7,E8", "E7,E8=>E3", "E6=>E9,E10", "E6=>E11@2", "E6=>E11@4",
                           "E11@2=>E11@4", "E11=>E12"}) {
    bool found = false;
    for (const auto& imp : result.implications)
      if (imp.name == name) {
        found = true;
        if (imp.status != "consistent") {
          implications_ok = false;
          bad += std::string(name) + "=" + imp.status + " ";
        }
      }
    if (!found) {
      implications_ok = false;
      bad += std::string(name) + "=missing ";
    }
  }

  bool pass = bank_ok && implications_ok && min_margin >= -tol;
  verdict_line(5, pass,
               "bank " + std::to_string(bank.fields.size()) + " fields, min margin " +
                   sci(min_margin) + " (>= " + sci(-tol) + "), implications " +
                   (implications_ok ? "consistent" : bad));
  CHECK(bank_ok);
  CHECK(implications_ok);
  CHECK(min_margin >= -tol);
}

TEST_CASE("reparametrized super-Ricci flows", "[criterion6]") {
  std::string detail;
  bool pass = true;

  // K = 2 two-point space
  {
    Scenario sc = scenario_from_json(reparametrized_two_point_json());
    TestFunctionBank bank = make_bank(sc.flow, sc.seed, sc.n_random);
    SuiteConfig cfg = suite_config_for(sc);
    SuiteResult result = run_suite(sc.flow, bank, cfg);
    detail += "two-point:";
    for (const char* id : {"E2", "E3", "E7", "E8"}) {
      const CheckReport* rep = find_report(result, id);
      REQUIRE(rep != nullptr);
      detail += std::string(" ") + id + " " + sci(rep->margin);
      pass = pass && rep->pass;
      INFO(std::string("two-point ") + id);
      CHECK(rep->pass);
    }
  }

  // K = -0.5 circle
  {
    Scenario sc = scenario_from_json(reparametrized_circle_json());
    TestFunctionBank bank = make_bank(sc.flow, sc.seed, sc.n_random);
    SuiteResult result = run_suite(sc.flow, bank, suite_config_for(sc));
    detail += "  circle:";
    for (const char* id : {"E2", "E3", "E6", "E7", "E8", "E9", "E10", "E11@2", "E11@4",
                           "E11@8", "E11@16", "E12"}) {
      const CheckReport* rep = find_report(result, id);
      REQUIRE(rep != nullptr);
      detail += std::string(" ") + id + " " + sci(rep->margin);
      pass = pass && rep->pass;
      INFO(std::string("circle ") + id);
      CHECK(rep->pass);
    }
  }
  verdict_line(6, pass, detail);
}

TEST_CASE("violator scenarios refute, reverted scenarios pass", "[criterion7]") {
  std::string detail;
  bool pass = true;
  for (const std::string kind : {"concave-weight", "shrink-too-fast"}) {
    double a = kind == "concave-weight" ? 0.8 : 2.0;
    for (double level : {a, 0.0}) {
      Scenario sc = violator_scenario(kind, level);
      TestFunctionBank bank = make_bank(sc.flow, sc.seed, sc.n_random);
      SuiteResult result = run_suite(sc.flow, bank, suite_config_for(sc));
      const CheckReport* e2 = find_report(result, "E2");
      const CheckReport* e3 = find_report(result, "E3");
      REQUIRE(e2 != nullptr);
      REQUIRE(e3 != nullptr);
      if (level != 0.0) {
        detail += kind + ": E2 " + sci(e2->margin) + " E3 " + sci(e3->margin) + "  ";
        pass = pass && e2->margin < -1e-3 && e3->margin < -1e-3;
        CHECK(e2->margin < -1e-3);
        CHECK(e3->margin < -1e-3);
      } else {
        detail += "reverted: E2 " + (e2->pass ? std::string("pass") : std::string("fail")) +
                  " E3 " + (e3->pass ? std::string("pass") : std::string("fail")) + "  ";
        pass = pass && e2->pass && e3->pass;
        CHECK(e2->pass);
        CHECK(e3->pass);
      }
    }
  }
  verdict_line(7, pass, detail);
}

TEST_CASE("transport exactness", "[criterion8]") {
  TimeGrid grid{0.25, 1.25, 16};
  FlowSpec flow = random_graph_flow(61, 4, grid);
  Mat d = flow.metric_matrix(0.25);
  double lp_vs_brute = 0.0;
  for (int p : {1, 2}) {
    Mat C = (p == 1) ? d : Mat(d.cwiseProduct(d));
    for (std::uint64_t s : {1, 2, 3, 4, 5, 6}) {
      auto mu = ProbabilityMeasure::normalized(random_field(s, 4).array().abs() + 0.05);
      auto nu = ProbabilityMeasure::normalized(random_field(s + 40, 4).array().abs() + 0.05);
      double lp = wasserstein(flow, 0.25, mu, nu, p).cost;
      double brute = brute_force_transport(C, mu.weights, nu.weights);
      lp_vs_brute = std::max(lp_vs_brute, std::abs(lp - brute));
    }
  }

  FlowSpec big = random_graph_flow(62, 12, grid);
  Mat db = big.metric_matrix(0.75);
  double tri_excess = 0.0;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pick(0, 11);
  for (int trial = 0; trial < 500; ++trial) {
    int x = pick(rng), y = pick(rng), z = pick(rng);
    tri_excess = std::max(tri_excess, db(x, y) - db(x, z) - db(z, y));
  }
  double sym = (db - db.transpose()).cwiseAbs().maxCoeff();

  Field phi = random_field(63, 12);
  Field q1 = hopf_lax(big, 0.25, 0.7, phi);
  Field q2 = hopf_lax(big, 0.25, 1.9, phi);
  bool hl_exact = (q1.array() <= phi.array()).all() && (q2.array() <= q1.array()).all();

  bool pass = lp_vs_brute <= 1e-10 && tri_excess <= 1e-8 && sym <= 1e-10 && hl_exact;
  verdict_line(8, pass,
               "LP vs enumeration " + sci(lp_vs_brute) + " (<=1e-10), triangle excess " +
                   sci(tri_excess) + " (<=1e-08), symmetry " + sci(sym) +
                   ", Hopf-Lax monotone " + (hl_exact ? "yes" : "no"));
  CHECK(lp_vs_brute <= 1e-10);
  CHECK(tri_excess <= 1e-8);
  CHECK(sym <= 1e-10);
  CHECK(hl_exact);
}

TEST_CASE("byte-identical reports", "[criterion9]") {
  fs::path sc = fs::path(SCENARIO_DIR) / "static-two-point.json";
  fs::path base = fs::temp_directory_path() / "srflab-acceptance-9";
  fs::remove_all(base);
  fs::create_directories(base / "a");
  fs::create_directories(base / "b");
  auto run = [&](const fs::path& out) {
    std::string cmd = std::string(SRFLAB_PATH) + " check --scenario " + sc.string() +
                      " --seed 7 --out " + out.string() + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  bool ran = run(base / "a") == 0 && run(base / "b") == 0;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string ra = slurp(base / "a" / "report.csv"), rb = slurp(base / "b" / "report.csv");
  bool identical = ran && !ra.empty() && ra == rb;
  verdict_line(9, identical,
               "two cmd_check runs, seed 7: report.csv " +
                   std::string(identical ? "byte-identical" : "differs") + " (" +
                   std::to_string(ra.size()) + " bytes)");
  CHECK(ran);
  CHECK(identical);
}
