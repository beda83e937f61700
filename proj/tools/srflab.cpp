#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "srf/report.hpp"
#include "srf/scenario.hpp"

namespace {

struct RunConfig {
  std::string scenario_path;
  std::string out_dir;
  double tol = -1.0;  // < 0: scenario / backend default
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  std::string mu_spec = "dirac:0";
  std::string nu_spec;
};

srf::ProbabilityMeasure parse_measure_spec(const srf::FlowSpec& flow, const std::string& spec) {
  const int n = flow.n();
  if (spec == "uniform")
    return srf::ProbabilityMeasure::normalized(flow.measure_any(flow.grid.t_start).weights);
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  if (kind == "dirac") {
    int x = std::stoi(spec.substr(colon + 1));
    if (x < 0 || x >= n) throw srf::DomainError("measure spec: state out of range");
    return srf::ProbabilityMeasure::dirac(n, x);
  }
  if (kind == "bump") {
    if (flow.backend != srf::Backend::circle1d)
      throw srf::DomainError("measure spec: bump needs the circle backend");
    auto rest = spec.substr(colon + 1);
    auto comma = rest.find(',');
    double center = std::stod(rest.substr(0, comma));
    double kappa = comma == std::string::npos ? 8.0 : std::stod(rest.substr(comma + 1));
    srf::Vec w(n);
    for (int i = 0; i < n; ++i)
      w[i] = std::exp(kappa * std::cos(2.0 * M_PI * i / n - center));
    return srf::ProbabilityMeasure::normalized(
        w.cwiseProduct(flow.measure_any(flow.grid.t_start).weights));
  }
  throw srf::DomainError("measure spec '" + spec + "': use dirac:<i>, bump:<x>,<kappa>, uniform");
}

int cmd_validate(const RunConfig& cfg) {
  srf::Scenario sc = srf::load_scenario(cfg.scenario_path);
  srf::A1Report rep = srf::validate_a1(sc.flow);
  std::cout << "scenario: " << sc.name << "\n"
            << "declared_L: " << srf::g17(rep.declared_L) << "\n"
            << "fitted_L: " << srf::g17(rep.fitted_L) << "\n"
            << "fitted_L_time: " << srf::g17(rep.fitted_L_time) << "\n"
            << "fitted_L_space: " << srf::g17(rep.fitted_L_space) << "\n"
            << "ellipticity_L: " << srf::g17(rep.ellipticity_L) << "\n"
            << "grid: " << rep.grid_description << "\n"
            << "verdict: " << (rep.pass ? "pass" : "fail") << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_check(const RunConfig& cfg) {
  srf::Scenario sc = srf::load_scenario(cfg.scenario_path);
  std::uint64_t seed = cfg.seed_set ? cfg.seed : sc.seed;
  srf::TestFunctionBank bank = srf::make_bank(sc.flow, seed, sc.n_random);
  srf::SuiteConfig scfg = srf::suite_config_for(sc);
  if (cfg.tol >= 0.0) scfg.tol_override = cfg.tol;
  scfg.jobs = cfg.jobs;
  srf::SuiteResult result = srf::run_suite(sc.flow, bank, scfg);

  std::filesystem::path out = cfg.out_dir.empty() ? "." : cfg.out_dir;
  std::filesystem::create_directories(out);
  {
    std::ofstream csv(out / "report.csv", std::ios::binary);
    srf::write_report_csv(csv, result);
  }
  srf::Json summary = srf::summary_json(sc.name, result);

  bool mismatch = false;
  srf::Json verdicts = srf::Json::object();
  for (const auto& [id, want] : sc.expected) {
    const srf::CheckReport* found = nullptr;
    for (const auto& rep : result.reports)
      if (rep.id == id) found = &rep;
    if (!found) {
      verdicts[id] = "missing";
      mismatch = true;
      continue;
    }
    if (found->informational) {
      verdicts[id] = "informational";
      continue;
    }
    bool got = found->pass;
    bool ok = got == (want == "pass");
    verdicts[id] = ok ? "match" : "mismatch";
    mismatch = mismatch || !ok;
  }
  summary["expected_verdicts"] = verdicts;
  summary["seed"] = seed;
  {
    std::ofstream js(out / "summary.json", std::ios::binary);
    js << summary.dump(2) << "\n";
  }
  for (const auto& rep : result.reports)
    std::cout << rep.id << ": margin " << srf::g17(rep.margin) << " tol " << srf::g17(rep.tol)
              << (rep.informational ? " [informational] " : " ")
              << (rep.pass ? "pass" : "fail") << "\n";
  std::cout << (mismatch ? "expected verdicts: MISMATCH" : "expected verdicts: match") << "\n";
  return mismatch ? 1 : 0;
}

int cmd_curvature(const RunConfig& cfg) {
  srf::Scenario sc = srf::load_scenario(cfg.scenario_path);
  auto idx = srf::detail::sample_indices(sc.flow.grid.n_times(), 33);
  std::ostringstream csv;
  csv << "t,kstar\n";
  double k_start = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    double t = sc.flow.grid.time(idx[a]);
    double k = srf::estimate_curvature(srf::snapshot_at(sc.flow, t));
    if (a == 0) k_start = k;
    csv << srf::g17(t) << ',' << srf::g17(k) << '\n';
  }
  std::cout << csv.str();
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream f(std::filesystem::path(cfg.out_dir) / "curvature.csv", std::ios::binary);
    f << csv.str();
  }
  if (sc.expected_curvature) {
    auto [want, tol] = *sc.expected_curvature;
    bool ok = std::abs(k_start - want) <= tol;
    std::cout << "expected " << srf::g17(want) << " +- " << srf::g17(tol) << ": "
              << (ok ? "match" : "mismatch") << "\n";
    return ok ? 0 : 1;
  }
  return 0;
}

int cmd_transport(const RunConfig& cfg) {
  srf::Scenario sc = srf::load_scenario(cfg.scenario_path);
  if (cfg.nu_spec.empty()) throw srf::DomainError("transport: --nu is required");
  srf::ProbabilityMeasure mu = parse_measure_spec(sc.flow, cfg.mu_spec);
  srf::ProbabilityMeasure nu = parse_measure_spec(sc.flow, cfg.nu_spec);

  auto idx = srf::detail::sample_indices(sc.flow.grid.n_times(), 17);
  std::ostringstream csv;
  csv << "t,w2,e2_margin\n";
  double s0 = sc.flow.grid.t_start;
  for (int i : idx) {
    double t = sc.flow.grid.time(i);
    double w = srf::wasserstein(sc.flow, t, mu, nu, 2).wasserstein();
    std::string margin = "";
    if (i > 0) margin = srf::g17(srf::check_E2(sc.flow, s0, t, mu, nu).margin);
    csv << srf::g17(t) << ',' << srf::g17(w) << ',' << margin << '\n';
  }
  std::cout << csv.str();
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream f(std::filesystem::path(cfg.out_dir) / "transport.csv", std::ios::binary);
    f << csv.str();
    srf::TransportPlan plan = srf::wasserstein(sc.flow, sc.flow.grid.t_end, mu, nu, 2);
    std::ofstream p(std::filesystem::path(cfg.out_dir) / "trajectory_plan.csv",
                    std::ios::binary);
    for (int r = 0; r < plan.coupling.rows(); ++r) {
      for (int c = 0; c < plan.coupling.cols(); ++c)
        p << (c ? "," : "") << srf::g17(plan.coupling(r, c));
      p << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srflab: checkers for functional inequalities on time-dependent "
               "finite metric measure spaces"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto add_common = [&cfg](CLI::App* sub, bool need_out_flags = true) {
    sub->add_option("--scenario", cfg.scenario_path, "scenario JSON file")->required();
    if (need_out_flags) sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--tol", cfg.tol, "tolerance override");
    sub->add_option("--jobs", cfg.jobs, "worker threads");
  };

  CLI::App* validate = app.add_subcommand("validate", "structural + A1 validation");
  add_common(validate, false);

  CLI::App* check = app.add_subcommand("check", "run the inequality suite");
  add_common(check);
  check->add_option("--seed", cfg.seed, "bank seed override")
      ->each([&cfg](const std::string&) { cfg.seed_set = true; });

  CLI::App* curvature = app.add_subcommand("curvature", "curvature estimate per grid time");
  add_common(curvature);

  CLI::App* transport = app.add_subcommand("transport", "Wasserstein table for two measures");
  add_common(transport);
  transport->add_option("--mu", cfg.mu_spec, "first measure: dirac:<i> | bump:<x>,<k> | uniform");
  transport->add_option("--nu", cfg.nu_spec, "second measure (same forms)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(cfg);
    if (check->parsed()) return cmd_check(cfg);
    if (curvature->parsed()) return cmd_curvature(cfg);
    if (transport->parsed()) return cmd_transport(cfg);
  } catch (const srf::GridError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const srf::StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const srf::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
