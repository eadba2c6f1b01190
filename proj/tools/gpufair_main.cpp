// Command-line front end: scenario ingestion, experiment orchestration, and
// report emission. Exit codes: 0 success, 2 input/schema error, 3
// computational error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gpufair/auditor.hpp"
#include "gpufair/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitCompute = 3;

using namespace gpufair;

struct CommonOpts {
  std::string scenario_path;
  std::string output_dir = ".";
  std::optional<std::string> policy_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> tolerance_override;
};

ScenarioDocument load_with_overrides(const CommonOpts& opts) {
  ScenarioDocument doc = load_scenario(opts.scenario_path);
  if (opts.policy_override) doc.config.policy = policy_from_name(*opts.policy_override);
  if (opts.seed_override) doc.config.seed = *opts.seed_override;
  if (opts.tolerance_override) doc.audit.tolerance = *opts.tolerance_override;
  return doc;
}

std::string fmtd(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Builds the instantaneous allocation for the scenario's tenants: weighted
// virtual expansion, policy solve, collapse. Returns the virtual-level pieces
// so audits can run against the mechanism's own matrix.
struct SolveOutput {
  VirtualExpansion expansion;
  SpeedupMatrix w;
  AllocationMatrix x_virtual;
  CollapsedAllocation collapsed;
};

SolveOutput run_solve(const ScenarioDocument& doc) {
  if (doc.config.tenants.empty()) {
    throw ConfigInvalid("no tenants: cmd solve requires inline tenant profiles");
  }
  SolveOutput out{expand_weighted(doc.config.tenants),
                  SpeedupMatrix::from_rows({{1.0}}),
                  {},
                  {}};
  out.w = out.expansion.matrix();
  out.x_virtual = allocate(doc.config.policy, out.w,
                           doc.config.cluster.capacities_as_double());
  out.collapsed = collapse_virtual(out.x_virtual, out.expansion);
  return out;
}

int cmd_solve(const CommonOpts& opts) {
  ScenarioDocument doc;
  try {
    doc = load_with_overrides(opts);
    doc.config.cluster.validate();
    for (const auto& t : doc.config.tenants) t.validate(doc.config.cluster.num_types());
    if (doc.config.tenants.empty()) {
      std::cerr << "error: no tenants\n";
      return kExitInput;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    const SolveOutput sol = run_solve(doc);

    AllocationReportDoc report;
    report.policy = policy_name(doc.config.policy);
    report.gpu_types = doc.config.cluster.gpu_types;
    report.capacities = doc.config.cluster.capacities;
    // One row per virtual user keeps the report auditable against the
    // mechanism's own matrix; single-type weight-1 tenants come through 1:1.
    for (std::size_t r = 0; r < sol.expansion.rows.size(); ++r) {
      const auto& o = sol.expansion.origin[r];
      report.tenant_ids.push_back(doc.config.tenants[o.tenant].id + "/" +
                                  std::to_string(o.job_type) + "/" + std::to_string(r));
    }
    report.speedup = sol.expansion.rows;
    report.allocation = sol.x_virtual.x;
    report.efficiency_vector = efficiency(sol.w, sol.x_virtual);
    report.total_efficiency = total_efficiency(sol.w, sol.x_virtual);

    const AuditReport audit = audit_static(
        sol.w, sol.x_virtual, doc.config.cluster.capacities_as_double(),
        doc.audit.tolerance);

    const std::string path =
        (std::filesystem::path(opts.output_dir) / "allocation_report.json").string();
    atomic_write_file(path, allocation_report_to_json(report, &audit));

    std::cout << "policy " << report.policy << ": total efficiency "
              << fmtd(report.total_efficiency) << ", report written to " << path << "\n";
    for (std::size_t l = 0; l < doc.config.tenants.size(); ++l) {
      std::cout << "  " << doc.config.tenants[l].id << ":";
      for (double v : sol.collapsed.per_tenant.x[l]) std::cout << " " << fmtd(v);
      std::cout << "\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}

int cmd_simulate(const CommonOpts& opts) {
  ScenarioDocument doc;
  try {
    doc = load_with_overrides(opts);
    doc.config.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  try {
    const SimulationReport report = run(doc.config);
    const std::filesystem::path dir(opts.output_dir);
    atomic_write_file((dir / "timeline.csv").string(),
                      timeline_csv(report, policy_name(doc.config.policy)));
    atomic_write_file((dir / "jct.csv").string(), jct_csv(report));
    atomic_write_file((dir / "straggler.csv").string(), straggler_csv(report));
    atomic_write_file((dir / "manifest.json").string(),
                      manifest_json(doc, report, opts.scenario_path));
    std::cout << "simulated " << report.rounds_executed << " rounds, "
              << report.jobs_finished << "/" << report.jobs.size()
              << " jobs finished, outputs in " << dir.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}

int cmd_compare(const CommonOpts& opts, const std::vector<std::string>& policies) {
  ScenarioDocument doc;
  std::vector<PolicyKind> kinds;
  try {
    if (policies.size() < 2) {
      std::cerr << "error: compare needs at least two policies\n";
      return kExitInput;
    }
    doc = load_with_overrides(opts);
    for (const auto& p : policies) kinds.push_back(policy_from_name(p));
    doc.config.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    std::string csv =
        "policy,total_estimated_throughput,total_actual_throughput,mean_jct_seconds,"
        "straggler_events,ef,si,pe,adjacency\n";
    for (PolicyKind kind : kinds) {
      SimulationConfig config = doc.config;
      config.policy = kind;
      const SimulationReport report = run(config);

      double jct_sum = 0;
      int jct_count = 0;
      for (const auto& j : report.jobs) {
        if (j.finished) {
          jct_sum += j.jct_seconds;
          ++jct_count;
        }
      }
      const double mean_jct = jct_count ? jct_sum / jct_count : 0.0;

      // Audit the first scheduling round's mechanism output.
      std::vector<TenantProfile> tenants = config.tenants;
      if (tenants.empty()) {
        tenants = generate_workload(config.generator, config.cluster, config.seed);
      }
      std::vector<TenantProfile> profiles;
      for (const auto& t : tenants) {
        TenantProfile p = t;
        for (auto& jt : p.job_types) jt.jobs.clear();
        profiles.push_back(std::move(p));
      }
      const VirtualExpansion exp = expand_weighted(profiles);
      const SpeedupMatrix w = exp.matrix();
      const AllocationMatrix x =
          allocate(kind, w, config.cluster.capacities_as_double());
      const AuditReport audit =
          audit_static(w, x, config.cluster.capacities_as_double(), doc.audit.tolerance);
      auto flag = [&](const char* prop) {
        const AuditEntry* e = audit.find(prop);
        return (e && e->holds) ? "pass" : "fail";
      };

      csv += policy_name(kind) + "," + fmtd(report.total_estimated) + "," +
             fmtd(report.total_actual) + "," + fmtd(mean_jct) + "," +
             std::to_string(report.straggler_events) + "," + flag("envy-freeness") +
             "," + flag("sharing-incentive") + "," + flag("pareto-efficiency") + "," +
             flag("adjacency") + "\n";
    }
    const std::string path =
        (std::filesystem::path(opts.output_dir) / "comparison.csv").string();
    atomic_write_file(path, csv);
    std::cout << csv;
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}

int cmd_audit(const std::string& report_path, double tolerance, bool probe_sp,
              int samples, std::uint64_t seed, const std::string& output_dir) {
  AllocationReportDoc doc;
  SpeedupMatrix w = SpeedupMatrix::from_rows({{1.0}});
  AllocationMatrix x;
  std::vector<double> capacities;
  try {
    std::ifstream in(report_path);
    if (!in) throw ConfigInvalid(report_path + ": cannot open report");
    std::stringstream buffer;
    buffer << in.rdbuf();
    doc = allocation_report_from_json(buffer.str(), report_path);
    w = SpeedupMatrix::from_rows(doc.speedup);
    x.x = doc.allocation;
    capacities.assign(doc.capacities.begin(), doc.capacities.end());
    x.validate(capacities);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    AuditReport report = audit_static(w, x, capacities, tolerance);
    if (probe_sp) {
      const PolicyKind kind = policy_from_name(doc.policy);
      AuditEntry worst;
      worst.property = "strategy-proofness";
      for (std::size_t l = 0; l < w.tenants(); ++l) {
        AuditEntry e = probe_strategy_proofness(kind, w, capacities, l, samples,
                                                seed + l, tolerance);
        if (e.worst_violation > worst.worst_violation || l == 0) {
          worst = e;
        }
      }
      report.entries.push_back(worst);
    }

    // Recomputed efficiencies go into the emitted report so a solve/audit
    // round trip is directly comparable. audit_report_to_json ends with
    // "}\n"; splice the array in before the closing brace.
    const EfficiencyVector eff = efficiency(w, x);
    std::string out = audit_report_to_json(report);
    out.erase(out.find_last_of('}'));
    out += ",\n  \"efficiency\": [";
    for (std::size_t i = 0; i < eff.size(); ++i) {
      if (i) out += ",";
      out += fmtd(eff[i]);
    }
    out += "]\n}\n";

    if (!output_dir.empty()) {
      atomic_write_file(
          (std::filesystem::path(output_dir) / "audit_report.json").string(), out);
    }
    std::cout << out;
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair allocation engine and round-based cluster simulator for "
               "heterogeneous GPU scheduling"};
  app.require_subcommand(1);

  CommonOpts solve_opts, sim_opts, cmp_opts;
  std::vector<std::string> cmp_policies;

  auto add_common = [](CLI::App* cmd, CommonOpts& opts, bool need_scenario = true) {
    auto* s = cmd->add_option("--scenario", opts.scenario_path, "Scenario JSON path");
    if (need_scenario) s->required();
    cmd->add_option("--output-dir", opts.output_dir, "Directory for emitted files");
    cmd->add_option("--policy", opts.policy_override, "Override the scenario policy");
    cmd->add_option("--seed", opts.seed_override, "Override the scenario seed");
    cmd->add_option("--tolerance", opts.tolerance_override, "Audit tolerance");
  };

  auto* solve = app.add_subcommand("solve", "Compute one allocation and audit it");
  add_common(solve, solve_opts);

  auto* simulate = app.add_subcommand("simulate", "Run the round-based simulation");
  add_common(simulate, sim_opts);

  auto* compare = app.add_subcommand("compare", "Run one scenario under several policies");
  add_common(compare, cmp_opts);
  compare->add_option("--policies", cmp_policies,
                      "Two or more policies to compare")
      ->delimiter(',');

  std::string audit_report_path, audit_output_dir;
  double audit_tolerance = 1e-6;
  bool audit_probe_sp = false;
  int audit_samples = 200;
  std::uint64_t audit_seed = 0;
  auto* audit = app.add_subcommand("audit", "Re-check a written allocation report");
  audit->add_option("--report", audit_report_path, "allocation_report.json path")
      ->required();
  audit->add_option("--tolerance", audit_tolerance, "Audit tolerance");
  audit->add_flag("--probe-sp", audit_probe_sp, "Run the strategy-proofness probe");
  audit->add_option("--samples", audit_samples, "SP probe sample count");
  audit->add_option("--seed", audit_seed, "SP probe seed");
  audit->add_option("--output-dir", audit_output_dir, "Also write audit_report.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (solve->parsed()) return cmd_solve(solve_opts);
  if (simulate->parsed()) return cmd_simulate(sim_opts);
  if (compare->parsed()) return cmd_compare(cmp_opts, cmp_policies);
  if (audit->parsed()) {
    return cmd_audit(audit_report_path, audit_tolerance, audit_probe_sp, audit_samples,
                     audit_seed, audit_output_dir);
  }
  return kExitInput;
}
