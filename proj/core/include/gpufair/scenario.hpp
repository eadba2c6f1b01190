#pragma once

#include <cstdint>

#include "gpufair/auditor.hpp"
#include "gpufair/simulator.hpp"

namespace gpufair {

struct AuditOptions {
  double tolerance = 1e-6;
  bool probe_sp = false;
  int sp_samples = 200;
  std::uint64_t sp_seed = 0;
};

/// A parsed scenario document: cluster, tenants (inline or generated),
/// policy, simulation parameters, audit toggles. Schema-validated on load;
/// unknown keys are rejected with a field path.
struct ScenarioDocument {
  SimulationConfig config;
  AuditOptions audit;
};

ScenarioDocument parse_scenario(const std::string& text, const std::string& origin);
ScenarioDocument load_scenario(const std::string& path);

/// FNV-1a over the canonical serialization of the parsed document: equal for
/// cosmetic rewrites (key order, whitespace), different whenever a semantic
/// field changes.
std::uint64_t config_hash(const ScenarioDocument& doc);

/// Self-contained allocation report: everything cmd-audit needs to re-check
/// a solve result.
struct AllocationReportDoc {
  std::string policy;
  std::vector<std::string> gpu_types;
  std::vector<int> capacities;
  std::vector<std::string> tenant_ids;
  Mat speedup;
  Mat allocation;
  Vec efficiency_vector;
  double total_efficiency = 0;
};

std::string allocation_report_to_json(const AllocationReportDoc& doc,
                                      const AuditReport* audit);
AllocationReportDoc allocation_report_from_json(const std::string& text,
                                                const std::string& origin);

std::string audit_report_to_json(const AuditReport& report);

// Tabular emitters. Fixed headers and column order; consumers plot these
// directly.
std::string timeline_csv(const SimulationReport& report, const std::string& policy);
std::string jct_csv(const SimulationReport& report);
std::string straggler_csv(const SimulationReport& report);
std::string manifest_json(const ScenarioDocument& doc, const SimulationReport& report,
                          const std::string& scenario_path);

/// Writes via a temp file in the same directory plus rename.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace gpufair
