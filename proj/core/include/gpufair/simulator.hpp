#pragma once

#include <cstdint>

#include "gpufair/model.hpp"
#include "gpufair/placer.hpp"
#include "gpufair/policies.hpp"

namespace gpufair {

/// Knobs for the synthetic workload generator. Contention is a single
/// scalar: the ratio of demanded workers to available devices the generator
/// aims for when sizing job counts (0 keeps mean_jobs_per_tenant as given).
struct ContentionProfile {
  int tenants = 0;
  double mean_jobs_per_tenant = 20.0;
  double mean_iterations = 36'000.0;  // abstract work units
  double iterations_sigma = 1.0;      // lognormal shape
  int max_demand = 4;
  double multi_type_prob = 0.0;
  int arrival_spread_rounds = 0;
  double target_contention = 0.0;
  Mat speedup_rows_override;  // replaces the built-in model-family table
};

struct SimulationConfig {
  ClusterSpec cluster;
  std::vector<TenantProfile> tenants;
  PolicyKind policy = PolicyKind::OefNonCooperative;
  double round_length_seconds = 300.0;
  int horizon = 1;
  std::uint64_t seed = 0;
  double context_switch_seconds = 0.0;
  ContentionProfile generator;  // used when tenants is empty

  void validate() const;
};

struct RoundTenantStat {
  int round = 0;
  std::string tenant;
  double estimated = 0;   // fair-share evaluator throughput, slow-GPU units
  double attained = 0;    // placed throughput, slow-GPU units
  int devices = 0;        // workers actually running
};

struct JobRecord {
  std::string job_id;
  std::string tenant;
  int submit_round = 0;
  int finish_round = -1;
  double jct_seconds = 0;
  bool finished = false;
};

struct StragglerEvent {
  int round = 0;
  std::string job_id;
  int workers = 0;
  int type_span = 0;
};

struct SimulationReport {
  std::vector<RoundTenantStat> timeline;
  std::vector<JobRecord> jobs;
  std::vector<StragglerEvent> stragglers;
  std::vector<std::vector<std::string>> round_tenants;
  std::vector<Mat> round_ideal;  // per-round per-active-tenant fractional shares
  std::vector<Mat> round_real;   // integral grants
  std::vector<Mat> round_type_estimated;  // [round][tenant][job type] evaluator share
  double total_estimated = 0;
  double total_actual = 0;
  int rounds_executed = 0;
  int straggler_events = 0;
  int straggler_workers = 0;
  int jobs_finished = 0;
};

/// Round-based simulation: fair-share evaluation, rounding, placement, and
/// progress accounting per round; within a tenant, grants rotate to the
/// longest-starved jobs. Deterministic given (config, seed).
SimulationReport run(const SimulationConfig& config);

/// Attained throughput divided by the throughput of the same device count on
/// the slowest type. A zero-device allocation returns 1 by convention.
double normalized_throughput_metric(const Vec& allocation, const Vec& speedup);

/// Reproducible tenant/job population for a cluster. Job types draw from a
/// built-in table of six model families (VGG, ResNet, DenseNet, LSTM, RNN,
/// Transformer) stretched over the cluster's type count, unless the profile
/// overrides the rows.
std::vector<TenantProfile> generate_workload(const ContentionProfile& profile,
                                             const ClusterSpec& cluster,
                                             std::uint64_t seed);

/// The built-in per-family speedup row for a cluster with k types.
Vec model_family_speedup(std::size_t family, std::size_t num_types);
extern const char* const kModelFamilyNames[6];

}  // namespace gpufair
