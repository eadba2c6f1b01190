#pragma once

#include <map>

#include "gpufair/model.hpp"

namespace gpufair {

/// Accumulated (ideal - real) share per (tenant, GPU type). Signed: negative
/// means the tenant has been over-granted. Single-writer per simulation.
struct DeviationLedger {
  std::map<std::string, Vec> dev;
  long round = 0;

  Vec& row_for(const std::string& tenant_id, std::size_t num_types);
  double at(const std::string& tenant_id, std::size_t type) const;
};

/// Converts fractional shares into integral grants with the deviation
/// recurrence real = round(ideal + dev), dev' = dev + (ideal - real), using
/// half-up rounding. A candidate (ideal + dev) below the tenant's minimum
/// queued demand is forced to 0 so the accumulating deviation eventually
/// grants a usable share; min_demand 0 disables the threshold. When rounded
/// column sums exceed capacity, grants are revoked from tenants with the
/// most negative prospective deviation first (ties by tenant order).
///
/// ideal is row-per-tenant with column sums <= capacity; returns the
/// integral grant matrix and updates the ledger with the final grants.
Mat round_shares(const Mat& ideal, const std::vector<std::string>& tenant_ids,
                 const Vec& min_demands, const Vec& capacities,
                 DeviationLedger& ledger);

struct PlacementPiece {
  std::string host_id;
  std::size_t type = 0;
  int count = 0;

  bool operator==(const PlacementPiece&) const = default;
};

struct JobPlacement {
  std::string job_id;
  std::string tenant_id;
  int workers = 0;
  std::vector<PlacementPiece> pieces;

  int type_span() const;
};

struct PlacementMap {
  std::vector<JobPlacement> placed;
  std::vector<std::string> unplaced;  // job ids left queued this round
};

struct PlacementRequest {
  std::string job_id;
  std::size_t tenant_index = 0;
  std::string tenant_id;
  int demand = 1;
};

/// Packs jobs onto hosts against integral per-(tenant, type) grants. Jobs
/// with more workers place first. Each job goes onto a single host of one
/// granted type when possible, then a single type split across hosts, then
/// an adjacent-type window (smallest span, fastest window first).
PlacementMap place(const Mat& real_shares,
                   const std::vector<PlacementRequest>& jobs,
                   const ClusterSpec& cluster);

/// Synchronous data-parallel model: every worker runs at the speed of the
/// slowest granted type, so job throughput is workers x that speedup.
double effective_throughput(const JobPlacement& placement, const Vec& speedup);

}  // namespace gpufair
