#pragma once

#include "gpufair/model.hpp"

namespace gpufair {

enum class PolicyKind {
  OefNonCooperative,
  OefCooperative,
  MaxMin,
  GandivaFair,
  Gavel,
};

/// Parses the external policy names ("oef-noncooperative", "oef-cooperative",
/// "max-min", "gandiva-fair", "gavel"); throws ConfigInvalid otherwise.
PolicyKind policy_from_name(const std::string& name);
std::string policy_name(PolicyKind kind);

/// One virtual user per (tenant, job type) replica. A tenant with weight
/// p/q and t job types contributes p*D/(q*t) identical rows per job type,
/// where D is the least common denominator across all per-row shares, so
/// every virtual row carries weight share exactly 1/D.
struct VirtualExpansion {
  Mat rows;  // expanded speedup rows
  struct RowOrigin {
    std::size_t tenant = 0;
    std::size_t job_type = 0;
  };
  std::vector<RowOrigin> origin;
  std::int64_t common_denominator = 1;
  std::size_t num_tenants = 0;
  std::vector<std::size_t> job_types_per_tenant;

  SpeedupMatrix matrix() const { return SpeedupMatrix::from_rows(rows); }
};

VirtualExpansion expand_weighted(const std::vector<TenantProfile>& profiles,
                                 std::size_t row_budget = 10'000);

struct CollapsedAllocation {
  AllocationMatrix per_tenant;          // original tenant order
  std::vector<Mat> per_job_type;        // [tenant][job type] -> k-vector
};

CollapsedAllocation collapse_virtual(const AllocationMatrix& x_virtual,
                                     const VirtualExpansion& exp);

/// Non-cooperative mechanism: maximize total efficiency subject to capacity
/// and all tenants attaining identical normalized throughput. Returns a
/// vertex solution; at the optimum every positive-capacity column is fully
/// assigned.
AllocationMatrix allocate_noncooperative(const SpeedupMatrix& w,
                                         const std::vector<double>& capacities);

/// Cooperative mechanism: maximize total efficiency subject to capacity and
/// pairwise envy-freeness. Solved by row generation over the envy
/// constraints; the result is a vertex of the full envy-free polytope.
AllocationMatrix allocate_cooperative(const SpeedupMatrix& w,
                                      const std::vector<double>& capacities);

/// Equal split of every GPU type.
AllocationMatrix allocate_maxmin(const SpeedupMatrix& w,
                                 const std::vector<double>& capacities);

struct GandivaAllocation {
  AllocationMatrix x;
  bool degenerate_tie = false;  // two users shared a top speedup; resolved by
                                // tenant order
  Vec prices;                   // prices charged in the fastest-column pass,
                                // in buyer order
};

/// Trading baseline: start from the max-min equal split, then buyers (in
/// descending fast-type speedup) surrender slow-type shares to the slowest
/// user in exchange for fast-type shares. The first buyer pays the
/// second-highest fast speedup; each later buyer pays the midpoint of its own
/// and the next-slower user's fast speedup. For k > 2 the pairwise pass
/// repeats against each faster column in descending order.
GandivaAllocation allocate_gandiva_fair(const SpeedupMatrix& w,
                                        const std::vector<double>& capacities);

/// Ratio-equalizing baseline: maximize c subject to every tenant attaining
/// at least c times its 1/n-cluster throughput, with per-tenant device-count
/// caps of ceil(total/n); a second stage maximizes total efficiency at the
/// optimal c. Returns a vertex solution.
AllocationMatrix allocate_gavel(const SpeedupMatrix& w,
                                const std::vector<double>& capacities);

/// Dispatch by kind. GandivaFair drops the tie flag and price trace.
AllocationMatrix allocate(PolicyKind kind, const SpeedupMatrix& w,
                          const std::vector<double>& capacities);

double total_efficiency(const SpeedupMatrix& w, const AllocationMatrix& x);

}  // namespace gpufair
