#pragma once

#include <cstdint>
#include <optional>

#include "gpufair/model.hpp"
#include "gpufair/policies.hpp"

namespace gpufair {

struct AuditEntry {
  std::string property;
  bool holds = true;
  bool inconclusive = false;  // LP failure while checking
  double worst_violation = 0;
  std::string witness;          // human-readable
  int witness_a = -1;           // tenant indices, when the witness is a pair
  int witness_b = -1;
  Vec witness_vector;           // fake speedup row or improving x' (flattened)
};

struct AuditReport {
  double tolerance = 1e-6;
  std::vector<AuditEntry> entries;

  const AuditEntry* find(const std::string& property) const;
  bool all_hold() const;
};

/// No tenant values another tenant's bundle above its own, within tol.
/// Witness on failure: the worst (envious, envied) pair.
AuditEntry check_envy_free(const SpeedupMatrix& w, const AllocationMatrix& x,
                           double tol);

/// Every tenant does at least as well as a 1/n slice of every type.
AuditEntry check_sharing_incentive(const SpeedupMatrix& w, const AllocationMatrix& x,
                                   const std::vector<double>& capacities, double tol);

/// Dominance LP: maximize total surplus over capacity-feasible reallocations
/// that keep every tenant at or above its current efficiency. Holds iff the
/// optimum is <= tol; the witness is an improving reallocation.
AuditEntry check_pareto_efficiency(const SpeedupMatrix& w, const AllocationMatrix& x,
                                   const std::vector<double>& capacities, double tol);

/// Each row's entries above tol occupy consecutive GPU-type indices.
AuditEntry check_adjacency(const AllocationMatrix& x, double tol);

/// Number of entries above tol.
int support_size(const AllocationMatrix& x, double tol);

/// Re-runs the policy against inflated fake speedup rows for one tenant and
/// compares the cheater's true-speedup efficiency against the honest run.
/// Fakes keep the anchor at 1, inflate elementwise, and stay monotone;
/// deterministic proof-style constructions (last-coordinate bump, inflation
/// bounded by the next dominating row, proportional inflation) are always
/// probed before the seeded random samples. A pass means "no violation
/// found", not a proof.
AuditEntry probe_strategy_proofness(PolicyKind policy, const SpeedupMatrix& w,
                                    const std::vector<double>& capacities,
                                    std::size_t cheater, int samples,
                                    std::uint64_t seed, double tol,
                                    const Mat& extra_fakes = {});

/// EF, SI, PE, adjacency, and support size in one report.
AuditReport audit_static(const SpeedupMatrix& w, const AllocationMatrix& x,
                         const std::vector<double>& capacities, double tol = 1e-6);

}  // namespace gpufair
