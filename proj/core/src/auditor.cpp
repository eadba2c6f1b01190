#include "gpufair/auditor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gpufair/lp.hpp"

namespace gpufair {

const AuditEntry* AuditReport::find(const std::string& property) const {
  for (const auto& e : entries) {
    if (e.property == property) return &e;
  }
  return nullptr;
}

bool AuditReport::all_hold() const {
  for (const auto& e : entries) {
    if (!e.holds) return false;
  }
  return true;
}

AuditEntry check_envy_free(const SpeedupMatrix& w, const AllocationMatrix& x,
                           double tol) {
  if (w.tenants() != x.tenants()) throw ShapeMismatch("EF check shape mismatch");
  AuditEntry e;
  e.property = "envy-freeness";
  const std::size_t n = w.tenants();
  Vec own(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) own[l] = dot(w.row(l), x.x[l]);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == l) continue;
      const double v = dot(w.row(l), x.x[i]) - own[l];
      if (v > e.worst_violation) {
        e.worst_violation = v;
        e.witness_a = static_cast<int>(l);
        e.witness_b = static_cast<int>(i);
      }
    }
  }
  e.holds = e.worst_violation <= tol;
  if (!e.holds) {
    std::ostringstream os;
    os << "tenant " << e.witness_a << " envies tenant " << e.witness_b << " by "
       << e.worst_violation;
    e.witness = os.str();
  }
  return e;
}

AuditEntry check_sharing_incentive(const SpeedupMatrix& w, const AllocationMatrix& x,
                                   const std::vector<double>& capacities,
                                   double tol) {
  if (w.tenants() != x.tenants()) throw ShapeMismatch("SI check shape mismatch");
  AuditEntry e;
  e.property = "sharing-incentive";
  const std::size_t n = w.tenants();
  for (std::size_t l = 0; l < n; ++l) {
    double fair = 0;
    for (std::size_t j = 0; j < capacities.size(); ++j) {
      fair += capacities[j] / static_cast<double>(n) * w.at(l, j);
    }
    const double v = fair - dot(w.row(l), x.x[l]);
    if (v > e.worst_violation) {
      e.worst_violation = v;
      e.witness_a = static_cast<int>(l);
    }
  }
  e.holds = e.worst_violation <= tol;
  if (!e.holds) {
    std::ostringstream os;
    os << "tenant " << e.witness_a << " falls short of its 1/n share by "
       << e.worst_violation;
    e.witness = os.str();
  }
  return e;
}

AuditEntry check_pareto_efficiency(const SpeedupMatrix& w, const AllocationMatrix& x,
                                   const std::vector<double>& capacities,
                                   double tol) {
  if (w.tenants() != x.tenants()) throw ShapeMismatch("PE check shape mismatch");
  AuditEntry e;
  e.property = "pareto-efficiency";
  const std::size_t n = w.tenants();
  const std::size_t k = capacities.size();
  const Vec current = efficiency(w, x);

  // max sum(delta) s.t. w_l . x'_l >= E_l + delta_l, capacity, x', delta >= 0
  LinearProgram lp;
  lp.num_vars = n * k + n;
  lp.objective.assign(lp.num_vars, 0.0);
  for (std::size_t l = 0; l < n; ++l) lp.objective[n * k + l] = 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    Vec row(lp.num_vars, 0.0);
    for (std::size_t l = 0; l < n; ++l) row[l * k + j] = 1.0;
    lp.add_le(std::move(row), capacities[j]);
  }
  for (std::size_t l = 0; l < n; ++l) {
    Vec row(lp.num_vars, 0.0);
    for (std::size_t j = 0; j < k; ++j) row[l * k + j] = -w.at(l, j);
    row[n * k + l] = 1.0;
    lp.add_le(std::move(row), -current[l]);
  }

  LpSolution sol;
  try {
    sol = solve(lp);
  } catch (const NumericalBreakdown&) {
    e.holds = false;
    e.inconclusive = true;
    e.witness = "dominance LP breakdown";
    return e;
  }
  if (sol.status != LpStatus::Optimal) {
    e.holds = false;
    e.inconclusive = true;
    e.witness = "dominance LP not optimal";
    return e;
  }
  e.worst_violation = sol.objective_value;
  e.holds = sol.objective_value <= tol;
  if (!e.holds) {
    e.witness_vector.assign(sol.values.begin(), sol.values.begin() + n * k);
    std::ostringstream os;
    os << "reallocation improves total efficiency by " << sol.objective_value;
    e.witness = os.str();
  }
  return e;
}

AuditEntry check_adjacency(const AllocationMatrix& x, double tol) {
  AuditEntry e;
  e.property = "adjacency";
  for (std::size_t l = 0; l < x.tenants(); ++l) {
    const Vec& row = x.x[l];
    int first = -1, last = -1;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] > tol) {
        if (first < 0) first = static_cast<int>(j);
        last = static_cast<int>(j);
      }
    }
    if (first < 0) continue;  // all-zero row holds vacuously
    for (int j = first; j <= last; ++j) {
      if (row[j] <= tol) {
        e.holds = false;
        e.witness_a = static_cast<int>(l);
        e.witness_b = j;
        e.worst_violation = std::max(e.worst_violation, 1.0);
        std::ostringstream os;
        os << "tenant " << l << " has a grant gap at type " << j;
        e.witness = os.str();
      }
    }
  }
  return e;
}

int support_size(const AllocationMatrix& x, double tol) {
  int count = 0;
  for (const auto& row : x.x) {
    for (double v : row) {
      if (v > tol) ++count;
    }
  }
  return count;
}

namespace {

// Clamp a candidate fake row to a valid inflation: >= truth elementwise,
// anchored at 1, non-decreasing.
Vec sanitize_fake(const Vec& truth, Vec fake) {
  fake[0] = 1.0;
  for (std::size_t j = 1; j < fake.size(); ++j) {
    fake[j] = std::max({fake[j], truth[j], fake[j - 1]});
  }
  return fake;
}

struct ProbeRng {
  std::uint64_t s;
  std::uint64_t next() {
    s ^= s >> 12;
    s ^= s << 25;
    s ^= s >> 27;
    return s * 0x2545F4914F6CDD1DULL;
  }
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }
};

}  // namespace

AuditEntry probe_strategy_proofness(PolicyKind policy, const SpeedupMatrix& w,
                                    const std::vector<double>& capacities,
                                    std::size_t cheater, int samples,
                                    std::uint64_t seed, double tol,
                                    const Mat& extra_fakes) {
  if (cheater >= w.tenants()) throw ConfigInvalid("cheater index out of range");
  if (samples < 1) throw ConfigInvalid("probe needs at least one sample");
  AuditEntry e;
  e.property = "strategy-proofness";

  const Vec truth = w.row(cheater);
  const std::size_t k = truth.size();
  const AllocationMatrix honest_x = allocate(policy, w, capacities);
  const double honest_value = dot(truth, honest_x.x[cheater]);

  Mat fakes;
  for (const auto& f : extra_fakes) fakes.push_back(sanitize_fake(truth, f));
  if (k >= 2) {
    // Last-coordinate bumps: small and doubling.
    Vec f = truth;
    f[k - 1] += std::max(0.25, 0.25 * truth[k - 1]);
    fakes.push_back(f);
    f = truth;
    f[k - 1] *= 2.0;
    fakes.push_back(f);
    // Inflation bounded below the closest dominating row, when one exists.
    Vec ub;
    for (std::size_t i = 0; i < w.tenants(); ++i) {
      if (i == cheater) continue;
      bool dominates = true;
      for (std::size_t j = 0; j < k; ++j) {
        if (w.at(i, j) < truth[j] - 1e-12) {
          dominates = false;
          break;
        }
      }
      if (!dominates) continue;
      if (ub.empty()) {
        ub = w.row(i);
      } else {
        for (std::size_t j = 0; j < k; ++j) ub[j] = std::min(ub[j], w.at(i, j));
      }
    }
    if (!ub.empty()) {
      Vec mid(k);
      for (std::size_t j = 0; j < k; ++j) mid[j] = 0.5 * (truth[j] + ub[j]);
      fakes.push_back(sanitize_fake(truth, mid));
      fakes.push_back(sanitize_fake(truth, ub));
    }
    // Proportional inflation.
    Vec prop(k, 1.0);
    for (std::size_t j = 1; j < k; ++j) prop[j] = 1.0 + (truth[j] - 1.0) * 1.25;
    fakes.push_back(sanitize_fake(truth, prop));
  }

  ProbeRng rng{seed ^ 0x5EEDF00DULL};
  for (int s = 0; s < samples; ++s) {
    Vec f(k, 1.0);
    const double scale = 0.05 + 0.45 * rng.uniform01();
    for (std::size_t j = 1; j < k; ++j) {
      f[j] = truth[j] * (1.0 + scale * rng.uniform01());
    }
    fakes.push_back(sanitize_fake(truth, f));
  }

  for (const auto& fake : fakes) {
    SpeedupMatrix::validate_row(fake);
    Mat rows = w.rows();
    rows[cheater] = fake;
    const SpeedupMatrix w_fake = SpeedupMatrix::from_rows(rows);
    const AllocationMatrix x_fake = allocate(policy, w_fake, capacities);
    const double gained = dot(truth, x_fake.x[cheater]) - honest_value;
    if (gained > e.worst_violation) {
      e.worst_violation = gained;
      e.witness_vector = fake;
      e.witness_a = static_cast<int>(cheater);
    }
  }
  e.holds = e.worst_violation <= tol;
  if (!e.holds) {
    std::ostringstream os;
    os << "tenant " << cheater << " gains " << e.worst_violation
       << " by inflating its speedup row";
    e.witness = os.str();
  }
  return e;
}

AuditReport audit_static(const SpeedupMatrix& w, const AllocationMatrix& x,
                         const std::vector<double>& capacities, double tol) {
  AuditReport report;
  report.tolerance = tol;
  report.entries.push_back(check_envy_free(w, x, tol));
  report.entries.push_back(check_sharing_incentive(w, x, capacities, tol));
  report.entries.push_back(check_pareto_efficiency(w, x, capacities, tol));
  report.entries.push_back(check_adjacency(x, tol));

  AuditEntry support;
  support.property = "support-size";
  const int count = support_size(x, tol);
  const int bound = static_cast<int>(x.tenants() + x.gpu_types()) - 1;
  support.worst_violation = std::max(0, count - bound);
  support.holds = count <= bound;
  if (!support.holds) {
    std::ostringstream os;
    os << count << " nonzero grants exceed the n+k-1 bound of " << bound;
    support.witness = os.str();
  }
  report.entries.push_back(support);
  return report;
}

}  // namespace gpufair
