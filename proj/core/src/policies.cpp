#include "gpufair/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gpufair/lp.hpp"

namespace gpufair {

namespace {

// Columns with zero capacity are dropped before solving and re-inserted as
// zero columns afterward.
struct ColumnFilter {
  std::vector<std::size_t> kept;  // original indices of positive columns
  std::size_t original_k = 0;

  static ColumnFilter build(const std::vector<double>& capacities) {
    ColumnFilter f;
    f.original_k = capacities.size();
    for (std::size_t j = 0; j < capacities.size(); ++j) {
      if (capacities[j] > 0) f.kept.push_back(j);
    }
    return f;
  }

  Mat reduce_rows(const Mat& rows) const {
    Mat out(rows.size(), Vec(kept.size()));
    for (std::size_t l = 0; l < rows.size(); ++l) {
      for (std::size_t j = 0; j < kept.size(); ++j) out[l][j] = rows[l][kept[j]];
    }
    return out;
  }

  Vec reduce_caps(const std::vector<double>& capacities) const {
    Vec out(kept.size());
    for (std::size_t j = 0; j < kept.size(); ++j) out[j] = capacities[kept[j]];
    return out;
  }

  AllocationMatrix expand(const Mat& reduced) const {
    AllocationMatrix x;
    x.x.assign(reduced.size(), Vec(original_k, 0.0));
    for (std::size_t l = 0; l < reduced.size(); ++l) {
      for (std::size_t j = 0; j < kept.size(); ++j) {
        x.x[l][kept[j]] = reduced[l][j];
      }
    }
    return x;
  }
};

Mat unflatten(const Vec& values, std::size_t n, std::size_t k) {
  Mat out(n, Vec(k));
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < k; ++j) out[l][j] = values[l * k + j];
  }
  return out;
}

void check_positive_capacity(const std::vector<double>& capacities) {
  bool any = false;
  for (double c : capacities) {
    if (c < 0) throw ConfigInvalid("negative capacity");
    if (c > 0) any = true;
  }
  if (!any) throw ConfigInvalid("all GPU capacities are zero");
}

std::int64_t lcm_checked(std::int64_t a, std::int64_t b) {
  const std::int64_t g = std::gcd(a, b);
  const std::int64_t r = a / g;
  if (b != 0 && r > 1'000'000'000'000LL / b) {
    throw WeightOverflow("weight common denominator overflow");
  }
  return r * b;
}

}  // namespace

PolicyKind policy_from_name(const std::string& name) {
  if (name == "oef-noncooperative") return PolicyKind::OefNonCooperative;
  if (name == "oef-cooperative") return PolicyKind::OefCooperative;
  if (name == "max-min") return PolicyKind::MaxMin;
  if (name == "gandiva-fair") return PolicyKind::GandivaFair;
  if (name == "gavel") return PolicyKind::Gavel;
  throw ConfigInvalid("unknown policy: " + name);
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::OefNonCooperative: return "oef-noncooperative";
    case PolicyKind::OefCooperative: return "oef-cooperative";
    case PolicyKind::MaxMin: return "max-min";
    case PolicyKind::GandivaFair: return "gandiva-fair";
    case PolicyKind::Gavel: return "gavel";
  }
  throw ConfigInvalid("unknown policy kind");
}

VirtualExpansion expand_weighted(const std::vector<TenantProfile>& profiles,
                                 std::size_t row_budget) {
  if (profiles.empty()) throw ConfigInvalid("no tenants to expand");

  // Per-row weight share for tenant l is num/(den * t); scale all shares by
  // the least common denominator so replication counts are integral.
  std::int64_t d = 1;
  for (const auto& p : profiles) {
    if (p.job_types.empty()) {
      throw ConfigInvalid("tenant " + p.id + " has no job types");
    }
    d = lcm_checked(d, p.weight.den * static_cast<std::int64_t>(p.job_types.size()));
  }

  VirtualExpansion exp;
  exp.common_denominator = d;
  exp.num_tenants = profiles.size();
  for (std::size_t l = 0; l < profiles.size(); ++l) {
    const auto& p = profiles[l];
    const auto t = static_cast<std::int64_t>(p.job_types.size());
    const std::int64_t reps = p.weight.num * (d / (p.weight.den * t));
    exp.job_types_per_tenant.push_back(p.job_types.size());
    for (std::size_t jt = 0; jt < p.job_types.size(); ++jt) {
      SpeedupMatrix::validate_row(p.job_types[jt].speedup);
      for (std::int64_t r = 0; r < reps; ++r) {
        if (exp.rows.size() >= row_budget) {
          std::ostringstream os;
          os << "virtual expansion exceeds row budget of " << row_budget;
          throw WeightOverflow(os.str());
        }
        exp.rows.push_back(p.job_types[jt].speedup);
        exp.origin.push_back({l, jt});
      }
    }
  }
  return exp;
}

CollapsedAllocation collapse_virtual(const AllocationMatrix& x_virtual,
                                     const VirtualExpansion& exp) {
  if (x_virtual.tenants() != exp.rows.size()) {
    throw ShapeMismatch("virtual allocation row count does not match expansion");
  }
  const std::size_t k = x_virtual.gpu_types();
  CollapsedAllocation out;
  out.per_tenant.x.assign(exp.num_tenants, Vec(k, 0.0));
  out.per_job_type.resize(exp.num_tenants);
  for (std::size_t l = 0; l < exp.num_tenants; ++l) {
    out.per_job_type[l].assign(exp.job_types_per_tenant[l], Vec(k, 0.0));
  }
  for (std::size_t r = 0; r < exp.rows.size(); ++r) {
    const auto& o = exp.origin[r];
    for (std::size_t j = 0; j < k; ++j) {
      out.per_tenant.x[o.tenant][j] += x_virtual.x[r][j];
      out.per_job_type[o.tenant][o.job_type][j] += x_virtual.x[r][j];
    }
  }
  return out;
}

AllocationMatrix allocate_noncooperative(const SpeedupMatrix& w,
                                         const std::vector<double>& capacities) {
  if (w.tenants() == 0) throw ConfigInvalid("no tenants");
  if (w.gpu_types() != capacities.size()) {
    throw ShapeMismatch("capacity vector width mismatch");
  }
  check_positive_capacity(capacities);

  const auto filter = ColumnFilter::build(capacities);
  const Mat wr = filter.reduce_rows(w.rows());
  const Vec mr = filter.reduce_caps(capacities);
  const std::size_t n = wr.size();
  const std::size_t k = mr.size();

  LinearProgram lp;
  lp.num_vars = n * k;
  lp.objective.assign(n * k, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < k; ++j) lp.objective[l * k + j] = wr[l][j];
  }
  for (std::size_t j = 0; j < k; ++j) {
    Vec row(n * k, 0.0);
    for (std::size_t l = 0; l < n; ++l) row[l * k + j] = 1.0;
    lp.add_le(std::move(row), mr[j]);
  }
  // Equal normalized throughput, as a chain of pairwise equalities.
  for (std::size_t l = 0; l + 1 < n; ++l) {
    Vec row(n * k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      row[l * k + j] = wr[l][j];
      row[(l + 1) * k + j] = -wr[l + 1][j];
    }
    lp.add_eq(std::move(row), 0.0);
  }

  const LpSolution sol = solve(lp);
  if (sol.status != LpStatus::Optimal) {
    // The scaled-down equal split is always feasible, so this cannot happen
    // for valid inputs.
    throw NumericalBreakdown("non-cooperative allocation LP did not solve");
  }
  return filter.expand(unflatten(sol.values, n, k));
}

AllocationMatrix allocate_cooperative(const SpeedupMatrix& w,
                                      const std::vector<double>& capacities) {
  if (w.tenants() == 0) throw ConfigInvalid("no tenants");
  if (w.gpu_types() != capacities.size()) {
    throw ShapeMismatch("capacity vector width mismatch");
  }
  check_positive_capacity(capacities);

  const auto filter = ColumnFilter::build(capacities);
  const Mat wr = filter.reduce_rows(w.rows());
  const Vec mr = filter.reduce_caps(capacities);
  const std::size_t n = wr.size();
  const std::size_t k = mr.size();

  LinearProgram lp;
  lp.num_vars = n * k;
  lp.objective.assign(n * k, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < k; ++j) lp.objective[l * k + j] = wr[l][j];
  }
  for (std::size_t j = 0; j < k; ++j) {
    Vec row(n * k, 0.0);
    for (std::size_t l = 0; l < n; ++l) row[l * k + j] = 1.0;
    lp.add_le(std::move(row), mr[j]);
  }

  // Row generation over the n(n-1) envy constraints: solve with the active
  // set, add the worst violated constraint per envious tenant, repeat. The
  // equal split satisfies every envy constraint, so the LP stays feasible,
  // and a vertex of the relaxation that satisfies all constraints is a
  // vertex of the full polytope.
  std::vector<std::vector<bool>> active(n, std::vector<bool>(n, false));
  Mat x;
  const std::size_t max_rounds = n * n + 2;
  for (std::size_t round = 0;; ++round) {
    if (round >= max_rounds) {
      throw NumericalBreakdown("envy-freeness row generation did not converge");
    }
    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::Optimal) {
      throw NumericalBreakdown("cooperative allocation LP did not solve");
    }
    x = unflatten(sol.values, n, k);

    Vec own(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) own[l] = dot(wr[l], x[l]);
    bool added = false;
    for (std::size_t l = 0; l < n; ++l) {
      double worst = 1e-9;
      std::size_t worst_i = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == l || active[l][i]) continue;
        const double v = dot(wr[l], x[i]) - own[l];
        if (v > worst) {
          worst = v;
          worst_i = i;
        }
      }
      if (worst_i < n) {
        Vec row(n * k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
          row[worst_i * k + j] = wr[l][j];
          row[l * k + j] -= wr[l][j];
        }
        lp.add_le(std::move(row), 0.0);
        active[l][worst_i] = true;
        added = true;
      }
    }
    if (!added) break;
  }
  return filter.expand(x);
}

AllocationMatrix allocate_maxmin(const SpeedupMatrix& w,
                                 const std::vector<double>& capacities) {
  if (w.tenants() == 0) throw ConfigInvalid("no tenants");
  if (w.gpu_types() != capacities.size()) {
    throw ShapeMismatch("capacity vector width mismatch");
  }
  AllocationMatrix x;
  const double n = static_cast<double>(w.tenants());
  x.x.assign(w.tenants(), Vec(capacities.size(), 0.0));
  for (auto& row : x.x) {
    for (std::size_t j = 0; j < capacities.size(); ++j) row[j] = capacities[j] / n;
  }
  return x;
}

GandivaAllocation allocate_gandiva_fair(const SpeedupMatrix& w,
                                        const std::vector<double>& capacities) {
  if (w.tenants() == 0) throw ConfigInvalid("no tenants");
  if (w.gpu_types() != capacities.size()) {
    throw ShapeMismatch("capacity vector width mismatch");
  }
  const std::size_t n = w.tenants();
  const std::size_t k = w.gpu_types();

  GandivaAllocation out;
  out.x = allocate_maxmin(w, capacities);
  if (n < 2 || k < 2) return out;

  Mat& x = out.x.x;
  // Pairwise passes: buyers trade their slow-type (column 0) shares against
  // each faster column, fastest first. With k = 2 this is exactly one pass.
  for (std::size_t f = k - 1; f >= 1; --f) {
    // Speedup of column f relative to the slow column (w^0 = 1).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return w.at(a, f) > w.at(b, f);
    });
    if (w.at(order[0], f) == w.at(order[1], f)) out.degenerate_tie = true;

    const std::size_t seller = order.back();
    const bool record_prices = (f == k - 1);
    for (std::size_t bi = 0; bi + 1 < n; ++bi) {
      const std::size_t buyer = order[bi];
      double price;
      if (bi == 0) {
        price = w.at(order[1], f);  // second-highest fast-type speedup
      } else {
        price = 0.5 * (w.at(buyer, f) + w.at(order[bi + 1], f));
      }
      if (record_prices) out.prices.push_back(price);
      if (price <= 0) continue;
      const double slow_held = x[buyer][0];
      if (slow_held <= 0) continue;
      const double want = slow_held / price;
      const double recv = std::min(want, x[seller][f]);
      if (recv <= 0) continue;
      const double give = recv * price;
      x[buyer][0] -= give;
      x[seller][0] += give;
      x[buyer][f] += recv;
      x[seller][f] -= recv;
    }
  }
  return out;
}

AllocationMatrix allocate_gavel(const SpeedupMatrix& w,
                                const std::vector<double>& capacities) {
  if (w.tenants() == 0) throw ConfigInvalid("no tenants");
  if (w.gpu_types() != capacities.size()) {
    throw ShapeMismatch("capacity vector width mismatch");
  }
  check_positive_capacity(capacities);

  const std::size_t n_all = w.tenants();
  Vec fair(n_all, 0.0);
  for (std::size_t l = 0; l < n_all; ++l) {
    for (std::size_t j = 0; j < capacities.size(); ++j) {
      fair[l] += capacities[j] / static_cast<double>(n_all) * w.at(l, j);
    }
  }
  double total_devices = 0;
  for (double c : capacities) total_devices += c;
  const double row_cap = std::ceil(total_devices / static_cast<double>(n_all));

  const auto filter = ColumnFilter::build(capacities);
  const Mat wr = filter.reduce_rows(w.rows());
  const Vec mr = filter.reduce_caps(capacities);
  const std::size_t n = wr.size();
  const std::size_t k = mr.size();

  auto add_common_rows = [&](LinearProgram& lp, std::size_t width) {
    for (std::size_t j = 0; j < k; ++j) {
      Vec row(width, 0.0);
      for (std::size_t l = 0; l < n; ++l) row[l * k + j] = 1.0;
      lp.add_le(std::move(row), mr[j]);
    }
    for (std::size_t l = 0; l < n; ++l) {
      Vec row(width, 0.0);
      for (std::size_t j = 0; j < k; ++j) row[l * k + j] = 1.0;
      lp.add_le(std::move(row), row_cap);
    }
  };

  // Stage 1: maximize the common ratio c of attained to 1/n-share throughput.
  LinearProgram stage1;
  stage1.num_vars = n * k + 1;
  const std::size_t c_var = n * k;
  stage1.objective.assign(stage1.num_vars, 0.0);
  stage1.objective[c_var] = 1.0;
  add_common_rows(stage1, stage1.num_vars);
  for (std::size_t l = 0; l < n; ++l) {
    Vec row(stage1.num_vars, 0.0);
    for (std::size_t j = 0; j < k; ++j) row[l * k + j] = -wr[l][j];
    row[c_var] = fair[l];
    stage1.add_le(std::move(row), 0.0);
  }
  const LpSolution s1 = solve(stage1);
  if (s1.status != LpStatus::Optimal) {
    throw NumericalBreakdown("gavel ratio LP did not solve");
  }
  const double c_star = s1.objective_value;

  // Stage 2: at the optimal ratio, maximize total efficiency. The small
  // slack keeps stage 1's optimum feasible under roundoff.
  LinearProgram stage2;
  stage2.num_vars = n * k;
  stage2.objective.assign(n * k, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < k; ++j) stage2.objective[l * k + j] = wr[l][j];
  }
  add_common_rows(stage2, stage2.num_vars);
  for (std::size_t l = 0; l < n; ++l) {
    Vec row(n * k, 0.0);
    for (std::size_t j = 0; j < k; ++j) row[l * k + j] = -wr[l][j];
    stage2.add_le(std::move(row), -fair[l] * (c_star - 1e-9));
  }
  const LpSolution s2 = solve(stage2);
  if (s2.status != LpStatus::Optimal) {
    throw NumericalBreakdown("gavel refinement LP did not solve");
  }
  return filter.expand(unflatten(s2.values, n, k));
}

AllocationMatrix allocate(PolicyKind kind, const SpeedupMatrix& w,
                          const std::vector<double>& capacities) {
  switch (kind) {
    case PolicyKind::OefNonCooperative: return allocate_noncooperative(w, capacities);
    case PolicyKind::OefCooperative: return allocate_cooperative(w, capacities);
    case PolicyKind::MaxMin: return allocate_maxmin(w, capacities);
    case PolicyKind::GandivaFair: return allocate_gandiva_fair(w, capacities).x;
    case PolicyKind::Gavel: return allocate_gavel(w, capacities);
  }
  throw ConfigInvalid("unknown policy kind");
}

double total_efficiency(const SpeedupMatrix& w, const AllocationMatrix& x) {
  return sum(efficiency(w, x));
}

}  // namespace gpufair
