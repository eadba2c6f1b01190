#include "gpufair/placer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gpufair {

Vec& DeviationLedger::row_for(const std::string& tenant_id, std::size_t num_types) {
  auto& row = dev[tenant_id];
  if (row.size() != num_types) row.assign(num_types, 0.0);
  return row;
}

double DeviationLedger::at(const std::string& tenant_id, std::size_t type) const {
  auto it = dev.find(tenant_id);
  if (it == dev.end() || type >= it->second.size()) return 0.0;
  return it->second[type];
}

Mat round_shares(const Mat& ideal, const std::vector<std::string>& tenant_ids,
                 const Vec& min_demands, const Vec& capacities,
                 DeviationLedger& ledger) {
  const std::size_t n = ideal.size();
  if (tenant_ids.size() != n || min_demands.size() != n) {
    throw ShapeMismatch("round_shares: tenant metadata size mismatch");
  }
  const std::size_t k = capacities.size();

  Mat real(n, Vec(k, 0.0));
  std::vector<Vec*> dev_rows(n);
  for (std::size_t l = 0; l < n; ++l) {
    if (ideal[l].size() != k) throw ShapeMismatch("round_shares: ideal width");
    dev_rows[l] = &ledger.row_for(tenant_ids[l], k);
  }

  // Per column: candidates c = ideal + dev round half-up in aggregate.
  // Independent per-tenant rounding can strand a tenant's deficit above one
  // device-round whenever two candidates cross an integer on a contended
  // type in the same round, so the column's grant total is fixed first
  // (half-up of the candidate sum, capped by capacity) and distributed by
  // floor plus largest-remainder top-ups. A candidate below the tenant's
  // minimum queued demand is unusable and stays idle this round.
  for (std::size_t j = 0; j < k; ++j) {
    Vec cand(n, 0.0);
    std::vector<bool> eligible(n, false);
    double eligible_sum = 0;
    for (std::size_t l = 0; l < n; ++l) {
      cand[l] = ideal[l][j] + (*dev_rows[l])[j];
      if (cand[l] <= 0) continue;
      if (min_demands[l] > 0 && cand[l] < min_demands[l] - 1e-12) continue;
      eligible[l] = true;
      eligible_sum += cand[l];
    }
    double house = std::min(capacities[j], std::floor(eligible_sum + 0.5));

    double granted = 0;
    for (std::size_t l = 0; l < n; ++l) {
      if (!eligible[l]) continue;
      real[l][j] = std::floor(cand[l] + 1e-12);
      granted += real[l][j];
    }

    // Over the house (possible when thresholded deficits unlock together):
    // revoke whole grants from the most over-served tenants first, ties by
    // tenant order. A grant cut below its demand is unusable and is zeroed.
    while (granted > house + 1e-9) {
      std::size_t pick = n;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < n; ++l) {
        if (real[l][j] < 1.0) continue;
        const double prospective = cand[l] - real[l][j];
        if (prospective < worst - 1e-12) {
          worst = prospective;
          pick = l;
        }
      }
      if (pick == n) throw NumericalBreakdown("column repair found no grant to revoke");
      real[pick][j] -= 1.0;
      granted -= 1.0;
      if (min_demands[pick] > 0 && real[pick][j] < min_demands[pick] - 1e-12) {
        granted -= real[pick][j];
        real[pick][j] = 0.0;
      }
    }

    // Top up the largest remainders, one device per tenant, while grants
    // remain under the house and stay usable against the demand threshold.
    while (granted < house - 1e-9) {
      std::size_t pick = n;
      double best_frac = 1e-9;
      for (std::size_t l = 0; l < n; ++l) {
        if (!eligible[l]) continue;
        const double frac = cand[l] - real[l][j];
        if (frac <= best_frac) continue;
        if (min_demands[l] > 0 && real[l][j] + 1.0 < min_demands[l] - 1e-12) continue;
        best_frac = frac;
        pick = l;
      }
      if (pick == n) break;  // nobody can use another device
      real[pick][j] += 1.0;
      granted += 1.0;
    }
  }

  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < k; ++j) {
      (*dev_rows[l])[j] += ideal[l][j] - real[l][j];
    }
  }
  ledger.round += 1;
  return real;
}

int JobPlacement::type_span() const {
  std::set<std::size_t> types;
  for (const auto& p : pieces) types.insert(p.type);
  return static_cast<int>(types.size());
}

namespace {

struct Host {
  std::string id;
  std::size_t type;
  int free;
};

std::vector<Host> expand_hosts(const ClusterSpec& cluster) {
  std::vector<Host> hosts;
  std::vector<int> per_type_seq(cluster.num_types(), 0);
  for (const auto& g : cluster.hosts) {
    const std::size_t t = cluster.type_index(g.gpu_type);
    for (int i = 0; i < g.host_count; ++i) {
      hosts.push_back({g.gpu_type + "-h" + std::to_string(per_type_seq[t]++), t,
                       g.gpus_per_host});
    }
  }
  return hosts;
}

}  // namespace

PlacementMap place(const Mat& real_shares,
                   const std::vector<PlacementRequest>& jobs,
                   const ClusterSpec& cluster) {
  const std::size_t k = cluster.num_types();
  Mat pool = real_shares;
  std::vector<Host> hosts = expand_hosts(cluster);

  // Host free count per type, for feasibility checks.
  auto type_free = [&](std::size_t t) {
    int s = 0;
    for (const auto& h : hosts) {
      if (h.type == t) s += h.free;
    }
    return s;
  };

  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return jobs[a].demand > jobs[b].demand;
  });

  PlacementMap out;
  for (std::size_t oi : order) {
    const auto& job = jobs[oi];
    const int demand = job.demand;
    Vec& p = pool[job.tenant_index];
    JobPlacement placement;
    placement.job_id = job.job_id;
    placement.tenant_id = job.tenant_id;
    placement.workers = demand;

    auto take_from_type = [&](std::size_t t, int count) {
      // first-fit across hosts of the type, splitting when needed
      int left = count;
      for (auto& h : hosts) {
        if (left == 0) break;
        if (h.type != t || h.free == 0) continue;
        const int grab = std::min(h.free, left);
        h.free -= grab;
        left -= grab;
        placement.pieces.push_back({h.id, t, grab});
      }
      p[t] -= count;
    };

    bool done = false;
    // Whole job on one host of one granted type, fastest type first.
    for (std::size_t tj = k; tj-- > 0 && !done;) {
      if (p[tj] + 1e-9 < demand) continue;
      for (auto& h : hosts) {
        if (h.type == tj && h.free >= demand) {
          h.free -= demand;
          p[tj] -= demand;
          placement.pieces.push_back({h.id, tj, demand});
          done = true;
          break;
        }
      }
    }
    // One granted type, split across hosts.
    for (std::size_t tj = k; tj-- > 0 && !done;) {
      if (p[tj] + 1e-9 < demand) continue;
      if (type_free(tj) < demand) continue;
      take_from_type(tj, demand);
      done = true;
    }
    // Last resort: a window of adjacent types, smallest span first and the
    // fastest window within a span, filled from its fast end.
    for (std::size_t span = 2; span <= k && !done; ++span) {
      for (std::size_t hi = k; hi >= span && !done; --hi) {
        const std::size_t lo = hi - span;  // window [lo, hi)
        double avail = 0;
        for (std::size_t t = lo; t < hi; ++t) {
          avail += std::min(p[t], static_cast<double>(type_free(t)));
        }
        if (avail + 1e-9 < demand) continue;
        int left = demand;
        for (std::size_t t = hi; t-- > lo && left > 0;) {
          const int grab = std::min(
              left, static_cast<int>(std::min(p[t], static_cast<double>(type_free(t)))));
          if (grab > 0) {
            take_from_type(t, grab);
            left -= grab;
          }
        }
        done = (left == 0);
      }
    }

    if (done) {
      out.placed.push_back(std::move(placement));
    } else {
      out.unplaced.push_back(job.job_id);
    }
  }
  return out;
}

double effective_throughput(const JobPlacement& placement, const Vec& speedup) {
  if (placement.pieces.empty()) return 0.0;
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& piece : placement.pieces) {
    if (piece.type >= speedup.size()) throw ShapeMismatch("placement type out of range");
    slowest = std::min(slowest, speedup[piece.type]);
  }
  return placement.workers * slowest;
}

}  // namespace gpufair
