#include "gpufair/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace gpufair {

namespace {

// Hand-rolled draws so a seed reproduces the same population across standard
// library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() {
    // xorshift64*
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  double uniform01() { return (next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    // Box-Muller
    double u1 = uniform01(), u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
  }

  int poisson(double mean) {
    // Knuth for small means, normal approximation for large.
    if (mean <= 0) return 0;
    if (mean > 64) {
      const int v = static_cast<int>(std::lround(mean + std::sqrt(mean) * normal()));
      return std::max(0, v);
    }
    const double limit = std::exp(-mean);
    int count = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++count;
      prod *= uniform01();
    }
    return count;
  }

 private:
  std::uint64_t state_;
};

struct JobState {
  std::size_t tenant = 0;
  std::size_t job_type = 0;
  const JobSpec* spec = nullptr;
  double remaining = 0;
  int last_run = -1;
  int finish_round = -1;
  std::vector<PlacementPiece> prev_pieces;

  bool finished() const { return finish_round >= 0; }
};

}  // namespace

void SimulationConfig::validate() const {
  cluster.validate();
  if (round_length_seconds <= 0) throw ConfigInvalid("round_length_seconds must be > 0");
  if (horizon < 1) throw ConfigInvalid("horizon must be >= 1");
  if (context_switch_seconds < 0 || context_switch_seconds >= round_length_seconds) {
    throw ConfigInvalid("context_switch_seconds must be in [0, round length)");
  }
  for (const auto& t : tenants) t.validate(cluster.num_types());
  if (tenants.empty() && generator.tenants <= 0) {
    throw ConfigInvalid("no tenants: provide tenant profiles or a generator");
  }
  std::set<std::string> job_ids;
  for (const auto& t : tenants) {
    for (const auto& jt : t.job_types) {
      for (const auto& j : jt.jobs) {
        if (j.id.empty()) throw ConfigInvalid("job with empty id");
        if (!job_ids.insert(j.id).second) {
          throw ConfigInvalid("duplicate job id: " + j.id);
        }
      }
    }
  }
}

double normalized_throughput_metric(const Vec& allocation, const Vec& speedup) {
  if (allocation.size() != speedup.size()) {
    throw ShapeMismatch("allocation/speedup width mismatch");
  }
  const double devices = sum(allocation);
  if (devices <= kEps) return 1.0;  // zero-device convention, flagged by caller
  return dot(allocation, speedup) / devices;
}

const char* const kModelFamilyNames[6] = {"vgg",  "resnet", "densenet",
                                          "lstm", "rnn",    "transformer"};

Vec model_family_speedup(std::size_t family, std::size_t num_types) {
  // Speedup of each family on the fastest type, relative to the slowest.
  static constexpr double kTopSpeedup[6] = {1.39, 1.30, 1.45, 2.15, 1.90, 2.30};
  if (family >= 6) throw ConfigInvalid("model family index out of range");
  if (num_types == 0) throw ConfigInvalid("cluster with zero GPU types");
  Vec row(num_types, 1.0);
  const double top = kTopSpeedup[family];
  for (std::size_t j = 1; j < num_types; ++j) {
    row[j] = 1.0 + (top - 1.0) * static_cast<double>(j) / (num_types - 1);
  }
  return row;
}

std::vector<TenantProfile> generate_workload(const ContentionProfile& profile,
                                             const ClusterSpec& cluster,
                                             std::uint64_t seed) {
  if (profile.tenants < 0) throw ConfigInvalid("negative tenant count");
  Rng rng(seed ^ 0xC0FFEEULL);

  Mat table = profile.speedup_rows_override;
  if (table.empty()) {
    for (std::size_t f = 0; f < 6; ++f) {
      table.push_back(model_family_speedup(f, cluster.num_types()));
    }
  }
  for (const auto& row : table) SpeedupMatrix::validate_row(row);

  double mean_jobs = profile.mean_jobs_per_tenant;
  if (profile.target_contention > 0 && profile.tenants > 0) {
    // Aim the total demanded workers at contention * devices.
    const double mean_demand = (1.0 + profile.max_demand) / 2.0;
    mean_jobs = profile.target_contention * cluster.total_devices() /
                (profile.tenants * mean_demand);
    mean_jobs = std::max(1.0, mean_jobs);
  }

  std::vector<TenantProfile> tenants;
  for (int i = 0; i < profile.tenants; ++i) {
    TenantProfile t;
    t.id = "tenant-" + std::to_string(i);
    t.weight = Rational(1, 1);
    const bool multi = rng.uniform01() < profile.multi_type_prob;
    const int num_types = multi ? 2 : 1;
    const int total_jobs = std::max(1, rng.poisson(mean_jobs));
    for (int jt = 0; jt < num_types; ++jt) {
      JobType type;
      type.speedup = table[rng.uniform_int(0, static_cast<int>(table.size()) - 1)];
      const int jobs_here =
          jt + 1 == num_types ? total_jobs - (num_types - 1) * (total_jobs / num_types)
                              : total_jobs / num_types;
      for (int j = 0; j < std::max(1, jobs_here); ++j) {
        JobSpec job;
        job.id = t.id + "-t" + std::to_string(jt) + "-j" + std::to_string(j);
        const double mu = std::log(profile.mean_iterations) -
                          0.5 * profile.iterations_sigma * profile.iterations_sigma;
        job.iterations =
            std::max(1.0, std::exp(mu + profile.iterations_sigma * rng.normal()));
        int demand = 1;
        // bias toward small jobs, doubling up to max_demand
        while (demand * 2 <= profile.max_demand && rng.uniform01() < 0.35) demand *= 2;
        job.demand = demand;
        job.submit_round = profile.arrival_spread_rounds > 0
                               ? rng.uniform_int(0, profile.arrival_spread_rounds)
                               : 0;
        type.jobs.push_back(std::move(job));
      }
      t.job_types.push_back(std::move(type));
    }
    tenants.push_back(std::move(t));
  }
  return tenants;
}

SimulationReport run(const SimulationConfig& config) {
  config.validate();
  std::vector<TenantProfile> tenants = config.tenants;
  if (tenants.empty()) {
    tenants = generate_workload(config.generator, config.cluster, config.seed);
  }
  const std::size_t k = config.cluster.num_types();
  const Vec capacities = config.cluster.capacities_as_double();

  std::vector<JobState> jobs;
  for (std::size_t l = 0; l < tenants.size(); ++l) {
    for (std::size_t jt = 0; jt < tenants[l].job_types.size(); ++jt) {
      for (const auto& spec : tenants[l].job_types[jt].jobs) {
        JobState s;
        s.tenant = l;
        s.job_type = jt;
        s.spec = &spec;
        s.remaining = spec.iterations;
        s.last_run = spec.submit_round - 1;
        jobs.push_back(s);
      }
    }
  }
  int last_submit = 0;
  for (const auto& j : jobs) last_submit = std::max(last_submit, j.spec->submit_round);

  SimulationReport report;
  DeviationLedger ledger;

  for (int round = 0; round < config.horizon; ++round) {
    report.rounds_executed = round + 1;

    std::vector<std::size_t> runnable;  // job indices submitted & unfinished
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (!jobs[i].finished() && jobs[i].spec->submit_round <= round) {
        runnable.push_back(i);
      }
    }
    if (runnable.empty()) {
      if (round >= last_submit) {
        --report.rounds_executed;
        break;  // nothing left to arrive
      }
      report.round_tenants.emplace_back();
      report.round_ideal.emplace_back();
      report.round_real.emplace_back();
      report.round_type_estimated.emplace_back();
      continue;
    }

    // Active tenants and their active job types (those with runnable jobs).
    std::vector<std::size_t> active;  // tenant indices
    std::vector<std::vector<std::size_t>> active_types(tenants.size());
    for (std::size_t i : runnable) {
      auto& types = active_types[jobs[i].tenant];
      if (std::find(types.begin(), types.end(), jobs[i].job_type) == types.end()) {
        types.push_back(jobs[i].job_type);
      }
    }
    for (std::size_t l = 0; l < tenants.size(); ++l) {
      if (!active_types[l].empty()) {
        std::sort(active_types[l].begin(), active_types[l].end());
        active.push_back(l);
      }
    }

    std::vector<TenantProfile> round_profiles;
    for (std::size_t l : active) {
      TenantProfile p;
      p.id = tenants[l].id;
      p.weight = tenants[l].weight;
      for (std::size_t jt : active_types[l]) {
        JobType t;
        t.speedup = tenants[l].job_types[jt].speedup;
        p.job_types.push_back(std::move(t));
      }
      round_profiles.push_back(std::move(p));
    }

    const VirtualExpansion exp = expand_weighted(round_profiles);
    const SpeedupMatrix w = exp.matrix();
    const AllocationMatrix x_virtual = allocate(config.policy, w, capacities);
    const CollapsedAllocation collapsed = collapse_virtual(x_virtual, exp);

    Vec estimated(active.size(), 0.0);
    Mat type_estimated(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t jt = 0; jt < round_profiles[a].job_types.size(); ++jt) {
        const double share = dot(round_profiles[a].job_types[jt].speedup,
                                 collapsed.per_job_type[a][jt]);
        type_estimated[a].push_back(share);
        estimated[a] += share;
      }
    }

    std::vector<std::string> ids;
    Vec min_demands;
    for (std::size_t a = 0; a < active.size(); ++a) {
      ids.push_back(tenants[active[a]].id);
      int md = 0;
      for (std::size_t i : runnable) {
        if (jobs[i].tenant == active[a]) {
          md = md == 0 ? jobs[i].spec->demand : std::min(md, jobs[i].spec->demand);
        }
      }
      min_demands.push_back(md);
    }
    const Mat real =
        round_shares(collapsed.per_tenant.x, ids, min_demands, capacities, ledger);

    // Round-robin by starvation within each tenant: longest-starved first.
    std::stable_sort(runnable.begin(), runnable.end(), [&](std::size_t a, std::size_t b) {
      if (jobs[a].last_run != jobs[b].last_run) return jobs[a].last_run < jobs[b].last_run;
      if (jobs[a].spec->submit_round != jobs[b].spec->submit_round) {
        return jobs[a].spec->submit_round < jobs[b].spec->submit_round;
      }
      return jobs[a].spec->id < jobs[b].spec->id;
    });

    Vec pool_left(active.size(), 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) pool_left[a] = sum(real[a]);
    std::vector<PlacementRequest> requests;
    std::vector<std::size_t> request_job;  // job index per request
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t i : runnable) {
        if (jobs[i].tenant != active[a]) continue;
        if (jobs[i].spec->demand <= pool_left[a] + 1e-9) {
          pool_left[a] -= jobs[i].spec->demand;
          requests.push_back(
              {jobs[i].spec->id, a, tenants[active[a]].id, jobs[i].spec->demand});
          request_job.push_back(i);
        }
      }
    }
    const PlacementMap placements = place(real, requests, config.cluster);

    Vec attained(active.size(), 0.0);
    std::vector<int> devices(active.size(), 0);
    for (const auto& pl : placements.placed) {
      std::size_t ji = jobs.size();
      for (std::size_t r = 0; r < requests.size(); ++r) {
        if (requests[r].job_id == pl.job_id) {
          ji = request_job[r];
          break;
        }
      }
      JobState& js = jobs[ji];
      const Vec& speedup = tenants[js.tenant].job_types[js.job_type].speedup;
      const double speed = effective_throughput(pl, speedup);

      double seconds = config.round_length_seconds;
      if (config.context_switch_seconds > 0 &&
          (js.last_run != round - 1 || js.prev_pieces != pl.pieces)) {
        seconds -= config.context_switch_seconds;
      }
      js.remaining -= speed * seconds;
      js.last_run = round;
      js.prev_pieces = pl.pieces;
      if (js.remaining <= 1e-9) {
        js.finish_round = round;
        ++report.jobs_finished;
      }

      const std::size_t a =
          std::find(active.begin(), active.end(), js.tenant) - active.begin();
      attained[a] += speed;
      devices[a] += pl.workers;
      const int span = pl.type_span();
      if (span > 1) {
        report.stragglers.push_back({round, pl.job_id, pl.workers, span});
        ++report.straggler_events;
        report.straggler_workers += pl.workers;
      }
    }

    for (std::size_t a = 0; a < active.size(); ++a) {
      report.timeline.push_back(
          {round, tenants[active[a]].id, estimated[a], attained[a], devices[a]});
      report.total_estimated += estimated[a];
      report.total_actual += attained[a];
    }
    report.round_tenants.push_back(ids);
    report.round_ideal.push_back(collapsed.per_tenant.x);
    report.round_real.push_back(real);
    report.round_type_estimated.push_back(type_estimated);
  }

  for (const auto& js : jobs) {
    JobRecord rec;
    rec.job_id = js.spec->id;
    rec.tenant = tenants[js.tenant].id;
    rec.submit_round = js.spec->submit_round;
    rec.finish_round = js.finish_round;
    rec.finished = js.finished();
    rec.jct_seconds = js.finished()
                          ? (js.finish_round - js.spec->submit_round + 1) *
                                config.round_length_seconds
                          : 0.0;
    report.jobs.push_back(std::move(rec));
  }
  return report;
}

}  // namespace gpufair
