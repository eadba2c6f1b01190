#include "gpufair/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace gpufair {

namespace {

void check_rectangular(const Mat& rows) {
  if (rows.empty()) return;
  const std::size_t k = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != k) throw ShapeMismatch("ragged matrix");
  }
}

}  // namespace

void SpeedupMatrix::validate_row(const Vec& row) {
  if (row.empty()) throw ShapeMismatch("empty speedup row");
  for (double v : row) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw NonPositiveEntry("speedup entries must be positive and finite");
    }
  }
  if (std::fabs(row[0] - 1.0) > kEps) {
    throw NonMonotoneRow("speedup row not anchored at 1 on the slowest type");
  }
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] < row[j - 1] - kEps) {
      std::ostringstream os;
      os << "speedup row decreases at type " << j << " (" << row[j - 1]
         << " -> " << row[j] << "); GPU types must be ordered slow to fast";
      throw NonMonotoneRow(os.str());
    }
  }
}

SpeedupMatrix SpeedupMatrix::from_rows(Mat rows) {
  check_rectangular(rows);
  for (const auto& r : rows) validate_row(r);
  return SpeedupMatrix(std::move(rows));
}

SpeedupMatrix SpeedupMatrix::normalize_throughput(const Mat& raw) {
  check_rectangular(raw);
  Mat rows = raw;
  for (auto& r : rows) {
    if (r.empty()) throw ShapeMismatch("empty throughput row");
    for (double v : r) {
      if (!(v > 0) || !std::isfinite(v)) {
        throw NonPositiveEntry("raw throughput must be positive and finite");
      }
    }
    const double base = r[0];
    for (double& v : r) v /= base;
  }
  return from_rows(std::move(rows));
}

void AllocationMatrix::validate(const std::vector<double>& capacities) const {
  if (!x.empty() && x[0].size() != capacities.size()) {
    throw ShapeMismatch("allocation width does not match capacity vector");
  }
  for (const auto& row : x) {
    if (row.size() != capacities.size()) throw ShapeMismatch("ragged allocation");
    for (double v : row) {
      if (v < -kEps || !std::isfinite(v)) {
        throw NonPositiveEntry("allocation entries must be non-negative");
      }
    }
  }
  for (std::size_t j = 0; j < capacities.size(); ++j) {
    double col = 0;
    for (const auto& row : x) col += row[j];
    if (col > capacities[j] + kEps) {
      std::ostringstream os;
      os << "column " << j << " over capacity: " << col << " > " << capacities[j];
      throw NonPositiveEntry(os.str());
    }
  }
}

std::vector<double> ClusterSpec::capacities_as_double() const {
  return std::vector<double>(capacities.begin(), capacities.end());
}

int ClusterSpec::total_devices() const {
  int t = 0;
  for (int c : capacities) t += c;
  return t;
}

std::size_t ClusterSpec::type_index(const std::string& label) const {
  for (std::size_t j = 0; j < gpu_types.size(); ++j) {
    if (gpu_types[j] == label) return j;
  }
  throw ConfigInvalid("unknown GPU type label: " + label);
}

void ClusterSpec::validate() const {
  if (gpu_types.size() != capacities.size()) {
    throw ConfigInvalid("gpu_types and capacities length differ");
  }
  if (gpu_types.empty()) throw ConfigInvalid("cluster has no GPU types");
  for (int c : capacities) {
    if (c < 0) throw ConfigInvalid("negative capacity");
  }
  std::vector<int> per_type(gpu_types.size(), 0);
  for (const auto& h : hosts) {
    if (h.gpus_per_host <= 0 || h.host_count < 0) {
      throw ConfigInvalid("host group with non-positive size");
    }
    per_type[type_index(h.gpu_type)] += h.gpus_per_host * h.host_count;
  }
  for (std::size_t j = 0; j < capacities.size(); ++j) {
    if (per_type[j] != capacities[j]) {
      std::ostringstream os;
      os << "host GPUs for type " << gpu_types[j] << " sum to " << per_type[j]
         << ", capacity says " << capacities[j];
      throw ConfigInvalid(os.str());
    }
  }
}

ClusterSpec ClusterSpec::uniform(std::vector<std::string> types,
                                 std::vector<int> capacities,
                                 int gpus_per_host) {
  ClusterSpec spec;
  spec.gpu_types = std::move(types);
  spec.capacities = std::move(capacities);
  for (std::size_t j = 0; j < spec.gpu_types.size(); ++j) {
    const int cap = spec.capacities[j];
    if (cap == 0) continue;
    if (cap % gpus_per_host != 0) {
      throw ConfigInvalid("capacity not divisible by gpus_per_host");
    }
    spec.hosts.push_back({spec.gpu_types[j], gpus_per_host, cap / gpus_per_host});
  }
  spec.validate();
  return spec;
}

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (den == 0) throw ConfigInvalid("rational with zero denominator");
  if (num <= 0 || den < 0) {
    if (num < 0 && den < 0) {
      num = -num;
      den = -den;
    } else {
      throw ConfigInvalid("tenant weight must be positive");
    }
  }
  const std::int64_t g = std::gcd(num, den);
  num /= g;
  den /= g;
}

Rational Rational::from_double(double v, std::int64_t max_den) {
  if (!(v > 0) || !std::isfinite(v)) {
    throw ConfigInvalid("tenant weight must be a positive finite number");
  }
  // Stern-Brocot walk toward v.
  std::int64_t lo_n = 0, lo_d = 1, hi_n = 1, hi_d = 0;
  for (;;) {
    const std::int64_t mid_n = lo_n + hi_n;
    const std::int64_t mid_d = lo_d + hi_d;
    if (mid_d > max_den) break;
    const double mid = static_cast<double>(mid_n) / mid_d;
    if (std::fabs(mid - v) < 1e-12) return Rational(mid_n, mid_d);
    if (mid < v) {
      lo_n = mid_n;
      lo_d = mid_d;
    } else {
      hi_n = mid_n;
      hi_d = mid_d;
    }
  }
  // Accept the closest bound if it is an exact-enough representation.
  const double lo = lo_d ? static_cast<double>(lo_n) / lo_d : 0;
  const double hi = hi_d ? static_cast<double>(hi_n) / hi_d : 0;
  if (lo_d && std::fabs(lo - v) < 1e-9) return Rational(lo_n, lo_d);
  if (hi_d && std::fabs(hi - v) < 1e-9) return Rational(hi_n, hi_d);
  throw ConfigInvalid("weight is not representable as a small rational");
}

void TenantProfile::validate(std::size_t num_gpu_types) const {
  if (id.empty()) throw ConfigInvalid("tenant with empty id");
  if (job_types.empty()) {
    throw ConfigInvalid("tenant " + id + " has no job types");
  }
  for (const auto& jt : job_types) {
    if (jt.speedup.size() != num_gpu_types) {
      throw ShapeMismatch("tenant " + id + " speedup row width mismatch");
    }
    SpeedupMatrix::validate_row(jt.speedup);
    for (const auto& job : jt.jobs) {
      if (job.demand < 1) throw ConfigInvalid("job demand must be >= 1");
      if (job.iterations <= 0) throw ConfigInvalid("job iterations must be > 0");
      if (job.submit_round < 0) throw ConfigInvalid("negative submit round");
    }
  }
}

EfficiencyVector efficiency(const SpeedupMatrix& w, const AllocationMatrix& x) {
  if (w.tenants() != x.tenants()) {
    throw ShapeMismatch("speedup and allocation tenant counts differ");
  }
  EfficiencyVector e(w.tenants(), 0.0);
  for (std::size_t l = 0; l < w.tenants(); ++l) {
    if (x.x[l].size() != w.gpu_types()) {
      throw ShapeMismatch("speedup and allocation widths differ");
    }
    e[l] = dot(w.row(l), x.x[l]);
  }
  return e;
}

}  // namespace gpufair
