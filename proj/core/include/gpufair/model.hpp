#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpufair {

/// Global comparison tolerance for constraint and invariant checks.
/// LP solutions are vertex solutions of small dense systems; 1e-7 separates
/// real violations from roundoff at the scales this library targets.
inline constexpr double kEps = 1e-7;

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveEntry : Error {
  using Error::Error;
};
struct NonMonotoneRow : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct WeightOverflow : Error {
  using Error::Error;
};
struct ConfigInvalid : Error {
  using Error::Error;
};
struct NumericalBreakdown : Error {
  using Error::Error;
};

/// Per-tenant speedup rows, slowest GPU type first. Every row is anchored at
/// 1 in column 0 and is non-decreasing left to right: GPU types are ordered
/// slow to fast cluster-wide, and a row that decreases signals a profiling
/// error the operator must see, so construction rejects it.
class SpeedupMatrix {
 public:
  /// Validates and adopts already-normalized rows.
  static SpeedupMatrix from_rows(Mat rows);

  /// Divides each raw throughput row by its first entry (the slowest type).
  static SpeedupMatrix normalize_throughput(const Mat& raw);

  std::size_t tenants() const { return rows_.size(); }
  std::size_t gpu_types() const { return rows_.empty() ? 0 : rows_[0].size(); }
  const Vec& row(std::size_t l) const { return rows_[l]; }
  double at(std::size_t l, std::size_t j) const { return rows_[l][j]; }
  const Mat& rows() const { return rows_; }

  /// Validates a single normalized speedup row (anchor 1, positive, finite,
  /// non-decreasing).
  static void validate_row(const Vec& row);

 private:
  explicit SpeedupMatrix(Mat rows) : rows_(std::move(rows)) {}
  Mat rows_;
};

/// Fractional GPU grants, one row per tenant in canonical tenant order.
struct AllocationMatrix {
  Mat x;

  std::size_t tenants() const { return x.size(); }
  std::size_t gpu_types() const { return x.empty() ? 0 : x[0].size(); }

  /// Entries >= 0 and column sums <= m_j + kEps.
  void validate(const std::vector<double>& capacities) const;
};

struct HostGroup {
  std::string gpu_type;
  int gpus_per_host = 0;
  int host_count = 0;
};

/// GPU types in slow-to-fast order with per-type device counts and the host
/// topology. All GPUs on a host share one type.
struct ClusterSpec {
  std::vector<std::string> gpu_types;
  std::vector<int> capacities;
  std::vector<HostGroup> hosts;

  std::size_t num_types() const { return gpu_types.size(); }
  std::vector<double> capacities_as_double() const;
  int total_devices() const;

  /// Index of a type label; throws ConfigInvalid for unknown labels.
  std::size_t type_index(const std::string& label) const;

  /// Checks that per-type host GPU counts sum to the type capacity.
  void validate() const;

  /// Uniform hosts covering each type exactly (gpus_per_host devices per
  /// host, capacity/gpus_per_host hosts). Capacities must divide evenly.
  static ClusterSpec uniform(std::vector<std::string> types,
                             std::vector<int> capacities, int gpus_per_host);
};

/// Positive rational tenant weight. Kept exact so weighted expansion can
/// scale all weights by a common denominator.
struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);

  double value() const { return static_cast<double>(num) / den; }

  /// Closest rational with denominator <= max_den; throws ConfigInvalid if
  /// no such fraction reproduces v within 1e-9.
  static Rational from_double(double v, std::int64_t max_den = 1'000'000);
};

struct JobSpec {
  std::string id;
  double iterations = 0;  // abstract work units
  int demand = 1;         // workers per job
  int submit_round = 0;
};

struct JobType {
  Vec speedup;  // one validated speedup row
  std::vector<JobSpec> jobs;
};

struct TenantProfile {
  std::string id;
  Rational weight;
  std::vector<JobType> job_types;

  void validate(std::size_t num_gpu_types) const;
};

using EfficiencyVector = Vec;

/// E_l = sum_j w_l^j * x_l^j for every tenant row.
EfficiencyVector efficiency(const SpeedupMatrix& w, const AllocationMatrix& x);

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ShapeMismatch("dot: size mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sum(const Vec& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace gpufair
