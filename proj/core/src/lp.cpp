#include "gpufair/lp.hpp"

#include <cmath>
#include <limits>

namespace gpufair {

namespace {

constexpr double kPivotTol = 1e-9;      // pivot candidates below this are zero
constexpr double kReducedCostTol = 1e-9;
constexpr double kFeasTol = 1e-7;
constexpr int kStallLimit = 64;         // degenerate pivots before Bland mode

class Tableau {
 public:
  Tableau(const LinearProgram& lp) {
    n_ = lp.num_vars;
    const std::size_t num_le = lp.le.size();
    const std::size_t num_eq = lp.eq.size();
    m_ = num_le + num_eq;

    // Column layout: [structural n][slack/surplus per row][artificials][rhs].
    // Surplus columns appear for <= rows flipped to >= by a negative rhs.
    slack_start_ = n_;
    art_start_ = n_ + m_;  // reserve one slack/surplus slot per row
    cols_ = art_start_;    // artificial columns appended below as needed

    struct RawRow {
      Vec coeffs;
      double rhs;
      bool is_eq;
    };
    std::vector<RawRow> raw;
    raw.reserve(m_);
    for (const auto& r : lp.le) {
      if (r.coeffs.size() != n_) throw ShapeMismatch("LP row width mismatch");
      raw.push_back({r.coeffs, r.rhs, false});
    }
    for (const auto& r : lp.eq) {
      if (r.coeffs.size() != n_) throw ShapeMismatch("LP row width mismatch");
      raw.push_back({r.coeffs, r.rhs, true});
    }

    // First pass: which rows need an artificial column.
    std::vector<int> art_col(m_, -1);
    for (std::size_t i = 0; i < m_; ++i) {
      const bool flipped = raw[i].rhs < 0;
      const bool needs_art = raw[i].is_eq || flipped;
      if (needs_art) {
        art_col[i] = static_cast<int>(cols_);
        ++cols_;
      }
    }
    num_art_ = cols_ - art_start_;
    width_ = cols_ + 1;  // + rhs

    a_.assign(m_ * width_, 0.0);
    basis_.assign(m_, -1);

    for (std::size_t i = 0; i < m_; ++i) {
      double sign = raw[i].rhs < 0 ? -1.0 : 1.0;
      double* row = a_.data() + i * width_;
      for (std::size_t j = 0; j < n_; ++j) row[j] = sign * raw[i].coeffs[j];
      rhs(i) = sign * raw[i].rhs;
      if (!raw[i].is_eq) {
        // slack for <=, surplus for a flipped row
        row[slack_start_ + i] = sign;
      }
      if (art_col[i] >= 0) {
        row[art_col[i]] = 1.0;
        basis_[i] = art_col[i];
      } else {
        basis_[i] = static_cast<int>(slack_start_ + i);
      }
    }
    d_.assign(width_, 0.0);
  }

  LpSolution run(const LinearProgram& lp) {
    LpSolution out;
    if (num_art_ > 0) {
      // Phase 1: maximize -(sum of artificials). Reduced costs start as the
      // column sums over artificial-basic rows.
      double z = 0;
      std::fill(d_.begin(), d_.end(), 0.0);
      for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] >= static_cast<int>(art_start_)) {
          const double* row = a_.data() + i * width_;
          for (std::size_t j = 0; j < width_; ++j) d_[j] += row[j];
          z -= rhs(i);
        }
      }
      for (std::size_t j = art_start_; j < cols_; ++j) d_[j] = 0.0;
      obj_ = z;
      if (!iterate(/*allow_unbounded=*/false)) {
        throw NumericalBreakdown("phase-1 simplex failed to terminate");
      }
      if (obj_ < -kFeasTol) {
        out.status = LpStatus::Infeasible;
        return out;
      }
      evict_artificials();
    }

    // Phase 2 with the real objective.
    std::fill(d_.begin(), d_.end(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) d_[j] = lp.objective[j];
    double z = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      const int b = basis_[i];
      const double cb = (b >= 0 && b < static_cast<int>(n_)) ? lp.objective[b] : 0.0;
      if (cb == 0.0) continue;
      const double* row = a_.data() + i * width_;
      for (std::size_t j = 0; j < width_; ++j) d_[j] -= cb * row[j];
      z += cb * rhs(i);
    }
    for (std::size_t j = art_start_; j < cols_; ++j) d_[j] = 0.0;
    obj_ = z;
    if (!iterate(/*allow_unbounded=*/true)) {
      out.status = LpStatus::Unbounded;
      return out;
    }

    out.status = LpStatus::Optimal;
    out.values.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] >= 0 && basis_[i] < static_cast<int>(n_)) {
        out.values[basis_[i]] = rhs(i);
      }
    }
    out.objective_value = obj_;
    out.is_vertex = true;
    return out;
  }

 private:
  double& rhs(std::size_t i) { return a_[i * width_ + cols_]; }
  double rhs_at(std::size_t i) const { return a_[i * width_ + cols_]; }

  // Returns false on unbounded (phase 2 only), true when optimal.
  bool iterate(bool allow_unbounded) {
    const long max_iters = 2'000'000;
    int stall = 0;
    bool bland = false;
    for (long iter = 0; iter < max_iters; ++iter) {
      // Entering column; artificials never re-enter.
      int pc = -1;
      if (bland) {
        for (std::size_t j = 0; j < art_start_; ++j) {
          if (d_[j] > kReducedCostTol) {
            pc = static_cast<int>(j);
            break;
          }
        }
      } else {
        double best = kReducedCostTol;
        for (std::size_t j = 0; j < art_start_; ++j) {
          if (d_[j] > best) {
            best = d_[j];
            pc = static_cast<int>(j);
          }
        }
      }
      if (pc < 0) return true;  // optimal

      // Leaving row: minimum ratio, ties by smallest basis index.
      int pr = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double piv = a_[i * width_ + pc];
        if (piv <= kPivotTol) continue;
        const double ratio = rhs_at(i) / piv;
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 &&
             (pr < 0 || basis_[i] < basis_[pr]))) {
          best_ratio = ratio;
          pr = static_cast<int>(i);
        }
      }
      if (pr < 0) {
        if (allow_unbounded) return false;
        throw NumericalBreakdown("ratio test failed in phase 1");
      }

      const double before = obj_;
      pivot(static_cast<std::size_t>(pr), static_cast<std::size_t>(pc));
      if (obj_ > before + 1e-12) {
        stall = 0;
        bland = false;
      } else if (++stall >= kStallLimit) {
        bland = true;
      }
    }
    throw NumericalBreakdown("simplex iteration budget exhausted");
  }

  void pivot(std::size_t pr, std::size_t pc) {
    double* prow = a_.data() + pr * width_;
    const double inv = 1.0 / prow[pc];
    for (std::size_t j = 0; j < width_; ++j) prow[j] *= inv;
    prow[pc] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == pr) continue;
      double* row = a_.data() + i * width_;
      const double f = row[pc];
      if (std::fabs(f) <= 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) row[j] -= f * prow[j];
      row[pc] = 0.0;
    }
    const double f = d_[pc];
    if (f != 0.0) {
      for (std::size_t j = 0; j < width_; ++j) d_[j] -= f * prow[j];
      d_[pc] = 0.0;
      obj_ += f * rhs_at(pr);
    }
    basis_[pr] = static_cast<int>(pc);
  }

  // After phase 1, pivot zero-valued artificial basics onto any structural
  // or slack column; rows with no such column are redundant and keep their
  // artificial at zero.
  void evict_artificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < static_cast<int>(art_start_)) continue;
      const double* row = a_.data() + i * width_;
      int col = -1;
      for (std::size_t j = 0; j < art_start_; ++j) {
        if (std::fabs(row[j]) > kPivotTol) {
          col = static_cast<int>(j);
          break;
        }
      }
      if (col >= 0) pivot(i, static_cast<std::size_t>(col));
    }
  }

  std::size_t n_ = 0, m_ = 0;
  std::size_t slack_start_ = 0, art_start_ = 0, cols_ = 0, width_ = 0;
  std::size_t num_art_ = 0;
  std::vector<double> a_;  // m rows, row-major, rhs in last column
  std::vector<double> d_;  // reduced-cost row
  double obj_ = 0;
  std::vector<int> basis_;
};

}  // namespace

LpSolution solve(const LinearProgram& lp) {
  if (lp.objective.size() != lp.num_vars) {
    throw ShapeMismatch("objective width does not match variable count");
  }
  for (const auto& r : lp.eq) {
    if (!std::isfinite(r.rhs)) throw ConfigInvalid("non-finite rhs");
  }
  for (const auto& r : lp.le) {
    if (!std::isfinite(r.rhs)) throw ConfigInvalid("non-finite rhs");
  }
  Tableau t(lp);
  return t.run(lp);
}

}  // namespace gpufair
