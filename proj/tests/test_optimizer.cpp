#include <cstring>
#include <random>

#include "doctest.h"
#include "gpufair/lp.hpp"
#include "oracles.hpp"

using namespace gpufair;

TEST_CASE("single variable with an upper bound") {
  LinearProgram lp;
  lp.num_vars = 1;
  lp.objective = {1.0};
  lp.add_le({1.0}, 3.0);
  const auto sol = solve(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.values[0] == doctest::Approx(3.0));
  CHECK(sol.objective_value == doctest::Approx(3.0));
  CHECK(sol.is_vertex);
}

TEST_CASE("optimum lands on a vertex of the simplex face") {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.objective = {1.0, 1.0};
  lp.add_le({1.0, 1.0}, 1.0);
  lp.add_le({1.0, 0.0}, 0.25);
  const auto sol = solve(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(1.0));
  CHECK(sol.values[0] == doctest::Approx(0.25));
  CHECK(sol.values[1] == doctest::Approx(0.75));
}

namespace {

// The equal-throughput instance for W=[[1,2],[1,3],[1,4]], m=[1,1], written
// out as an explicit LP: maximize total weighted allocation subject to
// capacity and pairwise equal throughput.
LinearProgram equal_throughput_instance() {
  const Mat w = {{1, 2}, {1, 3}, {1, 4}};
  LinearProgram lp;
  lp.num_vars = 6;
  lp.objective = {1, 2, 1, 3, 1, 4};
  lp.add_le({1, 0, 1, 0, 1, 0}, 1.0);
  lp.add_le({0, 1, 0, 1, 0, 1}, 1.0);
  lp.add_eq({1, 2, -1, -3, 0, 0}, 0.0);
  lp.add_eq({0, 0, 1, 3, -1, -4}, 0.0);
  (void)w;
  return lp;
}

}  // namespace

TEST_CASE("equal-throughput instance: grid oracle confirms 54/13 before the solver") {
  const Mat w = {{1, 2}, {1, 3}, {1, 4}};
  // Oracle first: exhaustive search over the 3-variable reduced system.
  const double oracle_c = oracle::noncoop_best_common_throughput(w, 1.0, 1.0, 400);
  CHECK(oracle_c == doctest::Approx(18.0 / 13.0).epsilon(2e-2));
  CHECK(oracle_c <= 18.0 / 13.0 + 1e-9);

  const auto sol = solve(equal_throughput_instance());
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(54.0 / 13.0).epsilon(1e-9));
  CHECK(sol.objective_value / 3.0 >= oracle_c - 1e-9);
  // x1 = <1, 5/26>, x2 = <0, 12/26>, x3 = <0, 9/26>
  CHECK(sol.values[0] == doctest::Approx(1.0));
  CHECK(sol.values[1] == doctest::Approx(5.0 / 26.0));
  CHECK(sol.values[2] == doctest::Approx(0.0));
  CHECK(sol.values[3] == doctest::Approx(12.0 / 26.0));
  CHECK(sol.values[4] == doctest::Approx(0.0));
  CHECK(sol.values[5] == doctest::Approx(9.0 / 26.0));
}

TEST_CASE("infeasible programs report Infeasible") {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.objective = {1.0, 0.0};
  lp.add_eq({1.0, 1.0}, 2.0);
  lp.add_le({1.0, 1.0}, 1.0);
  CHECK(solve(lp).status == LpStatus::Infeasible);

  LinearProgram neg;
  neg.num_vars = 1;
  neg.objective = {1.0};
  neg.add_le({1.0}, -1.0);  // x <= -1 with x >= 0
  CHECK(solve(neg).status == LpStatus::Infeasible);
}

TEST_CASE("unbounded programs report Unbounded") {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.objective = {1.0, 0.0};
  lp.add_le({-1.0, 1.0}, 1.0);
  CHECK(solve(lp).status == LpStatus::Unbounded);
}

TEST_CASE("solving the same program twice is bitwise identical") {
  const auto a = solve(equal_throughput_instance());
  const auto b = solve(equal_throughput_instance());
  REQUIRE(a.values.size() == b.values.size());
  CHECK(std::memcmp(a.values.data(), b.values.data(),
                    a.values.size() * sizeof(double)) == 0);
  CHECK(a.objective_value == b.objective_value);
}

namespace {

struct RandomLp {
  LinearProgram primal;
  Mat a;
  Vec b, c;
};

// Feasible (x = 0) and bounded (all-positive constraint matrix) by
// construction.
RandomLp random_le_lp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_real_distribution<double> coeff(0.1, 2.0);
  std::uniform_real_distribution<double> rhs(0.5, 5.0);
  std::uniform_real_distribution<double> obj(-1.0, 2.0);
  RandomLp out;
  const int n = dim(rng), m = dim(rng);
  out.primal.num_vars = n;
  for (int j = 0; j < n; ++j) out.c.push_back(obj(rng));
  out.primal.objective = out.c;
  for (int i = 0; i < m; ++i) {
    Vec row;
    for (int j = 0; j < n; ++j) row.push_back(coeff(rng));
    out.b.push_back(rhs(rng));
    out.a.push_back(row);
    out.primal.add_le(std::move(row), out.b.back());
  }
  return out;
}

}  // namespace

TEST_CASE("strong duality on random feasible bounded programs") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 60; ++t) {
    const RandomLp lp = random_le_lp(rng);
    const auto primal = solve(lp.primal);
    REQUIRE(primal.status == LpStatus::Optimal);

    // Dual: minimize b.y s.t. A^T y >= c, y >= 0, solved as a maximization.
    LinearProgram dual;
    const std::size_t m = lp.a.size(), n = lp.c.size();
    dual.num_vars = m;
    for (std::size_t i = 0; i < m; ++i) dual.objective.push_back(-lp.b[i]);
    for (std::size_t j = 0; j < n; ++j) {
      Vec row(m);
      for (std::size_t i = 0; i < m; ++i) row[i] = -lp.a[i][j];
      dual.add_le(std::move(row), -lp.c[j]);
    }
    const auto dual_sol = solve(dual);
    REQUIRE(dual_sol.status == LpStatus::Optimal);
    CHECK(primal.objective_value ==
          doctest::Approx(-dual_sol.objective_value).epsilon(1e-6));
  }
}

TEST_CASE("no feasible perturbation improves the returned optimum") {
  std::mt19937_64 rng(4711);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const RandomLp lp = random_le_lp(rng);
    const auto sol = solve(lp.primal);
    REQUIRE(sol.status == LpStatus::Optimal);
    const std::size_t n = lp.c.size();

    int tried = 0;
    while (tried < 100) {
      Vec dir(n);
      for (auto& d : dir) d = gauss(rng);
      const double step = 1e-4;
      Vec cand(n);
      bool feasible = true;
      for (std::size_t j = 0; j < n; ++j) {
        cand[j] = sol.values[j] + step * dir[j];
        if (cand[j] < 0) feasible = false;
      }
      if (feasible) {
        for (std::size_t i = 0; i < lp.a.size() && feasible; ++i) {
          double lhs = 0;
          for (std::size_t j = 0; j < n; ++j) lhs += lp.a[i][j] * cand[j];
          if (lhs > lp.b[i]) feasible = false;
        }
      }
      if (!feasible) continue;
      ++tried;
      double obj = 0;
      for (std::size_t j = 0; j < n; ++j) obj += lp.c[j] * cand[j];
      CHECK(obj <= sol.objective_value + 1e-7);
    }
  }
}

TEST_CASE("degenerate equality systems solve without cycling") {
  // Redundant equalities and heavy ties.
  LinearProgram lp;
  lp.num_vars = 4;
  lp.objective = {1, 1, 1, 1};
  lp.add_eq({1, 1, 0, 0}, 1.0);
  lp.add_eq({1, 1, 0, 0}, 1.0);  // duplicate row
  lp.add_eq({0, 0, 1, 1}, 1.0);
  lp.add_le({1, 0, 1, 0}, 1.0);
  lp.add_le({0, 1, 0, 1}, 1.0);
  const auto sol = solve(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(2.0));
}
