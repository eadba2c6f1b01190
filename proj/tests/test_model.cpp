#include <random>

#include "doctest.h"
#include "gpufair/model.hpp"

using namespace gpufair;

TEST_CASE("normalize_throughput divides each row by its slowest-type entry") {
  const auto w = SpeedupMatrix::normalize_throughput({{100, 200}, {50, 250}});
  CHECK(w.at(0, 0) == doctest::Approx(1.0));
  CHECK(w.at(0, 1) == doctest::Approx(2.0));
  CHECK(w.at(1, 0) == doctest::Approx(1.0));
  CHECK(w.at(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("normalize_throughput handles uniform rows") {
  const auto w = SpeedupMatrix::normalize_throughput({{7, 7, 7}});
  for (std::size_t j = 0; j < 3; ++j) CHECK(w.at(0, j) == doctest::Approx(1.0));
}

TEST_CASE("normalize_throughput rejects rows that decrease left to right") {
  CHECK_THROWS_AS(SpeedupMatrix::normalize_throughput({{10, 5}}), NonMonotoneRow);
}

TEST_CASE("normalize_throughput rejects non-positive entries") {
  CHECK_THROWS_AS(SpeedupMatrix::normalize_throughput({{0, 5}}), NonPositiveEntry);
  CHECK_THROWS_AS(SpeedupMatrix::normalize_throughput({{-1, 5}}), NonPositiveEntry);
  CHECK_THROWS_AS(
      SpeedupMatrix::normalize_throughput({{1, std::numeric_limits<double>::infinity()}}),
      NonPositiveEntry);
}

TEST_CASE("normalization is idempotent") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int t = 0; t < 50; ++t) {
    Mat raw(3, Vec(4));
    for (auto& row : raw) {
      row[0] = u(rng);
      for (std::size_t j = 1; j < 4; ++j) row[j] = row[j - 1] * (1.0 + u(rng) / 5);
    }
    const auto once = SpeedupMatrix::normalize_throughput(raw);
    const auto twice = SpeedupMatrix::normalize_throughput(once.rows());
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(once.at(l, j) == doctest::Approx(twice.at(l, j)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("efficiency reproduces the trading-baseline worked vector") {
  const auto w = SpeedupMatrix::from_rows({{1, 2}, {1, 3}, {1, 4}});
  AllocationMatrix x;
  x.x = {{1, 0.09}, {0, 0.47}, {0, 0.44}};
  const auto e = efficiency(w, x);
  CHECK(e[0] == doctest::Approx(1.18).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(1.41).epsilon(1e-12));
  CHECK(e[2] == doctest::Approx(1.76).epsilon(1e-12));
}

TEST_CASE("efficiency reproduces the envy-free optimum vector") {
  const auto w = SpeedupMatrix::from_rows({{1, 2}, {1, 3}, {1, 4}});
  AllocationMatrix x;
  x.x = {{1, 0}, {0, 0.5}, {0, 0.5}};
  const auto e = efficiency(w, x);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(e[1] == doctest::Approx(1.5));
  CHECK(e[2] == doctest::Approx(2.0));
}

TEST_CASE("efficiency of the zero allocation is zero") {
  const auto w = SpeedupMatrix::from_rows({{1, 2}, {1, 3}});
  AllocationMatrix x;
  x.x = {{0, 0}, {0, 0}};
  for (double v : efficiency(w, x)) CHECK(v == 0.0);
}

TEST_CASE("efficiency rejects shape mismatches") {
  const auto w = SpeedupMatrix::from_rows({{1, 2}});
  AllocationMatrix x;
  x.x = {{1, 0}, {0, 1}};
  CHECK_THROWS_AS(efficiency(w, x), ShapeMismatch);
}

TEST_CASE("efficiency is linear in the allocation") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 40; ++t) {
    Mat rows(4, Vec(3));
    for (auto& row : rows) {
      row[0] = 1;
      for (std::size_t j = 1; j < 3; ++j) row[j] = row[j - 1] + u(rng);
    }
    const auto w = SpeedupMatrix::from_rows(rows);
    AllocationMatrix a, b, mix;
    a.x.assign(4, Vec(3));
    b.x.assign(4, Vec(3));
    mix.x.assign(4, Vec(3));
    const double alpha = u(rng), beta = u(rng);
    for (std::size_t l = 0; l < 4; ++l) {
      for (std::size_t j = 0; j < 3; ++j) {
        a.x[l][j] = u(rng);
        b.x[l][j] = u(rng);
        mix.x[l][j] = alpha * a.x[l][j] + beta * b.x[l][j];
      }
    }
    const auto ea = efficiency(w, a), eb = efficiency(w, b), em = efficiency(w, mix);
    for (std::size_t l = 0; l < 4; ++l) {
      CHECK(em[l] == doctest::Approx(alpha * ea[l] + beta * eb[l]).epsilon(1e-9));
    }
  }
}

TEST_CASE("valid random speedup matrices are accepted") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Mat rows(3, Vec(4));
    for (auto& row : rows) {
      row[0] = 1;
      for (std::size_t j = 1; j < 4; ++j) row[j] = row[j - 1] + u(rng);
    }
    CHECK_NOTHROW(SpeedupMatrix::from_rows(rows));
  }
}

TEST_CASE("allocation validation enforces non-negativity and capacity") {
  AllocationMatrix x;
  x.x = {{0.5, 0.5}, {0.6, 0.4}};
  CHECK_NOTHROW(x.validate({2, 1}));
  x.x[0][0] = -0.1;
  CHECK_THROWS_AS(x.validate({2, 1}), NonPositiveEntry);
  x.x[0][0] = 1.8;
  CHECK_THROWS_AS(x.validate({2, 1}), NonPositiveEntry);  // column 0 over 2
  AllocationMatrix ragged;
  ragged.x = {{1.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(ragged.validate({2, 1}), ShapeMismatch);
}

TEST_CASE("cluster host topology must cover the capacities") {
  ClusterSpec spec;
  spec.gpu_types = {"a", "b"};
  spec.capacities = {8, 4};
  spec.hosts = {{"a", 4, 2}, {"b", 4, 1}};
  CHECK_NOTHROW(spec.validate());
  spec.hosts.pop_back();
  CHECK_THROWS_AS(spec.validate(), ConfigInvalid);

  const auto uniform = ClusterSpec::uniform({"a", "b"}, {8, 4}, 4);
  CHECK(uniform.hosts.size() == 2);
  CHECK(uniform.total_devices() == 12);
  CHECK_THROWS_AS(ClusterSpec::uniform({"a"}, {5}, 4), ConfigInvalid);
}

TEST_CASE("rational weights") {
  CHECK(Rational::from_double(2.0).num == 2);
  CHECK(Rational::from_double(2.0).den == 1);
  CHECK(Rational::from_double(0.5).num == 1);
  CHECK(Rational::from_double(0.5).den == 2);
  const auto third = Rational::from_double(1.0 / 3.0);
  CHECK(third.num == 1);
  CHECK(third.den == 3);
  CHECK_THROWS_AS(Rational::from_double(0.0), ConfigInvalid);
  CHECK_THROWS_AS(Rational::from_double(-1.0), ConfigInvalid);
  CHECK_THROWS_AS(Rational(1, 0), ConfigInvalid);
}

TEST_CASE("tenant profiles validate their speedup rows and jobs") {
  TenantProfile t;
  t.id = "u1";
  t.weight = Rational(1, 1);
  t.job_types.push_back({{1.0, 2.0}, {}});
  CHECK_NOTHROW(t.validate(2));
  t.job_types[0].speedup = {1.0, 0.5};
  CHECK_THROWS_AS(t.validate(2), NonMonotoneRow);
  t.job_types[0].speedup = {1.0, 2.0};
  t.job_types[0].jobs.push_back({"j", 100.0, 0, 0});
  CHECK_THROWS_AS(t.validate(2), ConfigInvalid);  // demand < 1
}
