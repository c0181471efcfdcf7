#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "flowte/simplex.hpp"

using namespace flowte::lp;

namespace {

double row_value(const LinearProgram::Row& r, const std::vector<double>& x) {
  double v = 0.0;
  for (const Term& t : r.terms) v += t.coef * x[t.var];
  return v;
}

void expect_feasible(const LinearProgram& lp, const std::vector<double>& x, double tol = 1e-9) {
  for (double v : x) EXPECT_GE(v, -tol);
  for (const auto& r : lp.rows()) {
    const double v = row_value(r, x);
    if (r.sense == Sense::LessEqual) EXPECT_LE(v, r.rhs + tol);
    if (r.sense == Sense::GreaterEqual) EXPECT_GE(v, r.rhs - tol);
    if (r.sense == Sense::Equal) EXPECT_NEAR(v, r.rhs, tol);
  }
}

/// Best vertex of {A x <= b, x >= 0} in three variables, by solving every
/// 3x3 system drawn from the constraint and bound hyperplanes.
double vertex_oracle(const std::vector<std::array<double, 3>>& a, const std::vector<double>& b,
                     const std::array<double, 3>& c) {
  std::vector<std::array<double, 4>> planes;
  for (std::size_t i = 0; i < a.size(); ++i) planes.push_back({a[i][0], a[i][1], a[i][2], b[i]});
  for (int j = 0; j < 3; ++j) {
    std::array<double, 4> p{0, 0, 0, 0};
    p[j] = 1.0;
    planes.push_back(p);
  }
  double best = -INFINITY;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    for (std::size_t j = i + 1; j < planes.size(); ++j) {
      for (std::size_t k = j + 1; k < planes.size(); ++k) {
        const auto &p = planes[i], &q = planes[j], &r = planes[k];
        const double det = p[0] * (q[1] * r[2] - q[2] * r[1]) - p[1] * (q[0] * r[2] - q[2] * r[0]) +
                           p[2] * (q[0] * r[1] - q[1] * r[0]);
        if (std::abs(det) < 1e-12) continue;
        std::array<double, 3> x{};
        for (int col = 0; col < 3; ++col) {
          auto m = std::array<std::array<double, 3>, 3>{{{p[0], p[1], p[2]}, {q[0], q[1], q[2]}, {r[0], r[1], r[2]}}};
          m[0][col] = p[3];
          m[1][col] = q[3];
          m[2][col] = r[3];
          x[col] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                    m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
                   det;
        }
        bool ok = x[0] >= -1e-9 && x[1] >= -1e-9 && x[2] >= -1e-9;
        for (std::size_t row = 0; ok && row < a.size(); ++row) {
          ok = a[row][0] * x[0] + a[row][1] * x[1] + a[row][2] * x[2] <= b[row] + 1e-9;
        }
        if (ok) best = std::max(best, c[0] * x[0] + c[1] * x[1] + c[2] * x[2]);
      }
    }
  }
  return best;
}

}  // namespace

TEST(Simplex, TextbookMaximum) {
  LinearProgram lp;
  const auto x = lp.add_variable(3.0), y = lp.add_variable(5.0);
  lp.add_constraint({{x, 1.0}}, Sense::LessEqual, 4.0);
  lp.add_constraint({{y, 2.0}}, Sense::LessEqual, 12.0);
  lp.add_constraint({{x, 3.0}, {y, 2.0}}, Sense::LessEqual, 18.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.objective, 36.0, 1e-9);
  EXPECT_NEAR(r.x[x], 2.0, 1e-9);
  EXPECT_NEAR(r.x[y], 6.0, 1e-9);
}

TEST(Simplex, GreaterEqualRowsNeedPhaseOne) {
  // min x + y  s.t.  x + 2y >= 4,  3x + y >= 6  ->  (8/5, 6/5).
  LinearProgram lp;
  const auto x = lp.add_variable(-1.0), y = lp.add_variable(-1.0);
  lp.add_constraint({{x, 1.0}, {y, 2.0}}, Sense::GreaterEqual, 4.0);
  lp.add_constraint({{x, 3.0}, {y, 1.0}}, Sense::GreaterEqual, 6.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.objective, -14.0 / 5.0, 1e-9);
  EXPECT_NEAR(r.x[x], 8.0 / 5.0, 1e-9);
  EXPECT_NEAR(r.x[y], 6.0 / 5.0, 1e-9);
}

TEST(Simplex, EqualityAndNegativeRhs) {
  // max x - y  s.t.  x + y = 3,  -x <= -1 (x >= 1),  x <= 2.
  LinearProgram lp;
  const auto x = lp.add_variable(1.0), y = lp.add_variable(-1.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::Equal, 3.0);
  lp.add_constraint({{x, -1.0}}, Sense::LessEqual, -1.0);
  lp.add_constraint({{x, 1.0}}, Sense::LessEqual, 2.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-9);
  expect_feasible(lp, r.x);
}

TEST(Simplex, RedundantEqualities) {
  LinearProgram lp;
  const auto x = lp.add_variable(1.0), y = lp.add_variable(2.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::Equal, 2.0);
  lp.add_constraint({{x, 2.0}, {y, 2.0}}, Sense::Equal, 4.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.objective, 4.0, 1e-9);
  expect_feasible(lp, r.x);
}

TEST(Simplex, Infeasible) {
  LinearProgram lp;
  const auto x = lp.add_variable(1.0);
  lp.add_constraint({{x, 1.0}}, Sense::LessEqual, 1.0);
  lp.add_constraint({{x, 1.0}}, Sense::GreaterEqual, 2.0);
  EXPECT_EQ(solve(lp).status, Status::Infeasible);
}

TEST(Simplex, Unbounded) {
  LinearProgram lp;
  const auto x = lp.add_variable(1.0), y = lp.add_variable(0.0);
  lp.add_constraint({{x, 1.0}, {y, -1.0}}, Sense::LessEqual, 1.0);
  EXPECT_EQ(solve(lp).status, Status::Unbounded);
}

TEST(Simplex, NoConstraints) {
  LinearProgram lp;
  lp.add_variable(-1.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_EQ(r.objective, 0.0);
  LinearProgram up;
  up.add_variable(1.0);
  EXPECT_EQ(solve(up).status, Status::Unbounded);
}

TEST(Simplex, BealeCyclingExampleTerminates) {
  // Cycles under plain Dantzig pricing with lowest-index ties; optimum 1/20.
  LinearProgram lp;
  const auto x4 = lp.add_variable(0.75), x5 = lp.add_variable(-150.0), x6 = lp.add_variable(0.02),
             x7 = lp.add_variable(-6.0);
  lp.add_constraint({{x4, 0.25}, {x5, -60.0}, {x6, -0.04}, {x7, 9.0}}, Sense::LessEqual, 0.0);
  lp.add_constraint({{x4, 0.5}, {x5, -90.0}, {x6, -0.02}, {x7, 3.0}}, Sense::LessEqual, 0.0);
  lp.add_constraint({{x6, 1.0}}, Sense::LessEqual, 1.0);
  const Result r = solve(lp);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.objective, 0.05, 1e-9);
  expect_feasible(lp, r.x);
}

TEST(Simplex, IterationLimitReported) {
  LinearProgram lp;
  const auto x = lp.add_variable(3.0), y = lp.add_variable(5.0);
  lp.add_constraint({{x, 1.0}}, Sense::LessEqual, 4.0);
  lp.add_constraint({{y, 2.0}}, Sense::LessEqual, 12.0);
  lp.add_constraint({{x, 3.0}, {y, 2.0}}, Sense::LessEqual, 18.0);
  Options o;
  o.max_iterations = 1;
  const Result r = solve(lp, o);
  EXPECT_EQ(r.status, Status::IterationLimit);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.x.size(), 2u);
}

TEST(Simplex, RandomLpsMatchVertexEnumeration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coef(-1.0, 3.0), rhs(0.5, 5.0), obj(-1.0, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + trial % 4;
    std::vector<std::array<double, 3>> a(m);
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (double& v : a[i]) v = coef(rng);
      b[i] = rhs(rng);
    }
    // Box rows keep every instance bounded.
    for (int j = 0; j < 3; ++j) {
      std::array<double, 3> row{0, 0, 0};
      row[j] = 1.0;
      a.push_back(row);
      b.push_back(10.0);
    }
    const std::array<double, 3> c{obj(rng), obj(rng), obj(rng)};
    LinearProgram lp;
    for (double v : c) lp.add_variable(v);
    for (std::size_t i = 0; i < a.size(); ++i) {
      lp.add_constraint({{0, a[i][0]}, {1, a[i][1]}, {2, a[i][2]}}, Sense::LessEqual, b[i]);
    }
    const Result r = solve(lp);
    ASSERT_EQ(r.status, Status::Optimal) << trial;
    EXPECT_NEAR(r.objective, vertex_oracle(a, b, c), 1e-7) << trial;
    expect_feasible(lp, r.x);
  }
}

TEST(Simplex, StatusNames) {
  EXPECT_EQ(to_string(Status::Optimal), "optimal");
  EXPECT_EQ(to_string(Status::IterationLimit), "iteration-limit");
  EXPECT_EQ(to_string(Status::Infeasible), "infeasible-model");
}
