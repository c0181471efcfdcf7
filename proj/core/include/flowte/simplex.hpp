#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace flowte::lp {

enum class Sense { LessEqual, Equal, GreaterEqual };
enum class Status { Optimal, IterationLimit, Infeasible, Unbounded };

std::string to_string(Status status);

struct Term {
  std::size_t var;
  double coef;
};

/// maximize c^T x  subject to  rows (<=, =, >=) rhs,  x >= 0.
class LinearProgram {
 public:
  std::size_t add_variable(double objective);
  void add_constraint(std::vector<Term> terms, Sense sense, double rhs);

  std::size_t num_variables() const { return objective_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }

  struct Row {
    std::vector<Term> terms;
    Sense sense;
    double rhs;
  };
  const std::vector<double>& objective() const { return objective_; }
  const std::vector<Row>& rows() const { return rows_; }

 private:
  std::vector<double> objective_;
  std::vector<Row> rows_;
};

struct Options {
  std::size_t max_iterations = 200000;
  double pivot_tolerance = 1e-10;
  double optimality_tolerance = 1e-10;
  double feasibility_tolerance = 1e-9;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t degenerate_switch = 40;
};

struct Result {
  Status status = Status::Infeasible;
  std::vector<double> x;  // best basic solution found (zeros if none)
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Dense two-phase tableau simplex. Dantzig pricing, falling back to
/// Bland's rule on degenerate stalls so it cannot cycle.
Result solve(const LinearProgram& program, const Options& options = {});

}  // namespace flowte::lp
