#include "flowte/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowte/error.hpp"

namespace flowte::lp {

std::string to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::IterationLimit: return "iteration-limit";
    case Status::Infeasible: return "infeasible-model";
    case Status::Unbounded: return "unbounded";
  }
  return "unknown";
}

std::size_t LinearProgram::add_variable(double objective) {
  objective_.push_back(objective);
  return objective_.size() - 1;
}

void LinearProgram::add_constraint(std::vector<Term> terms, Sense sense, double rhs) {
  for (const Term& t : terms) {
    if (t.var >= objective_.size()) throw ValidationError("constraint references unknown variable");
  }
  rows_.push_back({std::move(terms), sense, rhs});
}

namespace {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), width_(cols + 1), data_((rows + 1) * (cols + 1), 0.0),
        basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }
  double& rhs(std::size_t r) { return data_[r * width_ + cols_]; }
  double rhs(std::size_t r) const { return data_[r * width_ + cols_]; }
  double* row(std::size_t r) { return data_.data() + r * width_; }
  std::size_t objective_row() const { return rows_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    double* pr = row(r);
    const double inv = 1.0 / pr[c];
    for (std::size_t j = 0; j < width_; ++j) pr[j] *= inv;
    pr[c] = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      double* pi = row(i);
      const double factor = pi[c];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) pi[j] -= factor * pr[j];
      pi[c] = 0.0;
    }
    basis_[r] = c;
  }

  /// Rebuilds the objective row for costs `c` (maximize) given the basis.
  void set_objective(const std::vector<double>& cost) {
    double* obj = row(rows_);
    std::fill(obj, obj + width_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) obj[j] = -cost[j];
    for (std::size_t i = 0; i < rows_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* pi = row(i);
      for (std::size_t j = 0; j < width_; ++j) obj[j] += cb * pi[j];
    }
  }

 private:
  std::size_t rows_, cols_, width_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
};

enum class Outcome { Optimal, Unbounded, IterationLimit };

Outcome optimize(Tableau& t, const std::vector<bool>& allowed, const Options& opt,
                 std::size_t& iterations) {
  std::size_t degenerate_run = 0;
  const std::size_t obj = t.objective_row();
  while (true) {
    if (iterations >= opt.max_iterations) return Outcome::IterationLimit;
    const bool bland = degenerate_run >= opt.degenerate_switch;
    std::size_t enter = t.cols();
    double best = -opt.optimality_tolerance;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (!allowed[j]) continue;
      const double rc = t.at(obj, j);
      if (rc < best) {
        enter = j;
        if (bland) break;
        best = rc;
      }
    }
    if (enter == t.cols()) return Outcome::Optimal;

    std::size_t leave = t.rows();
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_pivot = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const double a = t.at(i, enter);
      if (a <= opt.pivot_tolerance) continue;
      const double ratio = std::max(0.0, t.rhs(i)) / a;
      bool take = false;
      if (ratio < best_ratio - 1e-12) {
        take = true;
      } else if (ratio <= best_ratio + 1e-12) {
        take = bland ? t.basis()[i] < t.basis()[leave] : a > best_pivot;
      }
      if (take) {
        leave = i;
        best_ratio = ratio;
        best_pivot = a;
      }
    }
    if (leave == t.rows()) return Outcome::Unbounded;
    degenerate_run = best_ratio <= opt.feasibility_tolerance ? degenerate_run + 1 : 0;
    t.pivot(leave, enter);
    ++iterations;
  }
}

}  // namespace

Result solve(const LinearProgram& program, const Options& options) {
  const std::size_t n = program.num_variables();
  const std::size_t m = program.num_constraints();

  // Normalize to rhs >= 0 and count auxiliary columns.
  struct NormRow {
    std::vector<Term> terms;
    Sense sense;
    double rhs;
  };
  std::vector<NormRow> rows;
  rows.reserve(m);
  std::size_t extra = 0;
  for (const auto& r : program.rows()) {
    NormRow nr{r.terms, r.sense, r.rhs};
    if (nr.rhs < 0.0) {
      nr.rhs = -nr.rhs;
      for (Term& t : nr.terms) t.coef = -t.coef;
      if (nr.sense == Sense::LessEqual) nr.sense = Sense::GreaterEqual;
      else if (nr.sense == Sense::GreaterEqual) nr.sense = Sense::LessEqual;
    }
    extra += nr.sense == Sense::GreaterEqual ? 2 : 1;
    rows.push_back(std::move(nr));
  }

  const std::size_t cols = n + extra;
  Tableau t(m, cols);
  std::vector<bool> artificial(cols, false);
  std::size_t next = n;
  for (std::size_t i = 0; i < m; ++i) {
    for (const Term& term : rows[i].terms) t.at(i, term.var) += term.coef;
    t.rhs(i) = rows[i].rhs;
    switch (rows[i].sense) {
      case Sense::LessEqual:
        t.at(i, next) = 1.0;
        t.basis()[i] = next++;
        break;
      case Sense::GreaterEqual:
        t.at(i, next++) = -1.0;
        t.at(i, next) = 1.0;
        artificial[next] = true;
        t.basis()[i] = next++;
        break;
      case Sense::Equal:
        t.at(i, next) = 1.0;
        artificial[next] = true;
        t.basis()[i] = next++;
        break;
    }
  }

  Result result;
  result.x.assign(n, 0.0);
  std::size_t iterations = 0;
  const bool any_artificial = std::any_of(artificial.begin(), artificial.end(), [](bool a) { return a; });

  if (any_artificial) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) phase1[j] = artificial[j] ? -1.0 : 0.0;
    t.set_objective(phase1);
    std::vector<bool> allowed(cols, true);
    const Outcome out = optimize(t, allowed, options, iterations);
    result.iterations = iterations;
    if (out == Outcome::IterationLimit) {
      result.status = Status::IterationLimit;
      return result;
    }
    if (t.rhs(t.objective_row()) < -options.feasibility_tolerance * std::max<double>(1.0, static_cast<double>(m))) {
      result.status = Status::Infeasible;
      return result;
    }
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (!artificial[t.basis()[i]]) continue;
      std::size_t best = cols;
      double mag = options.pivot_tolerance;
      for (std::size_t j = 0; j < cols; ++j) {
        if (artificial[j]) continue;
        if (std::abs(t.at(i, j)) > mag) {
          mag = std::abs(t.at(i, j));
          best = j;
        }
      }
      if (best != cols) t.pivot(i, best);
    }
  }

  std::vector<double> cost(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) cost[j] = program.objective()[j];
  t.set_objective(cost);
  std::vector<bool> allowed(cols, true);
  for (std::size_t j = 0; j < cols; ++j) allowed[j] = !artificial[j];
  const Outcome out = optimize(t, allowed, options, iterations);
  result.iterations = iterations;

  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = t.basis()[i];
    if (b < n) result.x[b] = std::max(0.0, t.rhs(i));
  }
  result.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) result.objective += program.objective()[j] * result.x[j];
  switch (out) {
    case Outcome::Optimal: result.status = Status::Optimal; break;
    case Outcome::Unbounded: result.status = Status::Unbounded; break;
    case Outcome::IterationLimit: result.status = Status::IterationLimit; break;
  }
  return result;
}

}  // namespace flowte::lp
