#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace gridtrade::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { minimize, maximize };

enum class Status { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(Status status);

// Dense LP in general form:
//   optimize  objective' x
//   s.t.      eq_matrix x = eq_rhs
//             ineq_matrix x <= ineq_rhs
//             lower <= x <= upper      (entries may be +/- kInfinity)
struct LinearProgram {
  Sense sense = Sense::minimize;
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index variable_count() const { return objective.size(); }

  // Throws std::invalid_argument on inconsistent dimensions, non-finite
  // coefficients or crossed bounds.
  void validate() const;
};

// Duals are shadow prices: the derivative of the optimal objective with
// respect to the right-hand side of each row. For a maximization the
// inequality duals are therefore >= 0, for a minimization <= 0.
//
// reduced_costs = objective - eq_matrix' eq_duals - ineq_matrix' ineq_duals;
// a nonzero entry is the shadow price of whichever variable bound is active.
struct LpSolution {
  Status status = Status::numerical_failure;
  Eigen::VectorXd primal;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  Eigen::VectorXd reduced_costs;
  double objective = 0.0;
  int iterations = 0;

  bool optimal() const { return status == Status::optimal; }
};

struct KktResiduals {
  double primal_infeasibility = 0.0;  // worst violated row or bound
  double dual_infeasibility = 0.0;    // worst dual sign violation
  double complementarity = 0.0;       // worst |dual * slack|
  double duality_gap = 0.0;           // |primal objective - dual objective|
};

// Solves with a dense two-phase primal simplex. Results are re-derived from
// the final basis by an LU solve against the original data, so primal values
// and duals carry factorization accuracy rather than accumulated pivot error.
LpSolution solve(const LinearProgram& program);

// Independent certificate check used by tests and by consumers that want to
// assert the LpSolution invariants.
KktResiduals kkt_residuals(const LinearProgram& program, const LpSolution& solution);

// Incremental construction of sparse-ish rows into a dense LinearProgram.
class ProgramBuilder {
 public:
  using Terms = std::vector<std::pair<int, double>>;

  explicit ProgramBuilder(Sense sense) : sense_(sense) {}

  int add_variable(double lower, double upper, double cost = 0.0);
  void set_cost(int variable, double cost);
  int add_equality(const Terms& terms, double rhs);
  int add_inequality(const Terms& terms, double rhs);  // terms . x <= rhs

  int variable_count() const { return static_cast<int>(costs_.size()); }
  int equality_count() const { return static_cast<int>(eq_rhs_.size()); }
  int inequality_count() const { return static_cast<int>(ineq_rhs_.size()); }

  LinearProgram build() const;

 private:
  Sense sense_;
  std::vector<double> costs_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<Terms> eq_rows_;
  std::vector<double> eq_rhs_;
  std::vector<Terms> ineq_rows_;
  std::vector<double> ineq_rhs_;
};

}  // namespace gridtrade::lp
