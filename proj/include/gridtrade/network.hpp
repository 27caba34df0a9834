#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace gridtrade {

// Absolute tolerances in MW.
inline constexpr double kFeasibilityTol = 1e-8;
inline constexpr double kBindingTol = 1e-6;
inline constexpr double kBalanceTol = 1e-9;
inline constexpr double kDirectionTol = 1e-9;

struct Line {
  int from = 0;
  int to = 0;
  double reactance = 1.0;  // per unit
  double capacity = 0.0;   // MW
};

// Buses are 0-based. Per-scenario capacity overrides, when present, hold one
// vector of line capacities per scenario.
struct Network {
  int bus_count = 0;
  std::vector<Line> lines;
  int reference_bus = 0;
  std::vector<std::vector<double>> scenario_capacities;

  int line_count() const { return static_cast<int>(lines.size()); }

  // Throws StructuralError for bad indices, non-positive line data or a
  // disconnected graph.
  void validate() const;
  bool connected() const;
  bool is_tree() const;
};

// H stacked as [Hhat; -Hhat]: row l (0 <= l < L) is the shift-factor row of
// line l in its from->to direction and row l + L is its negation. Both halves
// share the capacity of line l.
struct LoadingMatrix {
  Eigen::MatrixXd rows;                 // 2L x N
  Eigen::VectorXd limits;               // 2L
  std::vector<Eigen::VectorXd> scenario_limits;  // optional, 2L each

  int line_count() const { return static_cast<int>(rows.rows() / 2); }
  int row_count() const { return static_cast<int>(rows.rows()); }
  int bus_count() const { return static_cast<int>(rows.cols()); }

  // Limits in force for scenario s (falls back to the base limits).
  const Eigen::VectorXd& limits_for(int scenario) const;

  // Forward shift-factor block Hhat (L x N).
  Eigen::MatrixXd shift_factors() const { return rows.topRows(line_count()); }
};

LoadingMatrix build_loading_matrix(const Network& network);

// Injection state: one column per scenario, one row per bus.
using InjectionMatrix = Eigen::MatrixXd;

struct LineViolation {
  int row = 0;
  int scenario = 0;
  double excess = 0.0;  // h_l' x_s - f_l
};

struct FeasibilityReport {
  std::vector<LineViolation> violations;
  std::vector<double> balance_residual;  // 1' x_s per scenario
  bool feasible = true;
};

FeasibilityReport check_feasible(const LoadingMatrix& lm, const InjectionMatrix& x, double tol = kFeasibilityTol,
                                 double balance_tol = kBalanceTol);

// Rows with |h_l' x_s - f_l| <= tol, ascending. Throws PreconditionError when
// x_s violates a line limit by more than kFeasibilityTol.
std::vector<int> binding_lines(const LoadingMatrix& lm, const Eigen::VectorXd& x_s, int scenario = 0,
                               double tol = kBindingTol);

bool is_feasible_direction(const LoadingMatrix& lm, const InjectionMatrix& x, const InjectionMatrix& q,
                           double binding_tol = kBindingTol, double tol = kDirectionTol);

struct CurtailmentResult {
  double gamma = 1.0;
  bool rejected = false;
  int limiting_row = -1;       // row that set gamma (or blocked the trade)
  int limiting_scenario = -1;
};

// Closed-form ratio test: the largest gamma in (0, 1] with x + gamma q inside
// every line limit. A binding row loaded in the positive direction by q blocks
// the trade entirely (gamma = 0, rejected).
CurtailmentResult curtailment_factor(const LoadingMatrix& lm, const InjectionMatrix& x, const InjectionMatrix& q,
                                     double binding_tol = kBindingTol, double direction_tol = kDirectionTol);

// Same ratio test restricted to a single scenario column.
CurtailmentResult curtailment_factor_scenario(const LoadingMatrix& lm, const Eigen::VectorXd& x_s,
                                              const Eigen::VectorXd& q_s, int scenario,
                                              double binding_tol = kBindingTol,
                                              double direction_tol = kDirectionTol);

}  // namespace gridtrade
