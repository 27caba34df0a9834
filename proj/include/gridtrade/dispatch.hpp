#pragma once

#include "gridtrade/lp.hpp"
#include "gridtrade/market.hpp"
#include "gridtrade/network.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace gridtrade {

// Optimal expected-welfare schedule with every dual of the dispatch LP.
//
// Sign conventions: lambda is the price of contingent power at bus n in
// scenario s (nonnegative when loads value power). The dual relations are
//   P_i(s) g_{i,s} + lambda_{n,s} - (eta_upper - eta_lower)_{i,s} - zeta_{i,s} = 0
//   lambda_{n,s} + gamma_s + (H' beta_s)_n = 0
// with g a subgradient of the scenario utility at the plan, beta >= 0.
struct DispatchSolution {
  PlanMatrix plans;                 // I x S
  Eigen::MatrixXd x;                // N x S
  double objective = 0.0;           // U*
  Eigen::MatrixXd lambda;           // N x S
  Eigen::MatrixXd eta_lower;        // I x S, >= 0
  Eigen::MatrixXd eta_upper;        // I x S, >= 0
  Eigen::MatrixXd zeta;             // I x S, zero rows for RT participants
  Eigen::MatrixXd beta;             // 2L x S, >= 0
  Eigen::VectorXd gamma_s;          // S
  Eigen::MatrixXd subgradient;      // I x S, g_{i,s} recovered from the epigraph multipliers
  std::size_t iterations = 0;
};

// Solves the stochastic welfare maximization. Inelastic loads are pinned to
// their lower bound unless pin_inelastic is false. Throws PreconditionError
// when the market is infeasible.
DispatchSolution solve_dispatch(const Market& market, bool pin_inelastic = true);

// Expected generation cost under the market probabilities (sum of -U_i over producers).
double expected_producer_cost(const Market& market, const PlanMatrix& plans);

struct PriceSystem {
  Eigen::MatrixXd lambda;      // N x S
  Eigen::MatrixXd raw_dual;    // balance-row shadow prices as returned by the LP
};

PriceSystem prices_from(const DispatchSolution& solution);

// -P_i(s) du/dp of an RT participant at bus n that sits strictly inside its
// bounds and off every breakpoint; nullopt when no such participant exists.
std::optional<double> lmp_from_marginals(const Market& market, const PlanMatrix& plans, int bus, int scenario,
                                         double tol = 1e-7);

// U* - U(plans), clamped at zero.
double welfare_gap(const Market& market, const PlanMatrix& plans, const DispatchSolution& solution);

struct EquilibriumReport {
  std::vector<bool> participant_ok;
  std::vector<double> participant_slack;  // best response value minus value at the plan
  bool so_ok = false;
  double so_slack = 0.0;                  // infinite when the operator's problem is unbounded
  Eigen::MatrixXd clearing_residual;      // N x S
  bool verdict = false;
};

EquilibriumReport check_arrow_debreu(const Market& market, const PlanMatrix& plans, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& lambda, double tol = 1e-6);

struct KktReport {
  double participant_stationarity = 0.0;  // worst distance of the stationarity residual
  double subgradient_membership = 0.0;    // worst distance of g outside [right, left] slopes
  double so_stationarity = 0.0;
  double complementarity = 0.0;
  double sign = 0.0;                      // worst negative part of a sign-constrained dual
  double primal = 0.0;                    // bounds, balance, line limits, non-anticipation

  double worst() const;
};

// First-order conditions of the dispatch at its reported primal/dual pair.
KktReport dispatch_kkt(const Market& market, const DispatchSolution& solution, bool pin_inelastic = true);

}  // namespace gridtrade
