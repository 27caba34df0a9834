#pragma once

#include "gridtrade/market.hpp"
#include "gridtrade/network.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace gridtrade {

// A trade known only up to a box: participant index -> [lower, upper] MW.
// Local scenarios are abstracted into the box.
struct IntervalTrade {
  std::map<std::size_t, Interval> bounds;

  void validate(const Market& market) const;
};

struct NodalInterval {
  Eigen::VectorXd lower;  // N
  Eigen::VectorXd upper;  // N
};

struct IntervalRecord {
  IntervalTrade trade;
  NodalInterval q;
  double gamma = 0.0;
  bool accepted = false;
  std::string reason;
};

struct IntervalState {
  Eigen::VectorXd x_lower;
  Eigen::VectorXd x_upper;
  std::vector<IntervalRecord> records;

  static IntervalState zero(int bus_count);
  // Bounds rebuilt by summing the gamma-scaled boxes of the accepted records.
  static IntervalState recompute(int bus_count, const std::vector<IntervalRecord>& records);
};

// Per-bus interval sum of the member boxes. Balance across participants is
// not imposed, so the enclosure is conservative.
NodalInterval nodal_interval(const IntervalTrade& trade, const Market& market);

// max over the box of h_row' v.
double worst_loading(const LoadingMatrix& lm, int row, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

// Largest gamma in [0, 1] with worst(x) + gamma worst(q) <= f on every row,
// by a per-row ratio test. Throws PreconditionError when the state itself is
// not robustly feasible.
double robust_curtailment_factor(const LoadingMatrix& lm, const IntervalState& state, const NodalInterval& q,
                                 double tol = kFeasibilityTol);

// Same quantity by bisection on the robust feasibility predicate.
double robust_curtailment_bisection(const LoadingMatrix& lm, const IntervalState& state, const NodalInterval& q,
                                    double gamma_tol = 1e-9, double tol = kFeasibilityTol);

struct RobustStep {
  IntervalRecord record;
  IntervalState state;
};

// Curtails and applies an interval trade; gamma = 0 yields a rejected record
// and unchanged bounds.
RobustStep accept_interval_trade(IntervalState state, const IntervalTrade& trade, const Market& market,
                                 const LoadingMatrix& lm);

}  // namespace gridtrade
