#include "gridtrade/robust.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gridtrade {

void IntervalTrade::validate(const Market& market) const {
  for (const auto& [i, b] : bounds) {
    if (i >= market.participants.size())
      throw StructuralError("interval trade names unknown participant index " + std::to_string(i));
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower > b.upper)
      throw DomainError("interval trade for '" + market.participants[i].id + "' needs finite lower <= upper");
  }
}

IntervalState IntervalState::zero(int bus_count) {
  IntervalState s;
  s.x_lower = Eigen::VectorXd::Zero(bus_count);
  s.x_upper = Eigen::VectorXd::Zero(bus_count);
  return s;
}

IntervalState IntervalState::recompute(int bus_count, const std::vector<IntervalRecord>& records) {
  IntervalState s = zero(bus_count);
  for (const auto& r : records) {
    if (!r.accepted) continue;
    s.x_lower += r.gamma * r.q.lower;
    s.x_upper += r.gamma * r.q.upper;
  }
  s.records = records;
  return s;
}

NodalInterval nodal_interval(const IntervalTrade& trade, const Market& market) {
  trade.validate(market);
  NodalInterval q{Eigen::VectorXd::Zero(market.bus_count()), Eigen::VectorXd::Zero(market.bus_count())};
  for (const auto& [i, b] : trade.bounds) {
    const int bus = market.participants[i].bus;
    q.lower[bus] += b.lower;
    q.upper[bus] += b.upper;
  }
  return q;
}

double worst_loading(const LoadingMatrix& lm, int row, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  double w = 0.0;
  for (int j = 0; j < lm.bus_count(); ++j) {
    const double h = lm.rows(row, j);
    w += h > 0 ? h * upper[j] : h * lower[j];
  }
  return w;
}

namespace {

void require_robustly_feasible(const LoadingMatrix& lm, const IntervalState& state, double tol) {
  for (int r = 0; r < lm.row_count(); ++r)
    if (worst_loading(lm, r, state.x_lower, state.x_upper) > lm.limits[r] + tol)
      throw PreconditionError("interval state is not robustly feasible on row " + std::to_string(r));
}

bool robustly_feasible_after(const LoadingMatrix& lm, const IntervalState& state, const NodalInterval& q,
                             double gamma, double tol) {
  const Eigen::VectorXd lo = state.x_lower + gamma * q.lower;
  const Eigen::VectorXd hi = state.x_upper + gamma * q.upper;
  for (int r = 0; r < lm.row_count(); ++r)
    if (worst_loading(lm, r, lo, hi) > lm.limits[r] + tol) return false;
  return true;
}

}  // namespace

double robust_curtailment_factor(const LoadingMatrix& lm, const IntervalState& state, const NodalInterval& q,
                                 double tol) {
  require_robustly_feasible(lm, state, tol);
  double gamma = 1.0;
  for (int r = 0; r < lm.row_count(); ++r) {
    const double wq = worst_loading(lm, r, q.lower, q.upper);
    if (wq <= 0.0) continue;
    const double headroom = lm.limits[r] - worst_loading(lm, r, state.x_lower, state.x_upper);
    gamma = std::min(gamma, std::max(headroom, 0.0) / wq);
  }
  return std::clamp(gamma, 0.0, 1.0);
}

double robust_curtailment_bisection(const LoadingMatrix& lm, const IntervalState& state, const NodalInterval& q,
                                    double gamma_tol, double tol) {
  require_robustly_feasible(lm, state, tol);
  if (robustly_feasible_after(lm, state, q, 1.0, 0.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > gamma_tol) {
    const double mid = 0.5 * (lo + hi);
    (robustly_feasible_after(lm, state, q, mid, 0.0) ? lo : hi) = mid;
  }
  return lo;
}

RobustStep accept_interval_trade(IntervalState state, const IntervalTrade& trade, const Market& market,
                                 const LoadingMatrix& lm) {
  IntervalRecord record;
  record.trade = trade;
  record.q = nodal_interval(trade, market);
  record.gamma = robust_curtailment_factor(lm, state, record.q);
  if (record.gamma <= 0.0) {
    record.gamma = 0.0;
    record.reason = "no robust headroom in the trade's worst-case direction";
  } else {
    record.accepted = true;
    state.x_lower += record.gamma * record.q.lower;
    state.x_upper += record.gamma * record.q.upper;
  }
  state.records.push_back(record);
  return {std::move(record), std::move(state)};
}

}  // namespace gridtrade
