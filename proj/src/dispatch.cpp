#include "gridtrade/dispatch.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gridtrade {

namespace {

// Column layout of one participant inside an LP.
struct ParticipantColumns {
  std::vector<int> p;                       // per scenario
  std::vector<std::vector<int>> segment_rows;  // epigraph rows per scenario, empty for linear utilities
  std::vector<int> na_rows;                 // p_s - p_{s+1} = 0, DA only
};

// Adds p_{i,s} with utility P_i(s) u_{i,s}(p) plus linear_terms[s] * p to the
// objective, together with the bound and non-anticipation constraints.
ParticipantColumns add_participant(lp::ProgramBuilder& b, const Participant& part, const ScenarioSet& scenarios,
                                   const std::vector<double>& linear_terms) {
  ParticipantColumns cols;
  const int s_count = scenarios.count();
  cols.segment_rows.resize(static_cast<std::size_t>(s_count));
  for (int s = 0; s < s_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const Interval& bounds = part.bounds[si];
    const UtilityFunction& u = part.utility[si];
    const double prob = part.probability(scenarios, s);
    const int p = b.add_variable(bounds.lower, bounds.upper, linear_terms[si]);
    cols.p.push_back(p);
    if (u.slopes().size() == 1) {
      b.set_cost(p, linear_terms[si] + prob * u.slopes().front());
      continue;
    }
    const int t = b.add_variable(-lp::kInfinity, lp::kInfinity, prob);
    const auto intercepts = u.intercepts();
    for (std::size_t k = 0; k < intercepts.size(); ++k)
      cols.segment_rows[si].push_back(b.add_inequality({{t, 1.0}, {p, -u.slopes()[k]}}, intercepts[k]));
  }
  if (part.day_ahead())
    for (int s = 0; s + 1 < s_count; ++s)
      cols.na_rows.push_back(b.add_equality({{cols.p[static_cast<std::size_t>(s)], 1.0},
                                             {cols.p[static_cast<std::size_t>(s + 1)], -1.0}},
                                            0.0));
  return cols;
}

double plan_value(const Participant& part, const ScenarioSet& scenarios, const Eigen::VectorXd& plan,
                  const std::vector<double>& linear_terms) {
  double v = 0.0;
  for (Eigen::Index s = 0; s < plan.size(); ++s) {
    const auto si = static_cast<std::size_t>(s);
    v += linear_terms[si] * plan[s] + part.probability(scenarios, static_cast<int>(s)) * part.utility[si].value(plan[s]);
  }
  return v;
}

}  // namespace

DispatchSolution solve_dispatch(const Market& input, bool pin_inelastic) {
  input.validate();
  const Market market = pin_inelastic ? oracle_form(input) : input;
  const LoadingMatrix lm = build_loading_matrix(market.network);
  const int s_count = market.scenario_count();
  const int n_count = market.bus_count();
  const int i_count = market.participant_count();

  lp::ProgramBuilder b(lp::Sense::maximize);
  std::vector<ParticipantColumns> cols;
  const std::vector<double> no_linear(static_cast<std::size_t>(s_count), 0.0);
  for (const auto& part : market.participants) cols.push_back(add_participant(b, part, market.scenarios, no_linear));

  std::vector<std::vector<int>> x(static_cast<std::size_t>(n_count), std::vector<int>(static_cast<std::size_t>(s_count)));
  for (auto& row : x)
    for (int& v : row) v = b.add_variable(-lp::kInfinity, lp::kInfinity);

  std::vector<std::vector<int>> balance_rows(x.size(), std::vector<int>(static_cast<std::size_t>(s_count)));
  std::vector<int> sum_rows;
  std::vector<std::vector<int>> line_rows(static_cast<std::size_t>(lm.row_count()),
                                          std::vector<int>(static_cast<std::size_t>(s_count)));
  for (int s = 0; s < s_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    for (int n = 0; n < n_count; ++n) {
      lp::ProgramBuilder::Terms t{{x[static_cast<std::size_t>(n)][si], 1.0}};
      for (int i = 0; i < i_count; ++i)
        if (market.participants[static_cast<std::size_t>(i)].bus == n) t.emplace_back(cols[static_cast<std::size_t>(i)].p[si], -1.0);
      balance_rows[static_cast<std::size_t>(n)][si] = b.add_equality(t, 0.0);
    }
    lp::ProgramBuilder::Terms sum;
    for (int n = 0; n < n_count; ++n) sum.emplace_back(x[static_cast<std::size_t>(n)][si], 1.0);
    sum_rows.push_back(b.add_equality(sum, 0.0));
    const Eigen::VectorXd& f = lm.limits_for(s);
    for (int r = 0; r < lm.row_count(); ++r) {
      lp::ProgramBuilder::Terms t;
      for (int n = 0; n < n_count; ++n)
        if (lm.rows(r, n) != 0.0) t.emplace_back(x[static_cast<std::size_t>(n)][si], lm.rows(r, n));
      line_rows[static_cast<std::size_t>(r)][si] = b.add_inequality(t, f[r]);
    }
  }

  const lp::LpSolution sol = lp::solve(b.build());
  if (sol.status == lp::Status::infeasible) throw PreconditionError("dispatch is infeasible for this market");
  if (!sol.optimal()) throw NumericalError("dispatch LP ended with status " + lp::to_string(sol.status));

  DispatchSolution out;
  out.iterations = static_cast<std::size_t>(sol.iterations);
  out.objective = sol.objective;
  out.plans = PlanMatrix::Zero(i_count, s_count);
  out.x = Eigen::MatrixXd::Zero(n_count, s_count);
  out.lambda = Eigen::MatrixXd::Zero(n_count, s_count);
  out.eta_lower = Eigen::MatrixXd::Zero(i_count, s_count);
  out.eta_upper = Eigen::MatrixXd::Zero(i_count, s_count);
  out.zeta = Eigen::MatrixXd::Zero(i_count, s_count);
  out.subgradient = Eigen::MatrixXd::Zero(i_count, s_count);
  out.beta = Eigen::MatrixXd::Zero(lm.row_count(), s_count);
  out.gamma_s = Eigen::VectorXd::Zero(s_count);

  for (int s = 0; s < s_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    for (int n = 0; n < n_count; ++n) {
      out.x(n, s) = sol.primal[x[static_cast<std::size_t>(n)][si]];
      out.lambda(n, s) = sol.eq_duals[balance_rows[static_cast<std::size_t>(n)][si]];
    }
    out.gamma_s[s] = sol.eq_duals[sum_rows[si]];
    for (int r = 0; r < lm.row_count(); ++r) out.beta(r, s) = sol.ineq_duals[line_rows[static_cast<std::size_t>(r)][si]];
  }
  for (int i = 0; i < i_count; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const Participant& part = market.participants[ii];
    const ParticipantColumns& c = cols[ii];
    for (int s = 0; s < s_count; ++s) {
      const auto si = static_cast<std::size_t>(s);
      const int p = c.p[si];
      out.plans(i, s) = sol.primal[p];
      const double rc = sol.reduced_costs[p];
      out.eta_upper(i, s) = std::max(rc, 0.0);
      out.eta_lower(i, s) = std::max(-rc, 0.0);
      const double prob = part.probability(market.scenarios, s);
      const UtilityFunction& u = part.utility[si];
      if (c.segment_rows[si].empty()) {
        out.subgradient(i, s) = u.slopes().front();
      } else {
        double g = 0.0;
        for (std::size_t k = 0; k < c.segment_rows[si].size(); ++k)
          g += sol.ineq_duals[c.segment_rows[si][k]] * u.slopes()[k];
        out.subgradient(i, s) = g / prob;
      }
    }
    for (std::size_t r = 0; r < c.na_rows.size(); ++r) {
      const double nu = sol.eq_duals[c.na_rows[r]];
      out.zeta(i, static_cast<Eigen::Index>(r)) += nu;
      out.zeta(i, static_cast<Eigen::Index>(r + 1)) -= nu;
    }
  }
  return out;
}

double expected_producer_cost(const Market& market, const PlanMatrix& plans) {
  double cost = 0.0;
  for (int i = 0; i < market.participant_count(); ++i) {
    const Participant& p = market.participants[static_cast<std::size_t>(i)];
    if (p.kind == ParticipantKind::producer)
      cost -= evaluate_utility_market(p, plans.row(i).transpose(), market.scenarios);
  }
  return cost;
}

PriceSystem prices_from(const DispatchSolution& solution) { return {solution.lambda, solution.lambda}; }

std::optional<double> lmp_from_marginals(const Market& market, const PlanMatrix& plans, int bus, int scenario,
                                         double tol) {
  for (int i = 0; i < market.participant_count(); ++i) {
    const Participant& p = market.participants[static_cast<std::size_t>(i)];
    if (p.bus != bus || p.day_ahead()) continue;
    const double v = plans(i, scenario);
    const Interval& b = p.bounds[static_cast<std::size_t>(scenario)];
    if (v <= b.lower + tol || v >= b.upper - tol) continue;
    const UtilityFunction& u = p.utility[static_cast<std::size_t>(scenario)];
    if (u.at_breakpoint(v, tol)) continue;
    return -p.probability(market.scenarios, scenario) * u.slopes_at(v, tol).second;
  }
  return std::nullopt;
}

double welfare_gap(const Market& market, const PlanMatrix& plans, const DispatchSolution& solution) {
  return std::max(0.0, solution.objective - total_utility(market, plans));
}

EquilibriumReport check_arrow_debreu(const Market& market, const PlanMatrix& plans, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& lambda, double tol) {
  const int s_count = market.scenario_count();
  const int n_count = market.bus_count();
  if (plans.rows() != market.participant_count() || plans.cols() != s_count || x.rows() != n_count ||
      x.cols() != s_count || lambda.rows() != n_count || lambda.cols() != s_count)
    throw StructuralError("equilibrium check inputs have inconsistent dimensions");

  EquilibriumReport report;
  report.verdict = true;
  for (const auto& part : market.participants) {
    std::vector<double> linear(static_cast<std::size_t>(s_count));
    for (int s = 0; s < s_count; ++s) linear[static_cast<std::size_t>(s)] = lambda(part.bus, s);
    lp::ProgramBuilder b(lp::Sense::maximize);
    add_participant(b, part, market.scenarios, linear);
    const lp::LpSolution sol = lp::solve(b.build());
    const Eigen::Index i = static_cast<Eigen::Index>(report.participant_ok.size());
    const Eigen::VectorXd plan = plans.row(i).transpose();
    double slack = lp::kInfinity;
    if (sol.optimal() && local_feasible(part, plan, tol)) slack = sol.objective - plan_value(part, market.scenarios, plan, linear);
    report.participant_slack.push_back(slack);
    report.participant_ok.push_back(slack <= tol);
    report.verdict = report.verdict && slack <= tol;
  }

  if (n_count > 0 && s_count > 0) {
    const LoadingMatrix lm = build_loading_matrix(market.network);
    lp::ProgramBuilder b(lp::Sense::maximize);
    double at_plan = 0.0;
    for (int s = 0; s < s_count; ++s) {
      std::vector<int> cols;
      lp::ProgramBuilder::Terms sum;
      for (int n = 0; n < n_count; ++n) {
        cols.push_back(b.add_variable(-lp::kInfinity, lp::kInfinity, -lambda(n, s)));
        sum.emplace_back(cols.back(), 1.0);
        at_plan -= lambda(n, s) * x(n, s);
      }
      b.add_equality(sum, 0.0);
      const Eigen::VectorXd& f = lm.limits_for(s);
      for (int r = 0; r < lm.row_count(); ++r) {
        lp::ProgramBuilder::Terms t;
        for (int n = 0; n < n_count; ++n)
          if (lm.rows(r, n) != 0.0) t.emplace_back(cols[static_cast<std::size_t>(n)], lm.rows(r, n));
        b.add_inequality(t, f[r]);
      }
    }
    const lp::LpSolution sol = lp::solve(b.build());
    const bool x_feasible = check_feasible(lm, x, tol, tol).feasible;
    report.so_slack = sol.optimal() && x_feasible ? sol.objective - at_plan : lp::kInfinity;
  }
  report.so_ok = report.so_slack <= tol;
  report.verdict = report.verdict && report.so_ok;

  report.clearing_residual = x - aggregate_by_bus(market, plans);
  if (report.clearing_residual.size() > 0 && report.clearing_residual.cwiseAbs().maxCoeff() > tol) report.verdict = false;
  return report;
}

double KktReport::worst() const {
  return std::max({participant_stationarity, subgradient_membership, so_stationarity, complementarity, sign, primal});
}

KktReport dispatch_kkt(const Market& input, const DispatchSolution& sol, bool pin_inelastic) {
  const Market market = pin_inelastic ? oracle_form(input) : input;
  const LoadingMatrix lm = build_loading_matrix(market.network);
  KktReport k;
  const double scale_tol = 1e-7;
  for (int i = 0; i < market.participant_count(); ++i) {
    const Participant& part = market.participants[static_cast<std::size_t>(i)];
    for (int s = 0; s < market.scenario_count(); ++s) {
      const double prob = part.probability(market.scenarios, s);
      const double p = sol.plans(i, s);
      const Interval& b = part.bounds[static_cast<std::size_t>(s)];
      const double r = sol.eta_upper(i, s) - sol.eta_lower(i, s);
      k.participant_stationarity = std::max(
          k.participant_stationarity,
          std::abs(prob * sol.subgradient(i, s) + sol.lambda(part.bus, s) - r - sol.zeta(i, s)));
      const auto [left, right] = part.utility[static_cast<std::size_t>(s)].slopes_at(p, scale_tol);
      const double g = sol.subgradient(i, s);
      k.subgradient_membership = std::max({k.subgradient_membership, right - g, g - left});
      k.complementarity = std::max({k.complementarity, std::abs(sol.eta_upper(i, s) * (b.upper - p)),
                                    std::abs(sol.eta_lower(i, s) * (p - b.lower))});
      k.sign = std::max({k.sign, -sol.eta_upper(i, s), -sol.eta_lower(i, s)});
      k.primal = std::max({k.primal, b.lower - p, p - b.upper});
      if (part.day_ahead()) k.primal = std::max(k.primal, std::abs(p - sol.plans(i, 0)));
    }
  }
  const Eigen::MatrixXd so = sol.lambda + lm.rows.transpose() * sol.beta;
  for (int s = 0; s < market.scenario_count(); ++s) {
    const Eigen::VectorXd flow = lm.rows * sol.x.col(s);
    const Eigen::VectorXd& f = lm.limits_for(s);
    for (int n = 0; n < market.bus_count(); ++n)
      k.so_stationarity = std::max(k.so_stationarity, std::abs(so(n, s) + sol.gamma_s[s]));
    for (int r = 0; r < lm.row_count(); ++r) {
      k.sign = std::max(k.sign, -sol.beta(r, s));
      k.complementarity = std::max(k.complementarity, std::abs(sol.beta(r, s) * (f[r] - flow[r])));
      k.primal = std::max(k.primal, flow[r] - f[r]);
    }
    k.primal = std::max(k.primal, std::abs(sol.x.col(s).sum()));
  }
  if (market.participant_count() > 0)
    k.primal = std::max(k.primal, (sol.x - aggregate_by_bus(market, sol.plans)).cwiseAbs().maxCoeff());
  return k;
}

}  // namespace gridtrade
