#include "gridtrade/commands.hpp"

#include "gridtrade/errors.hpp"
#include "gridtrade/tree.hpp"

#include <chrono>

namespace gridtrade {

using nlohmann::json;

void apply_overrides(MarketFile& f, const EngineOverrides& o) {
  if (o.epsilon) f.engine.epsilon = *o.epsilon;
  if (o.seed) f.engine.seed = *o.seed;
  if (o.max_steps) f.engine.max_steps = *o.max_steps;
  if (o.proposer) f.proposer.mode = parse_proposer_mode(*o.proposer);
  if (o.curtailment) {
    if (*o.curtailment == "uniform") f.engine.curtailment = CurtailmentMode::uniform;
    else if (*o.curtailment == "hybrid") f.engine.curtailment = CurtailmentMode::hybrid;
    else throw InputError("curtailment: expected uniform or hybrid");
  }
  f.proposer.seed = f.engine.seed;
  try {
    f.engine.validate();
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
}

RunOutput run_market(const MarketFile& f, const std::string& label) {
  const auto start = std::chrono::steady_clock::now();
  LpProposer proposer(f.market, f.proposer);
  RunOutput out;
  out.result = run_trading(f.market, f.engine, proposer);
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const auto& records = out.result.state.records;
  out.trace = trace_jsonl(f.market, records);

  std::size_t accepted = 0;
  for (const auto& r : records) accepted += r.accepted ? 1 : 0;
  json& rep = out.report;
  if (!label.empty()) rep["market"] = label;
  rep["config"] = engine_to_json(f.engine, f.proposer);
  rep["converged"] = out.result.converged;
  rep["steps"] = records.size();
  rep["accepted_steps"] = accepted;
  rep["rounds"] = out.result.rounds;
  rep["final_welfare"] = round12(out.result.final_welfare);
  rep["certified_improvement"] = round12(out.result.certified_improvement);
  rep["expected_cost"] = round12(expected_producer_cost(f.market, out.result.state.y));
  rep["final_state"] = {{"y", plans_to_json(f.market, out.result.state.y)}, {"x", matrix_to_json(out.result.state.x)}};
  rep["oracle_welfare"] = nullptr;
  rep["oracle_gap"] = nullptr;
  try {
    const DispatchSolution d = solve_dispatch(f.market);
    rep["oracle_welfare"] = round12(d.objective);
    rep["oracle_gap"] = round12(welfare_gap(f.market, out.result.state.y, d));
    rep["prices"] = prices_to_json(f.market, prices_from(d));
    const EquilibriumReport eq =
        check_arrow_debreu(oracle_form(f.market), out.result.state.y, out.result.state.x, d.lambda);
    rep["equilibrium_verdict"] = eq.verdict;
  } catch (const PreconditionError&) {
    // no oracle for this market; the report leaves the oracle fields null
  }
  rep["timing_ms"] = round12(elapsed);
  return out;
}

json dispatch_report(const MarketFile& f) { return dispatch_to_json(f.market, solve_dispatch(f.market)); }

json prices_report(const MarketFile& f) { return prices_to_json(f.market, prices_from(solve_dispatch(f.market))); }

json equilibrium_report(const MarketFile& f, const std::optional<PlanMatrix>& y, const std::optional<Eigen::MatrixXd>& x,
                        const std::optional<Eigen::MatrixXd>& lambda) {
  PlanMatrix plans;
  Eigen::MatrixXd injections;
  if (y && x) {
    plans = *y;
    injections = *x;
  } else {
    LpProposer proposer(f.market, f.proposer);
    const RunResult r = run_trading(f.market, f.engine, proposer);
    plans = r.state.y;
    injections = r.state.x;
  }
  const Eigen::MatrixXd prices = lambda ? *lambda : solve_dispatch(f.market).lambda;
  return equilibrium_to_json(f.market, check_arrow_debreu(oracle_form(f.market), plans, injections, prices));
}

namespace {

json components_json(const std::vector<BilateralTrade>& parts) {
  json a = json::array();
  for (const auto& b : parts)
    a.push_back({{"supply", b.supply}, {"demand", b.demand}, {"quantity", round12(to_double(b.quantity))},
                 {"exact", b.quantity.str()}});
  return a;
}

json rational_row(const RationalVector& v) {
  json a = json::array();
  for (const auto& r : v) a.push_back(round12(to_double(r)));
  return a;
}

}  // namespace

json decomposition_report(const MarketFile& f) {
  const Market& m = f.market;
  std::vector<std::vector<double>> trades, states;
  std::optional<std::vector<double>> alpha;
  if (f.decompose) {
    trades = f.decompose->trade;
    states = f.decompose->state;
    alpha = f.decompose->alpha;
  } else {
    LpProposer proposer(m, f.proposer);
    const RunResult r = run_trading(m, f.engine, proposer);
    for (int s = 0; s < m.scenario_count(); ++s) {
      std::vector<double> col(static_cast<std::size_t>(m.bus_count()));
      double sum = 0.0;
      for (int n = 0; n < m.bus_count(); ++n) {
        col[static_cast<std::size_t>(n)] = round12(r.state.x(n, s));
        sum += col[static_cast<std::size_t>(n)];
      }
      col[static_cast<std::size_t>(m.network.reference_bus)] -= sum;  // absorb rounding so the trade balances
      trades.push_back(col);
      states.emplace_back(static_cast<std::size_t>(m.bus_count()), 0.0);
    }
  }
  json scenarios = json::array();
  for (std::size_t s = 0; s < trades.size(); ++s) {
    const RationalVector trade = to_rational(trades[s]);
    const RationalVector state = to_rational(states[s]);
    json entry = {{"scenario", s},
                  {"sequential", components_json(decompose_sequential(m.network, trade, state))},
                  {"conformal", components_json(decompose_conformal(m.network, trade, state))}};
    if (alpha) {
      const ProfitableDecomposition pd = decompose_profitable(m.network, trade, to_rational(*alpha), state);
      json profits = json::array();
      for (const auto& p : pd.profits) profits.push_back(round12(to_double(p)));
      entry["profitable"] = {{"components", components_json(pd.components)},
                             {"profits", profits},
                             {"redundant", pd.redundant},
                             {"dropped", pd.dropped},
                             {"curtailed_trade", rational_row(pd.curtailed_trade)},
                             {"original_profit", round12(to_double(pd.original_profit))},
                             {"curtailed_profit", round12(to_double(pd.curtailed_profit))}};
    }
    scenarios.push_back(std::move(entry));
  }
  return {{"scenarios", scenarios}};
}

RobustOutput robust_run(const MarketFile& f) {
  if (f.robust_trades.empty()) throw InputError("$.robust_trades: required field missing");
  const LoadingMatrix lm = build_loading_matrix(f.market.network);
  IntervalState state = IntervalState::zero(f.market.bus_count());
  RobustOutput out;
  for (const IntervalTrade& t : f.robust_trades) {
    const double bisection = robust_curtailment_bisection(lm, state, nodal_interval(t, f.market));
    RobustStep step = accept_interval_trade(std::move(state), t, f.market, lm);
    state = std::move(step.state);
    json line = interval_record_to_json(f.market, step.record);
    line["gamma_bisection"] = round12(bisection);
    out.trace += line.dump() + "\n";
  }
  std::size_t accepted = 0;
  for (const auto& r : state.records) accepted += r.accepted ? 1 : 0;
  json lo = json::array(), hi = json::array();
  for (Eigen::Index n = 0; n < state.x_lower.size(); ++n) {
    lo.push_back(round12(state.x_lower[n]));
    hi.push_back(round12(state.x_upper[n]));
  }
  out.summary = {{"trades", state.records.size()}, {"accepted", accepted}, {"x_lower", lo}, {"x_upper", hi}};
  return out;
}

}  // namespace gridtrade
