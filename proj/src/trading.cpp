#include "gridtrade/trading.hpp"

#include "gridtrade/errors.hpp"

#include <cmath>
#include <sstream>

namespace gridtrade {

std::vector<std::size_t> Trade::group() const {
  std::vector<std::size_t> out;
  for (const auto& [i, v] : plans)
    if ((v.array() != 0.0).any()) out.push_back(i);
  return out;
}

PlanMatrix Trade::dense(int participant_count, int scenario_count) const {
  PlanMatrix m = PlanMatrix::Zero(participant_count, scenario_count);
  for (const auto& [i, v] : plans) {
    if (static_cast<int>(i) >= participant_count) throw StructuralError("trade names unknown participant index " + std::to_string(i));
    if (v.size() != scenario_count) throw StructuralError("trade plan has the wrong scenario count");
    m.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return m;
}

Trade Trade::scaled(double factor) const {
  Trade out;
  for (const auto& [i, v] : plans) out.plans.emplace(i, v * factor);
  return out;
}

double TradeRecord::gamma_for(int scenario) const {
  if (!scenario_gammas.empty()) return scenario_gammas[static_cast<std::size_t>(scenario)];
  return gamma;
}

TradingState TradingState::zero(const Market& market) {
  TradingState s;
  s.y = PlanMatrix::Zero(market.participant_count(), market.scenario_count());
  s.x = Eigen::MatrixXd::Zero(market.bus_count(), market.scenario_count());
  return s;
}

std::string to_string(CurtailmentMode mode) { return mode == CurtailmentMode::uniform ? "uniform" : "hybrid"; }

void EngineConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be positive");
  if (max_steps == 0) throw DomainError("max_steps must be positive");
}

Eigen::MatrixXd nodal_injection(const Trade& trade, const Market& market) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(market.bus_count(), market.scenario_count());
  for (const auto& [i, v] : trade.plans) {
    if (i >= market.participants.size())
      throw StructuralError("trade names unknown participant index " + std::to_string(i));
    if (v.size() != market.scenario_count()) throw StructuralError("trade plan has the wrong scenario count");
    q.row(market.participants[i].bus) += v.transpose();
  }
  return q;
}

std::vector<TradeViolation> validate_trade(const Trade& trade, const TradingState& state, const Market& market,
                                           double balance_tol, double local_tol) {
  std::vector<TradeViolation> out;
  const int s_count = market.scenario_count();
  for (const auto& [i, v] : trade.plans) {
    if (i >= market.participants.size()) {
      out.push_back({"shape", std::nullopt, std::nullopt, "unknown participant index " + std::to_string(i)});
      continue;
    }
    if (v.size() != s_count || !v.allFinite())
      out.push_back({"shape", market.participants[i].id, std::nullopt, "plan must hold one finite value per scenario"});
  }
  if (!out.empty()) return out;

  if (trade.is_zero()) out.push_back({"empty", std::nullopt, std::nullopt, "trade has no nonzero entry"});

  Eigen::VectorXd balance = Eigen::VectorXd::Zero(s_count);
  for (const auto& [i, v] : trade.plans) balance += v;
  for (int s = 0; s < s_count; ++s) {
    if (std::abs(balance[s]) > balance_tol) {
      std::ostringstream msg;
      msg << "injections sum to " << balance[s] << " MW";
      out.push_back({"balance", std::nullopt, s, msg.str()});
    }
  }

  for (const auto& [i, v] : trade.plans) {
    const Participant& p = market.participants[i];
    const Eigen::VectorXd after = state.y.row(static_cast<Eigen::Index>(i)).transpose() + v;
    for (int s = 0; s < s_count; ++s) {
      const Interval& b = p.bounds[static_cast<std::size_t>(s)];
      if (after[s] < b.lower - local_tol || after[s] > b.upper + local_tol) {
        std::ostringstream msg;
        msg << "accumulated plan " << after[s] << " outside [" << b.lower << ", " << b.upper << "]";
        out.push_back({"bounds", p.id, s, msg.str()});
      }
    }
    if (p.day_ahead()) {
      for (int s = 1; s < s_count; ++s) {
        if (std::abs(after[s] - after[0]) > local_tol) {
          out.push_back({"non_anticipation", p.id, s, "day-ahead plan differs across scenarios"});
          break;
        }
      }
    }
  }
  return out;
}

Worthiness is_worthy(const Trade& trade, const TradingState& state, double epsilon, const Market& market) {
  Worthiness w;
  for (const auto& [i, v] : trade.plans) {
    const Participant& p = market.participants.at(i);
    const Eigen::VectorXd before = state.y.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd after = before + v;
    w.delta += evaluate_utility(p, after, market.scenarios) - evaluate_utility(p, before, market.scenarios);
    w.market_delta +=
        evaluate_utility_market(p, after, market.scenarios) - evaluate_utility_market(p, before, market.scenarios);
  }
  w.worthy = w.delta >= epsilon;
  return w;
}

Announcement announce(const TradingState& state, const LoadingMatrix& lm, double binding_tol) {
  Announcement a;
  for (Eigen::Index s = 0; s < state.x.cols(); ++s)
    a.push_back(binding_lines(lm, state.x.col(s), static_cast<int>(s), binding_tol));
  return a;
}

namespace {

void reject(TradeRecord& record, std::string reason) {
  record.accepted = false;
  record.gamma = 0.0;
  record.scenario_gammas.clear();
  record.reasons.push_back(std::move(reason));
}

bool has_day_ahead_member(const Trade& trade, const Market& market) {
  for (std::size_t i : trade.group())
    if (market.participants[i].day_ahead()) return true;
  return false;
}

double group_market_utility(const Market& market, const PlanMatrix& y, const std::vector<std::size_t>& group) {
  double total = 0.0;
  for (std::size_t i : group)
    total += evaluate_utility_market(market.participants[i], y.row(static_cast<Eigen::Index>(i)).transpose(),
                                     market.scenarios);
  return total;
}

}  // namespace

StepResult so_step(TradingState state, const Trade& trade, const EngineConfig& config, const Market& market,
                   const LoadingMatrix& lm) {
  TradeRecord record;
  record.step = state.records.size();
  record.trade = trade;
  record.nodal_injection = Eigen::MatrixXd::Zero(market.bus_count(), market.scenario_count());

  const auto violations = validate_trade(trade, state, market, config.balance_tol, config.local_tol);
  if (!violations.empty()) {
    for (const auto& v : violations) {
      std::string reason = v.kind;
      if (v.participant) reason += " [" + *v.participant + "]";
      if (v.scenario) reason += " [scenario " + std::to_string(*v.scenario) + "]";
      reject(record, reason + ": " + v.message);
    }
  } else {
    record.nodal_injection = nodal_injection(trade, market);
    const Eigen::MatrixXd& q = record.nodal_injection;
    const bool hybrid = config.curtailment == CurtailmentMode::hybrid && !has_day_ahead_member(trade, market);
    if (!is_feasible_direction(lm, state.x, q, config.binding_tol)) {
      reject(record, "not a feasible direction: loads a binding line");
    } else if (!hybrid) {
      const CurtailmentResult c = curtailment_factor(lm, state.x, q, config.binding_tol);
      if (c.rejected) {
        reject(record, "curtailment factor is zero at row " + std::to_string(c.limiting_row));
      } else {
        record.gamma = c.gamma;
        record.accepted = true;
      }
    } else {
      record.scenario_gammas.resize(static_cast<std::size_t>(market.scenario_count()));
      record.gamma = 1.0;
      record.accepted = true;
      for (int s = 0; s < market.scenario_count(); ++s) {
        const CurtailmentResult c =
            curtailment_factor_scenario(lm, state.x.col(s), q.col(s), s, config.binding_tol);
        if (c.rejected) {
          reject(record, "curtailment factor is zero in scenario " + std::to_string(s));
          break;
        }
        record.scenario_gammas[static_cast<std::size_t>(s)] = c.gamma;
        record.gamma = std::min(record.gamma, c.gamma);
      }
    }
  }

  if (record.accepted) {
    const auto group = trade.group();
    const double before = group_market_utility(market, state.y, group);
    for (const auto& [i, v] : trade.plans) {
      for (int s = 0; s < market.scenario_count(); ++s)
        state.y(static_cast<Eigen::Index>(i), s) += record.gamma_for(s) * v[s];
    }
    for (int s = 0; s < market.scenario_count(); ++s) state.x.col(s) += record.gamma_for(s) * record.nodal_injection.col(s);
    record.welfare_delta = group_market_utility(market, state.y, group) - before;
  }
  record.binding_after = announce(state, lm, config.binding_tol);
  state.records.push_back(record);
  return {std::move(record), std::move(state)};
}

RunResult run_trading(const Market& market, const EngineConfig& config, Proposer& proposer) {
  config.validate();
  market.validate();
  const LoadingMatrix lm = build_loading_matrix(market.network);

  RunResult result;
  result.state = TradingState::zero(market);
  for (const auto& p : market.participants) {
    if (!local_feasible(p, Eigen::VectorXd::Zero(market.scenario_count()), config.local_tol))
      throw PreconditionError("participant '" + p.id + "' cannot hold the zero initial trade; use the VOLL form");
  }

  for (result.rounds = 0; result.rounds < config.max_steps;) {
    const Announcement announcement = announce(result.state, lm, config.binding_tol);
    Proposal proposal = proposer.propose(result.state, announcement, config.epsilon);
    ++result.rounds;
    if (proposal.certified_none) {
      result.converged = true;
      result.certified_improvement = proposal.improvement;
      break;
    }
    if (!proposal.trade) continue;

    const Worthiness w = is_worthy(*proposal.trade, result.state, config.epsilon, market);
    if (!w.worthy) {
      TradeRecord record;
      record.step = result.state.records.size();
      record.trade = *proposal.trade;
      record.nodal_injection = Eigen::MatrixXd::Zero(market.bus_count(), market.scenario_count());
      reject(record, "not epsilon-worthy: welfare change " + std::to_string(w.delta));
      record.binding_after = announcement;
      result.state.records.push_back(std::move(record));
      continue;
    }
    StepResult step = so_step(std::move(result.state), *proposal.trade, config, market, lm);
    result.state = std::move(step.state);
  }
  result.final_welfare = total_utility_market(market, result.state.y);
  return result;
}

TradingState replay(const Market& market, const std::vector<TradeRecord>& records) {
  TradingState state = TradingState::zero(market);
  for (const TradeRecord& r : records) {
    if (!r.accepted) continue;
    for (const auto& [i, v] : r.trade.plans) {
      const Participant& p = market.participants.at(i);
      for (int s = 0; s < market.scenario_count(); ++s) {
        const double inc = r.gamma_for(s) * v[s];
        state.y(static_cast<Eigen::Index>(i), s) += inc;
        state.x(p.bus, s) += inc;
      }
    }
  }
  state.records = records;
  return state;
}

}  // namespace gridtrade
