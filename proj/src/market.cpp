#include "gridtrade/market.hpp"

#include "gridtrade/errors.hpp"

#include <set>

namespace gridtrade {

std::optional<std::size_t> Market::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < participants.size(); ++i)
    if (participants[i].id == id) return i;
  return std::nullopt;
}

bool Market::shared_beliefs() const {
  for (const auto& p : participants)
    if (p.subjective_probabilities) return false;
  return true;
}

void Market::validate() const {
  network.validate();
  scenarios.validate();
  if (!network.scenario_capacities.empty() &&
      static_cast<int>(network.scenario_capacities.size()) != scenarios.count())
    throw StructuralError("scenario capacity overrides need one entry per scenario");
  std::set<std::string> seen;
  for (const auto& p : participants) {
    if (!seen.insert(p.id).second) throw StructuralError("duplicate participant id '" + p.id + "'");
    p.validate(scenarios.count(), network.bus_count);
  }
}

Market oracle_form(const Market& market) {
  Market out = market;
  for (auto& p : out.participants) {
    if (p.kind != ParticipantKind::load || !p.inelastic) continue;
    for (auto& b : p.bounds) b.upper = b.lower;
  }
  return out;
}

Eigen::MatrixXd aggregate_by_bus(const Market& market, const PlanMatrix& plans) {
  if (plans.rows() != market.participant_count())
    throw StructuralError("plan matrix rows differ from participant count");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(market.bus_count(), plans.cols());
  for (int i = 0; i < market.participant_count(); ++i)
    x.row(market.participants[static_cast<std::size_t>(i)].bus) += plans.row(i);
  return x;
}

double total_utility(const Market& market, const PlanMatrix& plans, double tol) {
  double total = 0.0;
  for (int i = 0; i < market.participant_count(); ++i)
    total += evaluate_utility(market.participants[static_cast<std::size_t>(i)], plans.row(i).transpose(),
                              market.scenarios, tol);
  return total;
}

double total_utility_market(const Market& market, const PlanMatrix& plans, double tol) {
  double total = 0.0;
  for (int i = 0; i < market.participant_count(); ++i)
    total += evaluate_utility_market(market.participants[static_cast<std::size_t>(i)], plans.row(i).transpose(),
                                     market.scenarios, tol);
  return total;
}

}  // namespace gridtrade
