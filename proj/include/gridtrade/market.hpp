#pragma once

#include "gridtrade/network.hpp"
#include "gridtrade/participants.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace gridtrade {

struct Market {
  Network network;
  ScenarioSet scenarios;
  std::vector<Participant> participants;

  int scenario_count() const { return scenarios.count(); }
  int participant_count() const { return static_cast<int>(participants.size()); }
  int bus_count() const { return network.bus_count; }

  std::optional<std::size_t> index_of(const std::string& id) const;
  // True when nobody overrides the market probabilities.
  bool shared_beliefs() const;

  // Validates network, scenarios and every participant, plus id uniqueness
  // and the per-scenario capacity override count.
  void validate() const;
};

// Copy of the market in which inelastic loads are pinned to their lower
// bound, i.e. the form used by the centralized dispatch benchmark.
Market oracle_form(const Market& market);

// Participant plans as rows of an I x S matrix.
using PlanMatrix = Eigen::MatrixXd;

// x_{n,s} = sum over participants at bus n of plans_{i,s}.
Eigen::MatrixXd aggregate_by_bus(const Market& market, const PlanMatrix& plans);

// Sum of evaluate_utility over all participants (subjective where given).
double total_utility(const Market& market, const PlanMatrix& plans, double tol = 1e-9);
// Sum of expected utility under the market probabilities.
double total_utility_market(const Market& market, const PlanMatrix& plans, double tol = 1e-9);

}  // namespace gridtrade
