#include "gridtrade/participants.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridtrade {

void ScenarioSet::validate() const {
  if (probabilities.empty()) throw DomainError("at least one scenario is required");
  for (double p : probabilities)
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("scenario probabilities must be positive");
  const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("scenario probabilities must sum to 1");
  if (!names.empty() && names.size() != probabilities.size())
    throw DomainError("scenario names must match the probability count");
}

UtilityFunction::UtilityFunction(std::vector<double> breakpoints, std::vector<double> slopes)
    : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)) {
  if (breakpoints_.empty() || breakpoints_.size() != slopes_.size())
    throw DomainError("utility needs one slope per breakpoint");
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
    if (!std::isfinite(breakpoints_[k]) || !std::isfinite(slopes_[k]))
      throw DomainError("utility breakpoints and slopes must be finite");
    if (k > 0 && !(breakpoints_[k] > breakpoints_[k - 1]))
      throw DomainError("utility breakpoints must be strictly increasing");
    if (k > 0 && slopes_[k] > slopes_[k - 1]) throw DomainError("utility slopes must be decreasing (concavity)");
  }
  if (breakpoints_.front() > 0.0) throw DomainError("utility domain must contain 0");

  // Integrate from 0 so value(0) = 0.
  values_.assign(breakpoints_.size(), 0.0);
  std::size_t zero_seg = 0;
  while (zero_seg + 1 < breakpoints_.size() && breakpoints_[zero_seg + 1] <= 0.0) ++zero_seg;
  values_[zero_seg] = -slopes_[zero_seg] * (0.0 - breakpoints_[zero_seg]);
  for (std::size_t k = zero_seg + 1; k < breakpoints_.size(); ++k)
    values_[k] = values_[k - 1] + slopes_[k - 1] * (breakpoints_[k] - breakpoints_[k - 1]);
  for (std::size_t k = zero_seg; k-- > 0;)
    values_[k] = values_[k + 1] - slopes_[k] * (breakpoints_[k + 1] - breakpoints_[k]);
}

double UtilityFunction::value(double p) const {
  if (p < breakpoints_.front() - 1e-9) throw DomainError("injection below utility domain");
  std::size_t k = breakpoints_.size() - 1;
  while (k > 0 && p < breakpoints_[k]) --k;
  return values_[k] + slopes_[k] * (p - breakpoints_[k]);
}

std::pair<double, double> UtilityFunction::slopes_at(double p, double tol) const {
  std::size_t k = breakpoints_.size() - 1;
  while (k > 0 && p < breakpoints_[k] - tol) --k;
  const double right = slopes_[k];
  if (std::abs(p - breakpoints_[k]) <= tol) {
    const double left = k == 0 ? slopes_[0] : slopes_[k - 1];
    return {left, right};
  }
  return {right, right};
}

bool UtilityFunction::at_breakpoint(double p, double tol) const {
  return std::any_of(breakpoints_.begin() + 1, breakpoints_.end(),
                     [&](double b) { return std::abs(p - b) <= tol; });
}

bool UtilityFunction::degenerate() const {
  for (std::size_t k = 1; k < slopes_.size(); ++k)
    if (slopes_[k] == slopes_[k - 1]) return true;
  return false;
}

std::vector<double> UtilityFunction::intercepts() const {
  std::vector<double> out(breakpoints_.size());
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) out[k] = values_[k] - slopes_[k] * breakpoints_[k];
  return out;
}

std::string to_string(ParticipantKind kind) { return kind == ParticipantKind::producer ? "producer" : "load"; }
std::string to_string(Timing timing) { return timing == Timing::day_ahead ? "DA" : "RT"; }

double Participant::probability(const ScenarioSet& scenarios, int s) const {
  if (subjective_probabilities) return (*subjective_probabilities)[static_cast<std::size_t>(s)];
  return scenarios.probabilities[static_cast<std::size_t>(s)];
}

void Participant::validate(int scenario_count, int bus_count) const {
  const std::string tag = "participant '" + id + "': ";
  if (id.empty()) throw DomainError("participant id must be nonempty");
  if (bus < 0 || bus >= bus_count) throw DomainError(tag + "bus out of range");
  if (static_cast<int>(bounds.size()) != scenario_count) throw DomainError(tag + "needs one bound per scenario");
  if (static_cast<int>(utility.size()) != scenario_count) throw DomainError(tag + "needs one utility per scenario");
  for (int s = 0; s < scenario_count; ++s) {
    const Interval& b = bounds[static_cast<std::size_t>(s)];
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower > b.upper)
      throw DomainError(tag + "bounds must be finite with lower <= upper");
    if (kind == ParticipantKind::producer && b.lower < 0.0) throw DomainError(tag + "producer bounds must be >= 0");
    if (kind == ParticipantKind::load && b.upper > 0.0) throw DomainError(tag + "load bounds must be <= 0");
    if (utility[static_cast<std::size_t>(s)].domain_start() > b.lower + 1e-12)
      throw DomainError(tag + "utility domain does not cover the bounds");
  }
  if (day_ahead()) {
    for (int s = 1; s < scenario_count; ++s) {
      if (bounds[static_cast<std::size_t>(s)].lower != bounds[0].lower ||
          bounds[static_cast<std::size_t>(s)].upper != bounds[0].upper)
        throw DomainError(tag + "day-ahead participants need identical bounds in every scenario");
    }
  }
  if (subjective_probabilities) {
    ScenarioSet own{*subjective_probabilities, {}};
    if (own.count() != scenario_count) throw DomainError(tag + "subjective probabilities need one entry per scenario");
    own.validate();
  }
}

namespace {

double expectation(const Participant& participant, const Eigen::VectorXd& plan, const ScenarioSet& scenarios,
                   double tol, bool subjective) {
  if (plan.size() != scenarios.count()) throw DomainError("plan length differs from scenario count");
  double total = 0.0;
  for (int s = 0; s < scenarios.count(); ++s) {
    const Interval& b = participant.bounds[static_cast<std::size_t>(s)];
    const double p = plan[s];
    if (p < b.lower - tol || p > b.upper + tol)
      throw DomainError("participant '" + participant.id + "': plan outside bounds in scenario " + std::to_string(s));
    const double prob =
        subjective ? participant.probability(scenarios, s) : scenarios.probabilities[static_cast<std::size_t>(s)];
    total += prob * participant.utility[static_cast<std::size_t>(s)].value(p);
  }
  return total;
}

}  // namespace

double evaluate_utility(const Participant& participant, const Eigen::VectorXd& plan, const ScenarioSet& scenarios,
                        double tol) {
  return expectation(participant, plan, scenarios, tol, true);
}

double evaluate_utility_market(const Participant& participant, const Eigen::VectorXd& plan,
                               const ScenarioSet& scenarios, double tol) {
  return expectation(participant, plan, scenarios, tol, false);
}

std::pair<double, double> marginal_utility(const Participant& participant, const Eigen::VectorXd& plan, int scenario) {
  return participant.utility.at(static_cast<std::size_t>(scenario)).slopes_at(plan[scenario]);
}

bool local_feasible(const Participant& participant, const Eigen::VectorXd& plan, double tol) {
  if (plan.size() != static_cast<Eigen::Index>(participant.bounds.size())) return false;
  for (Eigen::Index s = 0; s < plan.size(); ++s) {
    const Interval& b = participant.bounds[static_cast<std::size_t>(s)];
    if (!std::isfinite(plan[s]) || plan[s] < b.lower - tol || plan[s] > b.upper + tol) return false;
  }
  if (participant.day_ahead() && plan.size() > 0) {
    for (Eigen::Index s = 1; s < plan.size(); ++s)
      if (std::abs(plan[s] - plan[0]) > tol) return false;
  }
  return true;
}

}  // namespace gridtrade
