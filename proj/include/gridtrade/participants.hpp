#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridtrade {

struct ScenarioSet {
  std::vector<double> probabilities;
  std::vector<std::string> names;  // optional labels, empty or one per scenario

  int count() const { return static_cast<int>(probabilities.size()); }
  // Throws DomainError unless every probability is positive and they sum to 1.
  void validate() const;
};

// Concave piecewise-linear utility of an injection p (MW, positive = supply).
// Segment k has slope slopes[k] on [breakpoints[k], breakpoints[k+1]); the
// last segment extends to +infinity, so the domain is [breakpoints[0], inf).
// Values are normalized so that value(0) = 0, which requires 0 in the domain.
class UtilityFunction {
 public:
  UtilityFunction() = default;
  UtilityFunction(std::vector<double> breakpoints, std::vector<double> slopes);

  static UtilityFunction linear(double start, double slope) { return UtilityFunction({start}, {slope}); }

  double value(double p) const;
  // One-sided derivatives (left, right). The first segment is treated as
  // extending below the domain start, so only interior breakpoints are kinks.
  std::pair<double, double> slopes_at(double p, double tol = 1e-9) const;
  bool at_breakpoint(double p, double tol = 1e-9) const;

  double domain_start() const { return breakpoints_.front(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& slopes() const { return slopes_; }
  // True when two consecutive slopes are equal (weakly concave).
  bool degenerate() const;

  // The function as min_k (intercepts[k] + slopes[k] p) on its domain.
  std::vector<double> intercepts() const;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  std::vector<double> values_;  // value at each breakpoint
};

enum class ParticipantKind { producer, load };
enum class Timing { day_ahead, real_time };

std::string to_string(ParticipantKind kind);
std::string to_string(Timing timing);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct Participant {
  std::string id;
  int bus = 0;
  ParticipantKind kind = ParticipantKind::producer;
  Timing timing = Timing::real_time;
  std::vector<Interval> bounds;            // one per scenario
  std::vector<UtilityFunction> utility;    // one per scenario
  std::optional<std::vector<double>> subjective_probabilities;
  // A load marked inelastic is pinned to its lower bound in the oracle form.
  bool inelastic = false;

  bool day_ahead() const { return timing == Timing::day_ahead; }
  // Probability this participant assigns to scenario s.
  double probability(const ScenarioSet& scenarios, int s) const;

  // Throws DomainError describing the first violated invariant.
  void validate(int scenario_count, int bus_count) const;
};

// Expected utility sum_s P_i(s) u_{i,s}(plan_s); subjective probabilities are
// used when present. Throws DomainError if the plan leaves the bounds.
double evaluate_utility(const Participant& participant, const Eigen::VectorXd& plan, const ScenarioSet& scenarios,
                        double tol = 1e-9);

// Same expectation under the market probabilities, ignoring any subjective view.
double evaluate_utility_market(const Participant& participant, const Eigen::VectorXd& plan,
                               const ScenarioSet& scenarios, double tol = 1e-9);

std::pair<double, double> marginal_utility(const Participant& participant, const Eigen::VectorXd& plan, int scenario);

bool local_feasible(const Participant& participant, const Eigen::VectorXd& plan, double tol = 1e-9);

}  // namespace gridtrade
