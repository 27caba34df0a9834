#pragma once

#include "gridtrade/market.hpp"
#include "gridtrade/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gridtrade {

// A contingent multilateral trade: participant index -> S-vector of
// injection increments (MW). Participants absent from the map trade zero.
struct Trade {
  std::map<std::size_t, Eigen::VectorXd> plans;

  // Participants with at least one nonzero entry, ascending.
  std::vector<std::size_t> group() const;
  bool is_zero() const { return group().empty(); }
  // Dense I x S form.
  PlanMatrix dense(int participant_count, int scenario_count) const;
  Trade scaled(double factor) const;
};

struct TradeRecord {
  std::size_t step = 0;
  Trade trade;
  double gamma = 0.0;
  std::vector<double> scenario_gammas;  // filled only for scenario-dependent curtailment
  bool accepted = false;
  std::vector<std::string> reasons;
  Eigen::MatrixXd nodal_injection;      // q, N x S, before curtailment
  double welfare_delta = 0.0;           // realized, under market probabilities
  std::vector<std::vector<int>> binding_after;

  // gamma actually applied in scenario s.
  double gamma_for(int scenario) const;
};

struct TradingState {
  PlanMatrix y;        // accumulated participant plans, I x S
  Eigen::MatrixXd x;   // accumulated network injections, N x S
  std::vector<TradeRecord> records;

  static TradingState zero(const Market& market);
};

enum class CurtailmentMode { uniform, hybrid };

std::string to_string(CurtailmentMode mode);

struct EngineConfig {
  double epsilon = 1e-3;  // $; a trade must raise group welfare by at least this
  CurtailmentMode curtailment = CurtailmentMode::uniform;
  std::size_t max_steps = 1000;
  double binding_tol = kBindingTol;
  double balance_tol = kBalanceTol;
  double local_tol = 1e-9;
  std::uint64_t seed = 0;

  void validate() const;
};

// Binding loading-vector rows per scenario.
using Announcement = std::vector<std::vector<int>>;

Eigen::MatrixXd nodal_injection(const Trade& trade, const Market& market);

struct TradeViolation {
  std::string kind;  // "balance", "bounds", "non_anticipation", "empty", "shape"
  std::optional<std::string> participant;
  std::optional<int> scenario;
  std::string message;
};

std::vector<TradeViolation> validate_trade(const Trade& trade, const TradingState& state, const Market& market,
                                           double balance_tol = kBalanceTol, double local_tol = 1e-9);

struct Worthiness {
  double delta = 0.0;         // group welfare change, each participant's own beliefs
  double market_delta = 0.0;  // same change under the market probabilities
  bool worthy = false;        // delta >= epsilon
};

Worthiness is_worthy(const Trade& trade, const TradingState& state, double epsilon, const Market& market);

Announcement announce(const TradingState& state, const LoadingMatrix& lm, double binding_tol = kBindingTol);

struct StepResult {
  TradeRecord record;
  TradingState state;
};

// Verifies, curtails and applies one trade. Invalid or non-feasible-direction
// trades yield a rejected record and leave the plans untouched.
StepResult so_step(TradingState state, const Trade& trade, const EngineConfig& config, const Market& market,
                   const LoadingMatrix& lm);

struct Proposal {
  std::optional<Trade> trade;
  bool certified_none = false;   // full-group search proved no epsilon-worthy FD trade exists
  double improvement = 0.0;      // optimum of the search that produced this proposal
  std::vector<std::size_t> group;
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual Proposal propose(const TradingState& state, const Announcement& announcement, double epsilon) = 0;
};

struct RunResult {
  TradingState state;
  bool converged = false;
  double final_welfare = 0.0;          // market probabilities
  double certified_improvement = 0.0;  // bound from the terminating search
  std::size_t rounds = 0;              // proposer invocations
};

// Runs announce -> propose -> verify/curtail -> update from the zero state
// until the proposer certifies termination or max_steps rounds elapse.
RunResult run_trading(const Market& market, const EngineConfig& config, Proposer& proposer);

// Recomputes y and x from scratch by summing gamma-scaled records.
TradingState replay(const Market& market, const std::vector<TradeRecord>& records);

}  // namespace gridtrade
