#pragma once

#include "gridtrade/market.hpp"
#include "gridtrade/network.hpp"
#include "gridtrade/trading.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gridtrade {

enum class ProposerMode { full_group, exhaustive_subsets, random_subsets };

std::string to_string(ProposerMode mode);
ProposerMode parse_proposer_mode(const std::string& text);

struct ProposerStrategy {
  ProposerMode mode = ProposerMode::full_group;
  int max_size = 2;
  int attempts = 1;  // random groups tried before falling back to the full group
  std::uint64_t seed = 0;

  void validate() const;
};

// Produces trading groups according to a strategy. Exhaustive mode walks all
// subsets of size 2..max_size in lexicographic order across successive calls
// and wraps around; random mode draws a size uniformly from 2..max_size and
// then a uniform subset of that size.
class GroupSampler {
 public:
  GroupSampler(ProposerStrategy strategy, std::size_t participant_count);

  std::vector<std::size_t> next(std::mt19937_64& rng);
  // Number of distinct groups the exhaustive walk visits before repeating.
  std::size_t cycle_length() const;

 private:
  bool advance();

  ProposerStrategy strategy_;
  std::size_t count_;
  std::vector<std::size_t> current_;
};

struct SearchResult {
  std::optional<Trade> trade;
  double improvement = 0.0;  // optimal group welfare gain of the search LP
};

// Solves the group's best feasible-direction trade: maximize the group's
// expected utility gain subject to per-scenario balance, h_l' dq_s <= 0 on
// every announced row, accumulated bounds and non-anticipation. Returns the
// trade when the optimum reaches epsilon.
SearchResult find_worthy_fd_trade(const std::vector<std::size_t>& group, const TradingState& state,
                                  const Announcement& announcement, double epsilon, const Market& market,
                                  const LoadingMatrix& lm);

// Proposer driven by LP trade search. Sampled groups are tried first; when
// none of them finds an epsilon-worthy trade, one full-group search either
// supplies a trade or certifies termination.
class LpProposer : public Proposer {
 public:
  LpProposer(const Market& market, ProposerStrategy strategy);

  Proposal propose(const TradingState& state, const Announcement& announcement, double epsilon) override;

 private:
  const Market& market_;
  LoadingMatrix lm_;
  ProposerStrategy strategy_;
  GroupSampler sampler_;
  std::mt19937_64 rng_;
};

}  // namespace gridtrade
