#include "gridtrade/proposer.hpp"

#include "gridtrade/errors.hpp"
#include "gridtrade/lp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridtrade {

std::string to_string(ProposerMode mode) {
  switch (mode) {
    case ProposerMode::full_group: return "full";
    case ProposerMode::exhaustive_subsets: return "exhaustive";
    case ProposerMode::random_subsets: return "random";
  }
  return "full";
}

ProposerMode parse_proposer_mode(const std::string& text) {
  if (text == "full" || text == "full_group") return ProposerMode::full_group;
  if (text == "exhaustive" || text == "exhaustive_subsets") return ProposerMode::exhaustive_subsets;
  if (text == "random" || text == "random_subsets") return ProposerMode::random_subsets;
  throw InputError("unknown proposer mode '" + text + "' (expected full, exhaustive or random)");
}

void ProposerStrategy::validate() const {
  if (max_size < 2) throw DomainError("proposer max_size must be at least 2");
  if (attempts < 1) throw DomainError("proposer attempts must be at least 1");
}

GroupSampler::GroupSampler(ProposerStrategy strategy, std::size_t participant_count)
    : strategy_(strategy), count_(participant_count) {
  strategy_.validate();
  if (count_ < 2) throw PreconditionError("trading needs at least two participants");
}

std::size_t GroupSampler::cycle_length() const {
  const std::size_t top = std::min(count_, static_cast<std::size_t>(strategy_.max_size));
  std::size_t total = 0;
  for (std::size_t k = 2; k <= top; ++k) {
    // C(count, k) by the multiplicative formula; exact for desk-scale counts.
    std::size_t c = 1;
    for (std::size_t j = 1; j <= k; ++j) c = c * (count_ - k + j) / j;
    total += c;
  }
  return total;
}

bool GroupSampler::advance() {
  const std::size_t k = current_.size();
  for (std::size_t pos = k; pos-- > 0;) {
    if (current_[pos] < count_ - k + pos) {
      ++current_[pos];
      for (std::size_t j = pos + 1; j < k; ++j) current_[j] = current_[j - 1] + 1;
      return true;
    }
  }
  return false;
}

std::vector<std::size_t> GroupSampler::next(std::mt19937_64& rng) {
  const std::size_t top = std::min(count_, static_cast<std::size_t>(strategy_.max_size));
  switch (strategy_.mode) {
    case ProposerMode::full_group: {
      std::vector<std::size_t> all(count_);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    case ProposerMode::exhaustive_subsets: {
      if (current_.empty() || !advance()) {
        const std::size_t size = current_.empty() || current_.size() >= top ? 2 : current_.size() + 1;
        current_.resize(size);
        std::iota(current_.begin(), current_.end(), 0);
      }
      return current_;
    }
    case ProposerMode::random_subsets: {
      std::uniform_int_distribution<std::size_t> size_dist(2, top);
      const std::size_t size = size_dist(rng);
      std::vector<std::size_t> pool(count_);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t j = 0; j < size; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, count_ - 1);
        std::swap(pool[j], pool[pick(rng)]);
      }
      pool.resize(size);
      std::sort(pool.begin(), pool.end());
      return pool;
    }
  }
  return {};
}

SearchResult find_worthy_fd_trade(const std::vector<std::size_t>& group, const TradingState& state,
                                  const Announcement& announcement, double epsilon, const Market& market,
                                  const LoadingMatrix& lm) {
  const int s_count = market.scenario_count();
  lp::ProgramBuilder builder(lp::Sense::maximize);

  // delta[g][s] is the increment of group member g in scenario s.
  std::vector<std::vector<int>> delta(group.size(), std::vector<int>(static_cast<std::size_t>(s_count)));
  double baseline = 0.0;  // current utility of members modelled by epigraph variables

  for (std::size_t g = 0; g < group.size(); ++g) {
    const std::size_t i = group[g];
    const Participant& p = market.participants.at(i);
    for (int s = 0; s < s_count; ++s) {
      const double y = state.y(static_cast<Eigen::Index>(i), s);
      const Interval& b = p.bounds[static_cast<std::size_t>(s)];
      const double prob = p.probability(market.scenarios, s);
      const UtilityFunction& u = p.utility[static_cast<std::size_t>(s)];
      const int d = builder.add_variable(std::min(b.lower - y, 0.0), std::max(b.upper - y, 0.0));
      delta[g][static_cast<std::size_t>(s)] = d;
      if (u.slopes().size() == 1) {
        builder.set_cost(d, prob * u.slopes().front());
        continue;
      }
      // Epigraph: t <= a_k + m_k (y + d) for every segment k.
      const int t = builder.add_variable(-lp::kInfinity, lp::kInfinity, prob);
      const auto intercepts = u.intercepts();
      for (std::size_t k = 0; k < intercepts.size(); ++k) {
        const double m = u.slopes()[k];
        builder.add_inequality({{t, 1.0}, {d, -m}}, intercepts[k] + m * y);
      }
      baseline += prob * u.value(y);
    }
    if (p.day_ahead()) {
      const double y0 = state.y(static_cast<Eigen::Index>(i), 0);
      for (int s = 1; s < s_count; ++s) {
        const double ys = state.y(static_cast<Eigen::Index>(i), s);
        builder.add_equality({{delta[g][static_cast<std::size_t>(s)], 1.0}, {delta[g][0], -1.0}}, y0 - ys);
      }
    }
  }

  for (int s = 0; s < s_count; ++s) {
    lp::ProgramBuilder::Terms balance;
    for (std::size_t g = 0; g < group.size(); ++g) balance.emplace_back(delta[g][static_cast<std::size_t>(s)], 1.0);
    builder.add_equality(balance, 0.0);

    if (static_cast<std::size_t>(s) >= announcement.size()) continue;
    for (int row : announcement[static_cast<std::size_t>(s)]) {
      lp::ProgramBuilder::Terms fd;
      for (std::size_t g = 0; g < group.size(); ++g) {
        const double h = lm.rows(row, market.participants[group[g]].bus);
        if (std::abs(h) > 1e-14) fd.emplace_back(delta[g][static_cast<std::size_t>(s)], h);
      }
      if (!fd.empty()) builder.add_inequality(fd, 0.0);
    }
  }

  const lp::LinearProgram program = builder.build();
  const lp::LpSolution solution = lp::solve(program);
  if (!solution.optimal())
    throw NumericalError("trade search LP ended with status " + lp::to_string(solution.status));

  SearchResult result;
  result.improvement = solution.objective - baseline;
  if (result.improvement < epsilon) return result;

  Trade trade;
  for (std::size_t g = 0; g < group.size(); ++g) {
    Eigen::VectorXd v(s_count);
    for (int s = 0; s < s_count; ++s) {
      const double value = solution.primal[delta[g][static_cast<std::size_t>(s)]];
      v[s] = std::abs(value) < 1e-12 ? 0.0 : value;
    }
    if ((v.array() != 0.0).any()) trade.plans.emplace(group[g], v);
  }
  if (trade.is_zero()) return result;
  if (!is_worthy(trade, state, epsilon, market).worthy) return result;
  result.trade = std::move(trade);
  return result;
}

LpProposer::LpProposer(const Market& market, ProposerStrategy strategy)
    : market_(market),
      lm_(build_loading_matrix(market.network)),
      strategy_(strategy),
      sampler_(strategy, market.participants.size()),
      rng_(strategy.seed) {}

Proposal LpProposer::propose(const TradingState& state, const Announcement& announcement, double epsilon) {
  Proposal proposal;
  if (strategy_.mode != ProposerMode::full_group) {
    const std::size_t tries = strategy_.mode == ProposerMode::exhaustive_subsets
                                  ? sampler_.cycle_length()
                                  : static_cast<std::size_t>(strategy_.attempts);
    for (std::size_t k = 0; k < tries; ++k) {
      auto group = sampler_.next(rng_);
      SearchResult r = find_worthy_fd_trade(group, state, announcement, epsilon, market_, lm_);
      if (r.trade) {
        proposal.trade = std::move(r.trade);
        proposal.improvement = r.improvement;
        proposal.group = std::move(group);
        return proposal;
      }
    }
  }
  std::vector<std::size_t> everyone(market_.participants.size());
  std::iota(everyone.begin(), everyone.end(), 0);
  SearchResult r = find_worthy_fd_trade(everyone, state, announcement, epsilon, market_, lm_);
  proposal.improvement = r.improvement;
  proposal.group = everyone;
  if (r.trade) {
    proposal.trade = std::move(r.trade);
  } else {
    proposal.certified_none = true;
  }
  return proposal;
}

}  // namespace gridtrade
