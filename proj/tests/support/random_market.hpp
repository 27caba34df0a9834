#pragma once

#include "gridtrade/market.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace gridtrade::testing {

struct RandomMarketOptions {
  int max_buses = 6;
  int max_scenarios = 4;
  int max_participants = 10;
  bool tree = true;
};

// Markets for oracle comparisons. Every slope is a distinct integer so the
// dispatch duals are unique, every participant can sit at zero, and an
// inelastic load always has a local producer large enough to serve it.
inline Market random_market(std::mt19937_64& rng, const RandomMarketOptions& opt) {
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Market m;
  const int n = uniform_int(2, opt.max_buses);
  m.network.bus_count = n;
  m.network.reference_bus = uniform_int(0, n - 1);
  for (int b = 1; b < n; ++b)
    m.network.lines.push_back({uniform_int(0, b - 1), b, 0.5 + 0.25 * uniform_int(0, 6), 5.0 * uniform_int(2, 8)});
  if (!opt.tree) {
    std::set<std::pair<int, int>> used;
    for (const auto& l : m.network.lines) used.insert({std::min(l.from, l.to), std::max(l.from, l.to)});
    const int extra = uniform_int(1, std::max(1, n - 2));
    for (int k = 0; k < extra * 4 && static_cast<int>(used.size()) < n * (n - 1) / 2; ++k) {
      int a = uniform_int(0, n - 1), b = uniform_int(0, n - 1);
      if (a == b || used.count({std::min(a, b), std::max(a, b)})) continue;
      used.insert({std::min(a, b), std::max(a, b)});
      m.network.lines.push_back({a, b, 0.5 + 0.25 * uniform_int(0, 6), 5.0 * uniform_int(2, 8)});
      if (static_cast<int>(m.network.lines.size()) >= n - 1 + extra) break;
    }
  }

  const int s_count = uniform_int(1, opt.max_scenarios);
  std::vector<double> weights;
  for (int s = 0; s < s_count; ++s) weights.push_back(uniform_int(1, 9));
  double total = 0.0;
  for (double w : weights) total += w;
  for (double w : weights) m.scenarios.probabilities.push_back(w / total);
  // Renormalize the last entry so the sum is 1 to the last bit.
  double head = 0.0;
  for (int s = 0; s + 1 < s_count; ++s) head += m.scenarios.probabilities[static_cast<std::size_t>(s)];
  m.scenarios.probabilities.back() = 1.0 - head;

  std::set<int> slopes_used;
  auto fresh_slope = [&](int lo, int hi) {
    for (;;) {
      const int v = uniform_int(lo, hi);
      if (slopes_used.insert(v).second) return static_cast<double>(v);
    }
  };

  const int count = uniform_int(2, opt.max_participants);
  bool inelastic_done = false;
  for (int k = 0; static_cast<int>(m.participants.size()) < count; ++k) {
    Participant p;
    p.id = "P" + std::to_string(k);
    p.bus = uniform_int(0, n - 1);
    const bool producer = k % 2 == 0 || uniform_int(0, 2) == 0;
    if (producer) {
      p.kind = ParticipantKind::producer;
      p.timing = uniform_int(0, 3) == 0 ? Timing::day_ahead : Timing::real_time;
      for (int s = 0; s < s_count; ++s) {
        const double cap = 10.0 * uniform_int(1, 6);
        p.bounds.push_back({0.0, cap});
        // Up to three cost tiers, each segment dearer than the last.
        const int segs = uniform_int(1, 3);
        std::vector<double> bp{0.0}, sl;
        std::vector<double> costs;
        for (int j = 0; j < segs; ++j) costs.push_back(fresh_slope(1, 400));
        std::sort(costs.begin(), costs.end());
        for (int j = 0; j < segs; ++j) {
          sl.push_back(-costs[static_cast<std::size_t>(j)]);
          if (j + 1 < segs) bp.push_back(bp.back() + 5.0 * uniform_int(1, 3));
        }
        p.utility.emplace_back(bp, sl);
        if (p.day_ahead() && s > 0) {
          p.bounds.back() = p.bounds.front();
          p.utility.back() = p.utility.front();
        }
      }
    } else {
      p.kind = ParticipantKind::load;
      p.timing = Timing::real_time;
      const bool room = static_cast<int>(m.participants.size()) + 2 <= count;
      const bool inelastic = room && !inelastic_done && uniform_int(0, 2) == 0;
      for (int s = 0; s < s_count; ++s) {
        const double demand = 5.0 * uniform_int(2, 10);
        p.bounds.push_back({-demand, 0.0});
        if (inelastic) {
          p.utility.push_back(UtilityFunction::linear(-demand, -(1000.0 + k)));
          continue;
        }
        const int segs = uniform_int(1, 3);
        std::vector<double> values;
        for (int j = 0; j < segs; ++j) values.push_back(fresh_slope(1, 400));
        std::sort(values.begin(), values.end());  // low values first: most negative p consumes the least valued MW
        std::vector<double> bp{-demand}, sl;
        for (int j = 0; j < segs; ++j) {
          sl.push_back(-values[static_cast<std::size_t>(j)]);
          if (j + 1 < segs) bp.push_back(std::min(bp.back() + 5.0 * uniform_int(1, 2), -1.0));
        }
        // Drop segments squeezed out by the clamp.
        std::vector<double> b2{bp[0]}, s2{sl[0]};
        for (std::size_t j = 1; j < bp.size(); ++j)
          if (bp[j] > b2.back()) {
            b2.push_back(bp[j]);
            s2.push_back(sl[j]);
          }
        p.utility.emplace_back(b2, s2);
      }
      if (inelastic) {
        p.inelastic = true;
        inelastic_done = true;
        Participant local;
        local.id = "P" + std::to_string(k) + "_local";
        local.bus = p.bus;
        local.kind = ParticipantKind::producer;
        local.timing = Timing::real_time;
        for (int s = 0; s < s_count; ++s) {
          local.bounds.push_back({0.0, -p.bounds[static_cast<std::size_t>(s)].lower + 10.0});
          local.utility.push_back(UtilityFunction::linear(0.0, -fresh_slope(401, 900)));
        }
        m.participants.push_back(p);
        m.participants.push_back(local);
        continue;
      }
    }
    m.participants.push_back(p);
  }
  return m;
}

}  // namespace gridtrade::testing
