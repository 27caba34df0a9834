#include "gridtrade/tree.hpp"

#include "gridtrade/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <string>

namespace gridtrade {

Rational to_rational(double value) {
  if (!std::isfinite(value)) throw DomainError("cannot convert a non-finite value to a rational");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", value);
  // mantissa "d.dddddddddddd" and a decimal exponent
  std::string text(buf);
  const auto e = text.find('e');
  std::string mantissa = text.substr(0, e);
  const int exponent = std::stoi(text.substr(e + 1));
  bool negative = false;
  if (mantissa[0] == '-') {
    negative = true;
    mantissa.erase(0, 1);
  }
  mantissa.erase(mantissa.find('.'), 1);
  boost::multiprecision::cpp_int digits(mantissa);
  const int scale = exponent - 12;
  boost::multiprecision::cpp_int power = 1;
  for (int k = 0; k < std::abs(scale); ++k) power *= 10;
  Rational r = scale >= 0 ? Rational(digits * power) : Rational(digits, power);
  return negative ? Rational(-r) : r;
}

double to_double(const Rational& value) { return value.convert_to<double>(); }

RationalVector to_rational(const std::vector<double>& values) {
  RationalVector out;
  out.reserve(values.size());
  for (double v : values) out.push_back(to_rational(v));
  return out;
}

RationalVector BilateralTrade::nodal(int bus_count) const {
  RationalVector out(static_cast<std::size_t>(bus_count));
  out[static_cast<std::size_t>(supply)] += quantity;
  out[static_cast<std::size_t>(demand)] -= quantity;
  return out;
}

TreeIndex::TreeIndex(const Network& network) : network_(network) {
  network.validate();
  if (!network.is_tree()) throw UnsupportedError("tree decompositions need a radial network");
  const auto n = static_cast<std::size_t>(network.bus_count);
  std::vector<std::vector<std::pair<int, int>>> adjacent(n);
  for (int e = 0; e < network.line_count(); ++e) {
    const Line& l = network.lines[static_cast<std::size_t>(e)];
    adjacent[static_cast<std::size_t>(l.from)].emplace_back(l.to, e);
    adjacent[static_cast<std::size_t>(l.to)].emplace_back(l.from, e);
  }
  parent_.assign(n, -1);
  parent_line_.assign(n, -1);
  depth_.assign(n, -1);
  std::deque<int> queue{network.reference_bus};
  depth_[static_cast<std::size_t>(network.reference_bus)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    order_.push_back(u);
    for (const auto& [v, e] : adjacent[static_cast<std::size_t>(u)]) {
      if (depth_[static_cast<std::size_t>(v)] >= 0) continue;
      depth_[static_cast<std::size_t>(v)] = depth_[static_cast<std::size_t>(u)] + 1;
      parent_[static_cast<std::size_t>(v)] = u;
      parent_line_[static_cast<std::size_t>(v)] = e;
      queue.push_back(v);
    }
  }
}

std::vector<std::pair<int, int>> TreeIndex::path(int u, int v) const {
  std::vector<std::pair<int, int>> up;
  std::vector<std::pair<int, int>> down;
  auto step_sign = [&](int from_bus, int line) {
    return network_.lines[static_cast<std::size_t>(line)].from == from_bus ? 1 : -1;
  };
  while (u != v) {
    if (depth_[static_cast<std::size_t>(u)] >= depth_[static_cast<std::size_t>(v)]) {
      const int e = parent_line_[static_cast<std::size_t>(u)];
      up.emplace_back(e, step_sign(u, e));
      u = parent_[static_cast<std::size_t>(u)];
    } else {
      const int e = parent_line_[static_cast<std::size_t>(v)];
      const int p = parent_[static_cast<std::size_t>(v)];
      down.emplace_back(e, step_sign(p, e));
      v = p;
    }
  }
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

RationalVector TreeIndex::line_flows(const RationalVector& injection) const {
  RationalVector subtree = injection;
  RationalVector flows(static_cast<std::size_t>(network_.line_count()));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int u = *it;
    const int p = parent_[static_cast<std::size_t>(u)];
    if (p < 0) continue;
    const int e = parent_line_[static_cast<std::size_t>(u)];
    const Rational& s = subtree[static_cast<std::size_t>(u)];
    flows[static_cast<std::size_t>(e)] = network_.lines[static_cast<std::size_t>(e)].from == u ? s : Rational(-s);
    subtree[static_cast<std::size_t>(p)] += s;
  }
  return flows;
}

namespace {

void check_vector(const TreeIndex& tree, const RationalVector& v, const char* what) {
  if (static_cast<int>(v.size()) != tree.network().bus_count)
    throw StructuralError(std::string(what) + " needs one entry per bus");
  Rational sum = 0;
  for (const auto& a : v) sum += a;
  if (sum != 0) throw PreconditionError(std::string(what) + " is not balanced");
}

void check_inputs(const TreeIndex& tree, const RationalVector& trade, const RationalVector& x) {
  check_vector(tree, trade, "trade");
  check_vector(tree, x, "accumulated state");
  const RationalVector zero(trade.size());
  if (!tree_feasible(tree, x, zero)) throw PreconditionError("accumulated state violates a line limit");
  if (!tree_feasible(tree, x, trade)) throw PreconditionError("trade is infeasible at the accumulated state");
}

// Greedy pair augmentation. headroom(line, sign) gives the residual capacity
// for traversing the line in that direction; consume(...) records usage.
template <class Headroom, class Consume>
std::vector<BilateralTrade> augment_pairs(const TreeIndex& tree, const RationalVector& trade, Headroom headroom,
                                          Consume consume) {
  RationalVector left = trade;
  std::vector<int> supplies, demands;
  for (std::size_t n = 0; n < trade.size(); ++n) {
    if (trade[n] > 0) supplies.push_back(static_cast<int>(n));
    if (trade[n] < 0) demands.push_back(static_cast<int>(n));
  }
  std::vector<BilateralTrade> out;
  bool progress = true;
  while (progress) {
    progress = false;
    for (int u : supplies) {
      for (int v : demands) {
        Rational amount = std::min<Rational>(left[static_cast<std::size_t>(u)], -left[static_cast<std::size_t>(v)]);
        if (amount <= 0) continue;
        const auto path = tree.path(u, v);
        for (const auto& [e, sign] : path) amount = std::min(amount, headroom(e, sign));
        if (amount <= 0) continue;
        for (const auto& [e, sign] : path) consume(e, sign, amount);
        left[static_cast<std::size_t>(u)] -= amount;
        left[static_cast<std::size_t>(v)] += amount;
        if (!out.empty() && out.back().supply == u && out.back().demand == v)
          out.back().quantity += amount;
        else
          out.push_back({u, v, amount});
        progress = true;
      }
    }
  }
  for (const auto& r : left)
    if (r != 0) throw NumericalError("tree decomposition stalled before exhausting the trade");
  return out;
}

}  // namespace

FlowGraph build_flow_graph(const Network& network, const RationalVector& trade, const RationalVector& x) {
  const TreeIndex tree(network);
  check_inputs(tree, trade, x);
  const RationalVector fx = tree.line_flows(x);
  FlowGraph g;
  g.bus_count = network.bus_count;
  for (int e = 0; e < network.line_count(); ++e) {
    const Line& l = network.lines[static_cast<std::size_t>(e)];
    const Rational cap = to_rational(l.capacity);
    g.edges.push_back({l.from, l.to, cap - fx[static_cast<std::size_t>(e)], e});
    g.edges.push_back({l.to, l.from, cap + fx[static_cast<std::size_t>(e)], e});
  }
  for (int n = 0; n < network.bus_count; ++n) {
    const Rational& p = trade[static_cast<std::size_t>(n)];
    if (p > 0) g.edges.push_back({g.source(), n, p, -1});
    if (p < 0) g.edges.push_back({n, g.sink(), -p, -1});
  }
  return g;
}

bool tree_feasible(const TreeIndex& tree, const RationalVector& x, const RationalVector& trade) {
  RationalVector total = x;
  for (std::size_t n = 0; n < total.size(); ++n) total[n] += trade[n];
  const RationalVector flows = tree.line_flows(total);
  for (std::size_t e = 0; e < flows.size(); ++e) {
    const Rational cap = to_rational(tree.network().lines[e].capacity);
    if (flows[e] > cap || flows[e] < -cap) return false;
  }
  return true;
}

std::vector<BilateralTrade> decompose_sequential(const Network& network, const RationalVector& trade,
                                                 const RationalVector& x) {
  const FlowGraph graph = build_flow_graph(network, trade, x);
  const TreeIndex tree(network);
  // residual[e] = {forward, backward} headroom, taken from the line edges of the graph
  std::vector<std::pair<Rational, Rational>> residual(static_cast<std::size_t>(network.line_count()));
  for (const auto& edge : graph.edges) {
    if (edge.line < 0) continue;
    auto& r = residual[static_cast<std::size_t>(edge.line)];
    (edge.from == network.lines[static_cast<std::size_t>(edge.line)].from ? r.first : r.second) = edge.capacity;
  }
  return augment_pairs(
      tree, trade,
      [&](int e, int sign) { return sign > 0 ? residual[static_cast<std::size_t>(e)].first : residual[static_cast<std::size_t>(e)].second; },
      [&](int e, int sign, const Rational& amount) {
        auto& r = residual[static_cast<std::size_t>(e)];
        if (sign > 0) {
          r.first -= amount;
          r.second += amount;
        } else {
          r.second -= amount;
          r.first += amount;
        }
      });
}

std::vector<BilateralTrade> decompose_conformal(const Network& network, const RationalVector& trade,
                                                const RationalVector& x) {
  const TreeIndex tree(network);
  check_inputs(tree, trade, x);
  RationalVector remaining = tree.line_flows(trade);
  return augment_pairs(
      tree, trade,
      [&](int e, int sign) {
        const Rational& f = remaining[static_cast<std::size_t>(e)];
        return sign > 0 ? std::max<Rational>(f, 0) : std::max<Rational>(-f, 0);
      },
      [&](int e, int sign, const Rational& amount) {
        remaining[static_cast<std::size_t>(e)] -= sign > 0 ? amount : Rational(-amount);
      });
}

Rational bilateral_profit(const BilateralTrade& trade, const RationalVector& alpha) {
  return (alpha.at(static_cast<std::size_t>(trade.supply)) - alpha.at(static_cast<std::size_t>(trade.demand))) *
         trade.quantity;
}

Rational linear_profit(const RationalVector& trade, const RationalVector& alpha) {
  if (trade.size() != alpha.size()) throw StructuralError("alpha needs one entry per bus");
  Rational total = 0;
  for (std::size_t n = 0; n < trade.size(); ++n) total += alpha[n] * trade[n];
  return total;
}

ProfitableDecomposition decompose_profitable(const Network& network, const RationalVector& trade,
                                             const RationalVector& alpha, const RationalVector& x) {
  if (static_cast<int>(alpha.size()) != network.bus_count) throw StructuralError("alpha needs one entry per bus");
  ProfitableDecomposition out;
  out.components = decompose_conformal(network, trade, x);
  out.original_profit = linear_profit(trade, alpha);
  out.curtailed_trade = trade;
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    out.profits.push_back(bilateral_profit(out.components[k], alpha));
    if (out.profits.back() > 0) continue;
    out.redundant = true;
    out.dropped.push_back(k);
    const RationalVector nodal = out.components[k].nodal(network.bus_count);
    for (std::size_t n = 0; n < nodal.size(); ++n) out.curtailed_trade[n] -= nodal[n];
  }
  out.curtailed_profit = linear_profit(out.curtailed_trade, alpha);
  return out;
}

std::vector<SplitCopy> split_nonlinear(const Market& market, const PlanMatrix& y, const Trade& trade, int copies) {
  if (copies < 1) throw DomainError("split needs at least one copy");
  const int s_count = market.scenario_count();
  const PlanMatrix full = trade.dense(market.participant_count(), s_count);
  const PlanMatrix piece = full / static_cast<double>(copies);
  const double u0 = total_utility(market, y);

  std::vector<SplitCopy> out;
  for (int m = 1; m <= copies; ++m) {
    SplitCopy c;
    c.trade = trade.scaled(1.0 / copies);
    const PlanMatrix base = y + full * (static_cast<double>(m - 1) / copies);
    const PlanMatrix next = y + full * (static_cast<double>(m) / copies);
    c.standalone_delta = total_utility(market, y + piece) - u0;
    c.incremental_delta = total_utility(market, next) - total_utility(market, base);
    c.marginals = PlanMatrix::Zero(market.participant_count(), s_count);
    for (const auto& [i, v] : trade.plans) {
      const Participant& p = market.participants.at(i);
      for (int s = 0; s < s_count; ++s) {
        const auto [left, right] = p.utility[static_cast<std::size_t>(s)].slopes_at(base(static_cast<Eigen::Index>(i), s));
        const double slope = v[s] < 0 ? left : right;
        c.marginals(static_cast<Eigen::Index>(i), s) = slope;
        c.linearized_profit += p.probability(market.scenarios, s) * slope * v[s] / copies;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace gridtrade
