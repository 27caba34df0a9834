#pragma once

#include "gridtrade/market.hpp"
#include "gridtrade/network.hpp"
#include "gridtrade/trading.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <utility>
#include <vector>

namespace gridtrade {

// Decompositions on radial networks. Everything in here is exact: a single
// scenario, nodal vectors of length N, arithmetic in rationals.
using Rational = boost::multiprecision::cpp_rational;
using RationalVector = std::vector<Rational>;

// Exact rational for the decimal printed with 12 significant digits, so that
// 0.1 becomes 1/10 rather than the nearest binary fraction.
Rational to_rational(double value);
double to_double(const Rational& value);
RationalVector to_rational(const std::vector<double>& values);

struct BilateralTrade {
  int supply = 0;   // bus injecting +quantity
  int demand = 0;   // bus injecting -quantity
  Rational quantity;

  RationalVector nodal(int bus_count) const;
};

// Capacitated digraph: buses 0..N-1, source N, sink N+1. Each line appears in
// both directions with its residual headroom at the accumulated state x.
struct FlowGraph {
  struct Edge {
    int from = 0;
    int to = 0;
    Rational capacity;
    int line = -1;  // network line, -1 for source/sink edges
  };
  int bus_count = 0;
  std::vector<Edge> edges;

  int source() const { return bus_count; }
  int sink() const { return bus_count + 1; }
};

// Rooted view of a tree network used for exact flow computations.
class TreeIndex {
 public:
  explicit TreeIndex(const Network& network);

  // Lines on the unique path u -> v, each with +1 when the path traverses the
  // line from -> to and -1 otherwise.
  std::vector<std::pair<int, int>> path(int u, int v) const;
  // Flow on every line in its from -> to direction induced by a balanced injection.
  RationalVector line_flows(const RationalVector& injection) const;
  const Network& network() const { return network_; }

 private:
  Network network_;
  std::vector<int> parent_;       // parent bus, -1 at the root
  std::vector<int> parent_line_;  // line to the parent
  std::vector<int> depth_;
  std::vector<int> order_;        // BFS order from the root
};

FlowGraph build_flow_graph(const Network& network, const RationalVector& trade, const RationalVector& x);

// |flow(x + trade)| <= capacity on every line.
bool tree_feasible(const TreeIndex& tree, const RationalVector& x, const RationalVector& trade);

// Augmenting-path decomposition on the residual graph; pairs are tried in
// lexicographic (supply, demand) order. Every prefix sum is feasible at x.
std::vector<BilateralTrade> decompose_sequential(const Network& network, const RationalVector& trade,
                                                 const RationalVector& x);

// Components whose flows never oppose the trade's own flow on any line, so
// every ordering of every subset is feasible at x.
std::vector<BilateralTrade> decompose_conformal(const Network& network, const RationalVector& trade,
                                                const RationalVector& x);

// alpha-weighted value of a bilateral trade: alpha_supply q - alpha_demand q.
Rational bilateral_profit(const BilateralTrade& trade, const RationalVector& alpha);
Rational linear_profit(const RationalVector& trade, const RationalVector& alpha);

struct ProfitableDecomposition {
  std::vector<BilateralTrade> components;  // conformal components
  std::vector<Rational> profits;
  bool redundant = false;
  // Redundancy certificate: the unprofitable components and the trade left
  // once they are dropped, which is feasible and at least as profitable.
  std::vector<std::size_t> dropped;
  RationalVector curtailed_trade;
  Rational original_profit;
  Rational curtailed_profit;
};

ProfitableDecomposition decompose_profitable(const Network& network, const RationalVector& trade,
                                             const RationalVector& alpha, const RationalVector& x);

struct SplitCopy {
  Trade trade;                       // trade / M
  double standalone_delta = 0.0;     // U(y + trade/M) - U(y)
  double incremental_delta = 0.0;    // U(y + m trade/M) - U(y + (m-1) trade/M)
  double linearized_profit = 0.0;    // sum of P_i(s) * directional slope * increment
  PlanMatrix marginals;              // directional slope per participant and scenario, at y + (m-1) trade/M
};

// M equal copies of a trade with their exact and linearized welfare effects,
// evaluated for copy m at the state reached after the first m-1 copies.
std::vector<SplitCopy> split_nonlinear(const Market& market, const PlanMatrix& y, const Trade& trade, int copies);

}  // namespace gridtrade
