// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// The checks here use their own oracles (Laplacian shift factors, DFS tree
// flows, a separately assembled dispatch LP, hand-written KKT conditions and
// corner enumeration) rather than the library's internal helpers.

#include "gridtrade/dispatch.hpp"
#include "gridtrade/lp.hpp"
#include "gridtrade/market_io.hpp"
#include "gridtrade/proposer.hpp"
#include "gridtrade/robust.hpp"
#include "gridtrade/tree.hpp"
#include "support/random_market.hpp"
#include "support/two_bus.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gridtrade;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

// ---------------------------------------------------------------------------
// Shift factors from the reduced Laplacian, independent of the library.
Eigen::MatrixXd ptdf(const Network& net) {
  const int n = net.bus_count;
  const int l = static_cast<int>(net.lines.size());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& line : net.lines) {
    const double b = 1.0 / line.reactance;
    lap(line.from, line.from) += b;
    lap(line.to, line.to) += b;
    lap(line.from, line.to) -= b;
    lap(line.to, line.from) -= b;
  }
  // pin the reference angle by replacing its row with a unit row
  Eigen::MatrixXd pinned = lap;
  pinned.row(net.reference_bus).setZero();
  pinned(net.reference_bus, net.reference_bus) = 1.0;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(n, n);
  rhs.row(net.reference_bus).setZero();
  const Eigen::MatrixXd theta = pinned.fullPivLu().solve(rhs);  // angles per unit injection at each bus
  Eigen::MatrixXd h(l, n);
  for (int e = 0; e < l; ++e) {
    const auto& line = net.lines[static_cast<std::size_t>(e)];
    h.row(e) = (theta.row(line.from) - theta.row(line.to)) / line.reactance;
  }
  return h;
}

double capacity(const Network& net, int line, int s) {
  if (!net.scenario_capacities.empty())
    return net.scenario_capacities[static_cast<std::size_t>(s)][static_cast<std::size_t>(line)];
  return net.lines[static_cast<std::size_t>(line)].capacity;
}

// Worst line overload of an N x S injection matrix; negative means slack.
double worst_overload(const Network& net, const Eigen::MatrixXd& h, const Eigen::MatrixXd& x) {
  double worst = -1e300;
  for (int s = 0; s < x.cols(); ++s) {
    const Eigen::VectorXd f = h * x.col(s);
    for (int e = 0; e < f.size(); ++e) worst = std::max(worst, std::abs(f[e]) - capacity(net, e, s));
  }
  return worst;
}

Eigen::MatrixXd nodal_of(const Market& m, const PlanMatrix& y) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m.bus_count(), y.cols());
  for (int i = 0; i < m.participant_count(); ++i) x.row(m.participants[static_cast<std::size_t>(i)].bus) += y.row(i);
  return x;
}

// Integral of the segment slopes from 0 to p.
double pwl_value(const std::vector<double>& bp, const std::vector<double>& sl, double p) {
  const double lo = std::min(0.0, p), hi = std::max(0.0, p);
  double area = 0.0;
  for (std::size_t k = 0; k < sl.size(); ++k) {
    const double start = k == 0 ? -1e300 : bp[k];
    const double end = k + 1 < bp.size() ? bp[k + 1] : 1e300;
    const double overlap = std::min(hi, end) - std::max(lo, start);
    if (overlap > 0) area += sl[k] * overlap;
  }
  return p >= 0 ? area : -area;
}

// ---------------------------------------------------------------------------
// Optimal welfare by a dispatch LP assembled here from the test PTDF.
double oracle_welfare(const Market& m) {
  const Eigen::MatrixXd h = ptdf(m.network);
  const int s_count = m.scenario_count();
  lp::ProgramBuilder b(lp::Sense::maximize);
  std::vector<std::vector<int>> var(m.participants.size());
  for (std::size_t i = 0; i < m.participants.size(); ++i) {
    const Participant& p = m.participants[i];
    for (int s = 0; s < s_count; ++s) {
      const Interval& bd = p.bounds[static_cast<std::size_t>(s)];
      const double lo = bd.lower;
      const double hi = p.inelastic ? bd.lower : bd.upper;
      const int v = b.add_variable(lo, hi);
      var[i].push_back(v);
      const UtilityFunction& u = p.utility[static_cast<std::size_t>(s)];
      const double prob = m.scenarios.probabilities[static_cast<std::size_t>(s)];
      // concave piecewise-linear value through its hypograph
      const int t = b.add_variable(-lp::kInfinity, lp::kInfinity, prob);
      const auto& bp = u.breakpoints();
      const auto& sl = u.slopes();
      // one supporting line per segment, through the segment's start
      for (std::size_t k = 0; k < sl.size(); ++k) b.add_inequality({{t, 1.0}, {v, -sl[k]}}, pwl_value(bp, sl, bp[k]) - sl[k] * bp[k]);
    }
    if (p.day_ahead())
      for (int s = 1; s < s_count; ++s) b.add_equality({{var[i][static_cast<std::size_t>(s)], 1.0}, {var[i][0], -1.0}}, 0.0);
  }
  for (int s = 0; s < s_count; ++s) {
    lp::ProgramBuilder::Terms bal;
    for (std::size_t i = 0; i < var.size(); ++i) bal.emplace_back(var[i][static_cast<std::size_t>(s)], 1.0);
    b.add_equality(bal, 0.0);
    for (int e = 0; e < h.rows(); ++e) {
      lp::ProgramBuilder::Terms up, down;
      for (std::size_t i = 0; i < var.size(); ++i) {
        const double c = h(e, m.participants[i].bus);
        if (c == 0.0) continue;
        up.emplace_back(var[i][static_cast<std::size_t>(s)], c);
        down.emplace_back(var[i][static_cast<std::size_t>(s)], -c);
      }
      if (up.empty()) continue;
      b.add_inequality(up, capacity(m.network, e, s));
      b.add_inequality(down, capacity(m.network, e, s));
    }
  }
  const lp::LpSolution sol = lp::solve(b.build());
  if (!sol.optimal()) throw std::runtime_error("oracle LP not optimal");
  return sol.objective;
}

// ---------------------------------------------------------------------------
// First-order conditions of a dispatch, written out from the dual relations.
double kkt_violation(const Market& market, const DispatchSolution& d) {
  const Market m = oracle_form(market);
  const Eigen::MatrixXd h = ptdf(m.network);
  const int s_count = m.scenario_count();
  const int l = static_cast<int>(h.rows());
  double worst = 0.0;
  auto note = [&](double v) { worst = std::max(worst, std::abs(v)); };
  auto neg = [&](double v) { worst = std::max(worst, std::max(0.0, -v)); };

  for (int i = 0; i < m.participant_count(); ++i) {
    const Participant& p = m.participants[static_cast<std::size_t>(i)];
    double zeta_sum = 0.0;
    for (int s = 0; s < s_count; ++s) {
      const double prob = m.scenarios.probabilities[static_cast<std::size_t>(s)];
      const double y = d.plans(i, s);
      const Interval& bd = p.bounds[static_cast<std::size_t>(s)];
      const double el = d.eta_lower(i, s), eu = d.eta_upper(i, s), z = d.zeta(i, s);
      zeta_sum += z;
      if (!p.day_ahead()) note(z);
      neg(el);
      neg(eu);
      note(el * (y - bd.lower));
      note(eu * (bd.upper - y));
      neg(y - bd.lower + 1e-12);
      neg(bd.upper - y + 1e-12);
      // P g + lambda - (eu - el) - zeta = 0 needs g in the superdifferential
      const double g = (eu - el + z - d.lambda(p.bus, s)) / prob;
      const UtilityFunction& u = p.utility[static_cast<std::size_t>(s)];
      const auto& bp = u.breakpoints();
      const auto& sl = u.slopes();
      double left = sl.front(), right = sl.back();
      for (std::size_t k = 0; k < sl.size(); ++k) {
        const double start = bp[k];
        const double end = k + 1 < bp.size() ? bp[k + 1] : 1e300;
        if (y > start + 1e-9 && y < end - 1e-9) left = right = sl[k];
        if (std::abs(y - start) <= 1e-9) {
          right = sl[k];
          left = k > 0 ? sl[k - 1] : 1e300;  // left end of the domain: any larger slope works
        }
      }
      neg(prob * (g - right));
      neg(prob * (left - g));
    }
    if (p.day_ahead()) {
      note(zeta_sum);
      for (int s = 1; s < s_count; ++s) note(d.plans(i, s) - d.plans(i, 0));
    }
  }
  const Eigen::MatrixXd x = nodal_of(m, d.plans);
  for (int s = 0; s < s_count; ++s) {
    note(x.col(s).sum());
    const Eigen::VectorXd f = h * x.col(s);
    Eigen::VectorXd hb = Eigen::VectorXd::Zero(m.bus_count());
    for (int e = 0; e < l; ++e) {
      const double bu = d.beta(e, s), bl = d.beta(e + l, s);
      neg(bu);
      neg(bl);
      const double cap = capacity(m.network, e, s);
      neg(cap - f[e] + 1e-12);
      neg(cap + f[e] + 1e-12);
      note(bu * (cap - f[e]));
      note(bl * (cap + f[e]));
      hb += (bu - bl) * h.row(e).transpose();
    }
    for (int n = 0; n < m.bus_count(); ++n) note(d.lambda(n, s) + d.gamma_s[s] + hb[n]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Exact line flows on a tree by subtree sums.
struct TreeOracle {
  const Network& net;
  std::vector<std::vector<std::pair<int, int>>> adj;

  explicit TreeOracle(const Network& n) : net(n), adj(static_cast<std::size_t>(n.bus_count)) {
    for (int e = 0; e < static_cast<int>(n.lines.size()); ++e) {
      adj[static_cast<std::size_t>(n.lines[static_cast<std::size_t>(e)].from)].emplace_back(n.lines[static_cast<std::size_t>(e)].to, e);
      adj[static_cast<std::size_t>(n.lines[static_cast<std::size_t>(e)].to)].emplace_back(n.lines[static_cast<std::size_t>(e)].from, e);
    }
  }

  RationalVector flows(const RationalVector& p) const {
    RationalVector f(net.lines.size(), Rational(0));
    std::function<Rational(int, int)> visit = [&](int u, int parent) {
      Rational sum = p[static_cast<std::size_t>(u)];
      for (auto [v, e] : adj[static_cast<std::size_t>(u)]) {
        if (v == parent) continue;
        const Rational sub = visit(v, u);
        f[static_cast<std::size_t>(e)] = net.lines[static_cast<std::size_t>(e)].from == v ? sub : Rational(-sub);
        sum += sub;
      }
      return sum;
    };
    visit(0, -1);
    return f;
  }

  bool feasible(const RationalVector& p) const {
    const RationalVector f = flows(p);
    for (std::size_t e = 0; e < f.size(); ++e)
      if (abs(f[e]) > to_rational(net.lines[e].capacity)) return false;
    return true;
  }
};

RationalVector add(RationalVector a, const RationalVector& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

Network random_tree(std::mt19937_64& rng, int n) {
  Network net;
  net.bus_count = n;
  net.reference_bus = static_cast<int>(rng() % static_cast<unsigned>(n));
  for (int b = 1; b < n; ++b)
    net.lines.push_back({static_cast<int>(rng() % static_cast<unsigned>(b)), b, 1.0 + static_cast<double>(rng() % 3), 5.0 + static_cast<double>(rng() % 16)});
  return net;
}

// Balanced integer vector scaled by halves until feasible on top of x.
RationalVector random_feasible_trade(std::mt19937_64& rng, const TreeOracle& oracle, const RationalVector& x, int n) {
  RationalVector t(static_cast<std::size_t>(n));
  Rational total = 0;
  for (int k = 0; k + 1 < n; ++k) {
    t[static_cast<std::size_t>(k)] = Rational(static_cast<long>(rng() % 21) - 10);
    total += t[static_cast<std::size_t>(k)];
  }
  t[static_cast<std::size_t>(n - 1)] = -total;
  while (!oracle.feasible(add(x, t)))
    for (auto& v : t) v /= 2;
  return t;
}

// ---------------------------------------------------------------------------
Verdict criterion1() {
  Verdict v;
  const auto t0 = Clock::now();
  const Market m = gridtrade::testing::two_bus_market();
  LpProposer proposer(m, ProposerStrategy{});
  const RunResult r = run_trading(m, EngineConfig{}, proposer);
  const double elapsed = seconds_since(t0);

  PlanMatrix table1(4, 2), table2(4, 2), table3(4, 2);
  table1 << 50, 50, 100, 50, 0, 50, -150, -150;
  table2 << 40, 40, 80, 40, 0, 40, -120, -120;
  table3 << 20, 20, 100, 50, 30, 80, -150, -150;
  const auto& rec = r.state.records;
  if (rec.size() != 2) v.fail("expected two trades, got " + std::to_string(rec.size()));
  if (rec.size() >= 1) {
    if ((rec[0].trade.dense(4, 2) - table1).cwiseAbs().maxCoeff() > 1e-6) v.fail("first trade differs from the expected proposal");
    if (std::abs(rec[0].gamma - 0.8) > 1e-9) v.fail("first gamma is not 0.8");
    if ((0.8 * table1 - table2).cwiseAbs().maxCoeff() > 1e-9) v.fail("curtailed state arithmetic");
    if ((rec[0].gamma * rec[0].trade.dense(4, 2) - table2).cwiseAbs().maxCoeff() > 1e-6) v.fail("state after step 1");
  }
  if (rec.size() >= 2 && std::abs(rec[1].gamma - 1.0) > 1e-9) v.fail("second trade curtailed");
  if ((r.state.y - table3).cwiseAbs().maxCoeff() > 1e-6) v.fail("final state differs from the optimal schedule");
  if (!r.converged) v.fail("did not certify termination");
  if (elapsed > 1.0) v.fail("took " + std::to_string(elapsed) + " s");
  if (v.pass) {
    std::ostringstream os;
    os << "gamma 0.8 then 1, optimal schedule reached, certified, " << elapsed << " s";
    v.detail = os.str();
  }
  return v;
}

struct RandomRun {
  Market market;
  RunResult result;
  DispatchSolution dispatch;
};

std::vector<RandomRun> random_runs(Verdict& v2) {
  std::vector<RandomRun> runs;
  std::mt19937_64 rng(20240501);
  double worst_gap = 0.0, worst_time = 0.0;
  for (int k = 0; k < 50; ++k) {
    gridtrade::testing::RandomMarketOptions opt;
    opt.tree = k % 2 == 0;
    RandomRun run{gridtrade::testing::random_market(rng, opt), {}, {}};
    const auto t0 = Clock::now();
    LpProposer proposer(run.market, ProposerStrategy{});
    EngineConfig cfg;
    cfg.epsilon = 1e-3;
    run.result = run_trading(run.market, cfg, proposer);
    const double elapsed = seconds_since(t0);
    worst_time = std::max(worst_time, elapsed);
    const double ustar = oracle_welfare(run.market);
    run.dispatch = solve_dispatch(run.market);
    const double achieved = total_utility_market(run.market, run.result.state.y);
    const double gap = ustar - achieved;
    worst_gap = std::max(worst_gap, gap / (1 + std::abs(ustar)));
    if (!run.result.converged) v2.fail("market " + std::to_string(k) + " did not converge");
    if (gap > 1e-3 * (1 + std::abs(ustar))) v2.fail("market " + std::to_string(k) + " gap " + std::to_string(gap));
    if (std::abs(run.dispatch.objective - ustar) > 1e-6 * (1 + std::abs(ustar)))
      v2.fail("market " + std::to_string(k) + " library dispatch disagrees with oracle LP");
    if (elapsed > 5.0) v2.fail("market " + std::to_string(k) + " took " + std::to_string(elapsed) + " s");
    runs.push_back(std::move(run));
  }
  if (v2.pass) {
    std::ostringstream os;
    os << "50 markets, worst relative gap " << worst_gap << ", slowest " << worst_time << " s";
    v2.detail = os.str();
  }
  return runs;
}

Verdict criterion3(const std::vector<RandomRun>& runs) {
  Verdict v;
  double worst_flow = -1e300, worst_balance = 0.0;
  std::size_t states = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const Market& m = runs[k].market;
    const Eigen::MatrixXd h = ptdf(m.network);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m.bus_count(), m.scenario_count());
    for (const TradeRecord& rec : runs[k].result.state.records) {
      if (!rec.accepted) continue;
      for (const auto& [i, plan] : rec.trade.plans)
        for (int s = 0; s < m.scenario_count(); ++s) x(m.participants[i].bus, s) += rec.gamma_for(s) * plan[s];
      ++states;
      worst_flow = std::max(worst_flow, worst_overload(m.network, h, x));
      for (int s = 0; s < x.cols(); ++s) worst_balance = std::max(worst_balance, std::abs(x.col(s).sum()));
    }
    if ((x - runs[k].result.state.x).cwiseAbs().maxCoeff() > 1e-9) v.fail("engine state drifted from the records");
  }
  if (worst_flow > 1e-8) v.fail("line overload " + std::to_string(worst_flow));
  if (worst_balance > 1e-9) v.fail("imbalance " + std::to_string(worst_balance));
  if (v.pass) {
    std::ostringstream os;
    os << states << " intermediate states, worst headroom use " << worst_flow << ", worst imbalance " << worst_balance;
    v.detail = os.str();
  }
  return v;
}

Verdict criterion4() {
  Verdict v;
  const Market m = gridtrade::testing::two_bus_market();
  PlanMatrix table3(4, 2);
  table3 << 20, 20, 100, 50, 30, 80, -150, -150;
  const auto windy = lmp_from_marginals(m, table3, 1, 0);
  const auto breezy = lmp_from_marginals(m, table3, 1, 1);
  if (!windy || std::abs(*windy - 48) > 1e-9) v.fail("windy quote at bus 2 is not 48");
  if (!breezy || std::abs(*breezy - 32) > 1e-9) v.fail("breezy quote at bus 2 is not 32");

  const DispatchSolution d = solve_dispatch(m);
  const Eigen::MatrixXd lambda = prices_from(d).lambda;
  if (windy && std::abs(lambda(1, 0) - *windy) > 1e-6) v.fail("windy dual disagrees with quote");
  if (breezy && std::abs(lambda(1, 1) - *breezy) > 1e-6) v.fail("breezy dual disagrees with quote");

  // dual oracle: sensitivity of the optimum to a fixed injection at (n, s)
  Eigen::MatrixXd fd(2, 2);
  for (int n = 0; n < 2; ++n)
    for (int s = 0; s < 2; ++s) {
      double value[2];
      for (int side = 0; side < 2; ++side) {
        const double amount = side == 0 ? 0.5 : -0.5;
        Market probe = m;
        Participant p;
        p.id = "probe";
        p.bus = n;
        p.kind = amount > 0 ? ParticipantKind::producer : ParticipantKind::load;
        for (int t = 0; t < 2; ++t) {
          const double a = t == s ? amount : 0.0;
          p.bounds.push_back({a, a});
          p.utility.push_back(UtilityFunction::linear(std::min(a, 0.0), 0.0));
        }
        probe.participants.push_back(p);
        value[side] = oracle_welfare(probe);
      }
      fd(n, s) = value[0] - value[1];
    }
  Eigen::MatrixXd expect(2, 2);
  expect << 18, 32, 48, 32;
  if ((fd - expect).cwiseAbs().maxCoeff() > 1e-6) v.fail("finite-difference prices differ from ((18,32),(48,32))");
  if ((lambda - expect).cwiseAbs().maxCoeff() > 1e-6) v.fail("dispatch duals differ from ((18,32),(48,32))");

  const Eigen::MatrixXd x = nodal_of(m, table3);
  if (!check_arrow_debreu(m, table3, x, expect).verdict) v.fail("equilibrium check rejects the prices");
  for (int n = 0; n < 2; ++n)
    for (int s = 0; s < 2; ++s) {
      Eigen::MatrixXd bumped = expect;
      bumped(n, s) += 1.0;
      if (check_arrow_debreu(m, table3, x, bumped).verdict)
        v.fail("perturbed price (" + std::to_string(n) + "," + std::to_string(s) + ") still passes");
    }
  if (v.pass) v.detail = "quotes (48, 32), duals and finite differences ((18,32),(48,32)), 4 perturbations rejected";
  return v;
}

Verdict criterion5(const std::vector<RandomRun>& runs) {
  Verdict v;
  double worst = 0.0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const double r = kkt_violation(runs[k].market, runs[k].dispatch);
    worst = std::max(worst, r);
    if (r > 1e-6) v.fail("market " + std::to_string(k) + " KKT residual " + std::to_string(r));
  }
  if (v.pass) {
    std::ostringstream os;
    os << runs.size() << " dispatches, worst residual " << worst;
    v.detail = os.str();
  }
  return v;
}

Verdict criterion6() {
  Verdict v;
  std::mt19937_64 rng(606);
  std::size_t components = 0;
  for (int k = 0; k < 30; ++k) {
    const int n = 3 + k % 6;
    const Network net = random_tree(rng, n);
    const TreeOracle oracle(net);
    RationalVector x(static_cast<std::size_t>(n), Rational(0));
    if (k % 3 != 0) x = random_feasible_trade(rng, oracle, x, n);
    const RationalVector trade = random_feasible_trade(rng, oracle, x, n);
    const std::string tag = "instance " + std::to_string(k) + ": ";

    const auto seq = decompose_sequential(net, trade, x);
    RationalVector acc = x, total(static_cast<std::size_t>(n), Rational(0));
    for (const auto& b : seq) {
      const RationalVector p = b.nodal(n);
      acc = add(acc, p);
      total = add(total, p);
      if (!oracle.feasible(acc)) v.fail(tag + "sequential prefix infeasible");
    }
    if (total != trade) v.fail(tag + "sequential components do not sum to the trade");

    const auto conf = decompose_conformal(net, trade, x);
    components += conf.size();
    total.assign(static_cast<std::size_t>(n), Rational(0));
    const RationalVector flow = oracle.flows(trade);
    for (const auto& b : conf) {
      const RationalVector p = b.nodal(n);
      total = add(total, p);
      if (b.quantity <= 0) v.fail(tag + "nonpositive component");
      if (!oracle.feasible(add(x, p))) v.fail(tag + "single component infeasible");
      const RationalVector f = oracle.flows(p);
      for (std::size_t e = 0; e < f.size(); ++e)
        if (f[e] * flow[e] < 0 || (flow[e] == 0 && f[e] != 0)) v.fail(tag + "component opposes the trade's flow");
    }
    if (total != trade) v.fail(tag + "conformal components do not sum to the trade");
    std::size_t pos = 0, negc = 0;
    for (const auto& t : trade) {
      pos += t > 0;
      negc += t < 0;
    }
    if (conf.size() > pos * negc + net.lines.size()) v.fail(tag + "too many components");

    std::vector<std::size_t> order(conf.size());
    std::iota(order.begin(), order.end(), 0);
    for (int perm = 0; perm < 20; ++perm) {
      std::shuffle(order.begin(), order.end(), rng);
      RationalVector run = x;
      for (std::size_t j : order) {
        run = add(run, conf[j].nodal(n));
        if (!oracle.feasible(run)) v.fail(tag + "permuted prefix infeasible");
      }
    }
  }
  if (v.pass) v.detail = "30 radial instances, " + std::to_string(components) + " conformal components, exact sums, 20 permutations each";
  return v;
}

Verdict criterion7() {
  Verdict v;
  std::mt19937_64 rng(707);
  int redundant = 0;
  for (int k = 0; k < 20; ++k) {
    const int n = 3 + k % 5;
    const Network net = random_tree(rng, n);
    const TreeOracle oracle(net);
    const RationalVector x(static_cast<std::size_t>(n), Rational(0));
    RationalVector trade, alpha;
    Rational profit = 0;
    while (profit == 0) {
      trade = random_feasible_trade(rng, oracle, x, n);
      alpha.assign(static_cast<std::size_t>(n), Rational(0));
      for (auto& a : alpha) a = Rational(-static_cast<long>(rng() % 100) - 1);
      profit = 0;
      for (int j = 0; j < n; ++j) profit += alpha[static_cast<std::size_t>(j)] * trade[static_cast<std::size_t>(j)];
    }
    if (profit < 0)  // reverse the trade so it is profitable
      for (auto& t : trade) t = -t;
    profit = abs(profit);
    const std::string tag = "instance " + std::to_string(k) + ": ";

    const ProfitableDecomposition d = decompose_profitable(net, trade, alpha, x);
    auto value = [&](const RationalVector& p) {
      Rational s = 0;
      for (int j = 0; j < n; ++j) s += alpha[static_cast<std::size_t>(j)] * p[static_cast<std::size_t>(j)];
      return s;
    };
    if (d.original_profit != profit) v.fail(tag + "original profit misreported");
    if (!d.redundant) {
      for (const auto& b : d.components)
        if (value(b.nodal(n)) <= 0) v.fail(tag + "unprofitable component returned");
      continue;
    }
    ++redundant;
    RationalVector rest = trade;
    for (std::size_t j : d.dropped) {
      const RationalVector p = d.components[j].nodal(n);
      if (value(p) > 0) v.fail(tag + "certificate drops a profitable component");
      for (int b = 0; b < n; ++b) rest[static_cast<std::size_t>(b)] -= p[static_cast<std::size_t>(b)];
    }
    if (rest != d.curtailed_trade) v.fail(tag + "curtailed trade is not the remainder");
    if (!oracle.feasible(rest)) v.fail(tag + "curtailed trade infeasible");
    if (value(rest) < profit) v.fail(tag + "curtailed trade less profitable");
  }
  if (v.pass) v.detail = "20 instances, " + std::to_string(redundant) + " redundancy certificates, all checks exact";
  return v;
}

Verdict criterion8() {
  Verdict v;
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> unit(0, 1);
  double worst_corner = -1e300, worst_bisect = 0.0;
  std::size_t corners_checked = 0;
  for (int k = 0; k < 20; ++k) {
    gridtrade::testing::RandomMarketOptions opt;
    opt.tree = k % 2 == 0;
    opt.max_buses = 5;
    Market m = gridtrade::testing::random_market(rng, opt);
    if (m.participant_count() < 2) continue;
    const LoadingMatrix lm = build_loading_matrix(m.network);
    const Eigen::MatrixXd h = ptdf(m.network);
    IntervalState state = IntervalState::zero(m.bus_count());
    int bits = 0;
    std::vector<std::pair<IntervalTrade, double>> accepted;
    for (int step = 0; step < 4; ++step) {
      IntervalTrade t;
      const std::size_t members = std::min<std::size_t>(3, m.participants.size());
      int new_bits = 0;
      for (std::size_t j = 0; j < members; ++j) {
        const std::size_t i = rng() % m.participants.size();
        if (t.bounds.count(i)) continue;
        const double centre = (unit(rng) - 0.5) * 80;
        const double width = unit(rng) < 0.3 ? 0.0 : unit(rng) * 20;
        if (width > 0) ++new_bits;
        t.bounds[i] = {centre - width / 2, centre + width / 2};
      }
      if (bits + new_bits > 12) break;
      const NodalInterval q = nodal_interval(t, m);
      const double closed = robust_curtailment_factor(lm, state, q);
      const double bisect = robust_curtailment_bisection(lm, state, q);
      worst_bisect = std::max(worst_bisect, std::abs(closed - bisect));
      if (std::abs(closed - bisect) > 1e-8) v.fail("ratio test and bisection disagree");
      RobustStep r = accept_interval_trade(state, t, m, lm);
      state = r.state;
      if (r.record.accepted) {
        bits += new_bits;
        accepted.emplace_back(t, r.record.gamma);
      }
    }
    // enumerate every corner of every accepted box
    std::vector<std::tuple<std::size_t, std::size_t, int>> free_bits;  // record, participant, -
    for (std::size_t a = 0; a < accepted.size(); ++a)
      for (const auto& [i, b] : accepted[a].first.bounds)
        if (b.upper > b.lower) free_bits.emplace_back(a, i, 0);
    const std::size_t combos = std::size_t{1} << free_bits.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(m.bus_count());
      for (std::size_t a = 0; a < accepted.size(); ++a)
        for (const auto& [i, b] : accepted[a].first.bounds) {
          double value = b.lower;
          for (std::size_t f = 0; f < free_bits.size(); ++f)
            if (std::get<0>(free_bits[f]) == a && std::get<1>(free_bits[f]) == i && (mask >> f & 1)) value = b.upper;
          x[m.participants[i].bus] += accepted[a].second * value;
        }
      const Eigen::VectorXd f = h * x;
      for (int e = 0; e < f.size(); ++e) worst_corner = std::max(worst_corner, std::abs(f[e]) - m.network.lines[static_cast<std::size_t>(e)].capacity);
      ++corners_checked;
    }
  }
  if (worst_corner > 1e-8) v.fail("corner overload " + std::to_string(worst_corner));
  if (v.pass) {
    std::ostringstream os;
    os << corners_checked << " corners, worst headroom use " << worst_corner << ", worst bisection gap " << worst_bisect;
    v.detail = os.str();
  }
  return v;
}

Verdict criterion9() {
  Verdict v;
  auto trace_of = [](const Market& m, ProposerStrategy st) {
    LpProposer p(m, st);
    EngineConfig cfg;
    cfg.seed = st.seed;
    return trace_jsonl(m, run_trading(m, cfg, p).state.records);
  };
  const Market two_bus = gridtrade::testing::two_bus_market();
  std::mt19937_64 rng(909);
  std::vector<Market> markets{two_bus};
  for (int k = 0; k < 5; ++k) markets.push_back(gridtrade::testing::random_market(rng, {}));
  std::size_t bytes = 0;
  for (const Market& m : markets)
    for (ProposerMode mode : {ProposerMode::full_group, ProposerMode::exhaustive_subsets, ProposerMode::random_subsets}) {
      const ProposerStrategy st{mode, 3, 2, 42};
      const std::string a = trace_of(m, st), b = trace_of(m, st);
      bytes += a.size();
      if (a != b) v.fail("traces differ for proposer " + to_string(mode));
    }
  if (v.pass) v.detail = "18 run pairs byte-identical (" + std::to_string(bytes) + " bytes each side)";
  return v;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  };

  report(1, criterion1);
  Verdict v2;
  std::vector<RandomRun> runs;
  try {
    runs = random_runs(v2);
  } catch (const std::exception& e) {
    v2.fail(std::string("exception: ") + e.what());
  }
  report(2, [&] { return v2; });
  report(3, [&] { return criterion3(runs); });
  report(4, criterion4);
  report(5, [&] { return criterion5(runs); });
  report(6, criterion6);
  report(7, criterion7);
  report(8, criterion8);
  report(9, criterion9);
  return failures == 0 ? 0 : 1;
}
