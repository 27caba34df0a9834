#include "gridtrade/market_io.hpp"

#include "gridtrade/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace gridtrade {

using nlohmann::json;

namespace {

// A JSON value together with its path, for diagnostics.
struct Node {
  const json& value;
  std::string path;

  [[noreturn]] void fail(const std::string& problem) const { throw InputError(path + ": " + problem); }

  bool has(const char* key) const { return value.is_object() && value.contains(key); }

  Node at(const char* key) const {
    if (!value.is_object()) fail("expected an object");
    if (!value.contains(key)) throw InputError(path + "." + key + ": required field missing");
    return {value.at(key), path + "." + key};
  }
  Node at(std::size_t k) const { return {value.at(k), path + "[" + std::to_string(k) + "]"}; }

  std::size_t size() const {
    if (!value.is_array()) fail("expected an array");
    return value.size();
  }
  double number() const {
    if (!value.is_number()) fail("expected a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  long long integer() const {
    if (!value.is_number_integer()) fail("expected an integer");
    return value.get<long long>();
  }
  std::string text() const {
    if (!value.is_string()) fail("expected a string");
    return value.get<std::string>();
  }
  bool boolean() const {
    if (!value.is_boolean()) fail("expected true or false");
    return value.get<bool>();
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < size(); ++k) out.push_back(at(k).number());
    return out;
  }
};

Interval parse_interval(const Node& n) {
  if (n.size() != 2) n.fail("expected [lower, upper]");
  return {n.at(std::size_t{0}).number(), n.at(std::size_t{1}).number()};
}

std::vector<Interval> parse_bounds(const Node& n, int s_count) {
  if (n.size() == 0) n.fail("expected [lower, upper] or one pair per scenario");
  if (!n.value.at(0).is_array()) return std::vector<Interval>(static_cast<std::size_t>(s_count), parse_interval(n));
  if (static_cast<int>(n.size()) != s_count) n.fail("expected one [lower, upper] pair per scenario");
  std::vector<Interval> out;
  for (std::size_t k = 0; k < n.size(); ++k) out.push_back(parse_interval(n.at(k)));
  return out;
}

UtilityFunction parse_segments(const Node& n) {
  std::vector<double> breakpoints, slopes;
  if (n.size() == 0) n.fail("expected at least one {breakpoint, slope} segment");
  for (std::size_t k = 0; k < n.size(); ++k) {
    const Node seg = n.at(k);
    breakpoints.push_back(seg.at("breakpoint").number());
    slopes.push_back(seg.at("slope").number());
  }
  try {
    return UtilityFunction(breakpoints, slopes);
  } catch (const std::exception& e) {
    n.fail(e.what());
  }
}

std::vector<UtilityFunction> parse_utility(const Node& n, int s_count) {
  if (n.size() == 0) n.fail("expected a segment list or one segment list per scenario");
  if (!n.value.at(0).is_array()) return std::vector<UtilityFunction>(static_cast<std::size_t>(s_count), parse_segments(n));
  if (static_cast<int>(n.size()) != s_count) n.fail("expected one segment list per scenario");
  std::vector<UtilityFunction> out;
  for (std::size_t k = 0; k < n.size(); ++k) out.push_back(parse_segments(n.at(k)));
  return out;
}

Participant parse_participant(const Node& n, int s_count) {
  Participant p;
  p.id = n.at("id").text();
  if (p.id.empty()) n.at("id").fail("must not be empty");
  p.bus = static_cast<int>(n.at("bus").integer());
  const std::string kind = n.at("kind").text();
  if (kind == "producer") p.kind = ParticipantKind::producer;
  else if (kind == "load") p.kind = ParticipantKind::load;
  else n.at("kind").fail("expected \"producer\" or \"load\"");
  const std::string timing = n.at("timing").text();
  if (timing == "DA") p.timing = Timing::day_ahead;
  else if (timing == "RT") p.timing = Timing::real_time;
  else n.at("timing").fail("expected \"DA\" or \"RT\"");
  p.bounds = parse_bounds(n.at("bounds"), s_count);
  p.utility = parse_utility(n.at("utility"), s_count);
  if (n.has("subjective_probabilities")) p.subjective_probabilities = n.at("subjective_probabilities").numbers();
  if (n.has("inelastic")) p.inelastic = n.at("inelastic").boolean();
  return p;
}

std::vector<std::vector<double>> parse_scenario_vectors(const Node& n) {
  if (n.size() > 0 && n.value.at(0).is_array()) {
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < n.size(); ++k) out.push_back(n.at(k).numbers());
    return out;
  }
  return {n.numbers()};
}

std::map<std::size_t, double> parse_id_map(const Node& n, const Market& market) {
  if (!n.value.is_object()) n.fail("expected an object keyed by participant id");
  std::map<std::size_t, double> out;
  for (const auto& [key, v] : n.value.items()) {
    const auto idx = market.index_of(key);
    if (!idx) throw InputError(n.path + "." + key + ": unknown participant id");
    out[*idx] = Node{v, n.path + "." + key}.number();
  }
  return out;
}

void parse_engine(const Node& n, MarketFile& file) {
  if (n.has("epsilon")) file.engine.epsilon = n.at("epsilon").number();
  if (n.has("curtailment")) {
    const std::string mode = n.at("curtailment").text();
    if (mode == "uniform") file.engine.curtailment = CurtailmentMode::uniform;
    else if (mode == "hybrid") file.engine.curtailment = CurtailmentMode::hybrid;
    else n.at("curtailment").fail("expected \"uniform\" or \"hybrid\"");
  }
  if (n.has("seed")) {
    const long long seed = n.at("seed").integer();
    if (seed < 0) n.at("seed").fail("must be nonnegative");
    file.engine.seed = static_cast<std::uint64_t>(seed);
  }
  if (n.has("max_steps")) {
    const long long steps = n.at("max_steps").integer();
    if (steps < 1) n.at("max_steps").fail("must be positive");
    file.engine.max_steps = static_cast<std::size_t>(steps);
  }
  if (n.has("proposer")) {
    const Node p = n.at("proposer");
    if (p.has("mode")) {
      try {
        file.proposer.mode = parse_proposer_mode(p.at("mode").text());
      } catch (const InputError& e) {
        p.at("mode").fail(e.what());
      }
    }
    if (p.has("max_size")) file.proposer.max_size = static_cast<int>(p.at("max_size").integer());
    if (p.has("attempts")) file.proposer.attempts = static_cast<int>(p.at("attempts").integer());
  }
  file.proposer.seed = file.engine.seed;
}

}  // namespace

MarketFile parse_market(const json& doc) {
  const Node root{doc, "$"};
  if (!doc.is_object()) root.fail("expected an object");
  MarketFile file;
  Market& m = file.market;

  const Node net = root.at("network");
  const long long buses = net.at("buses").integer();
  if (buses < 1) net.at("buses").fail("must be at least 1");
  m.network.bus_count = static_cast<int>(buses);
  if (net.has("reference_bus")) m.network.reference_bus = static_cast<int>(net.at("reference_bus").integer());
  const Node lines = net.at("lines");
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const Node l = lines.at(k);
    m.network.lines.push_back({static_cast<int>(l.at("from").integer()), static_cast<int>(l.at("to").integer()),
                               l.at("reactance").number(), l.at("capacity").number()});
  }
  if (net.has("scenario_capacities")) {
    const Node sc = net.at("scenario_capacities");
    for (std::size_t k = 0; k < sc.size(); ++k) m.network.scenario_capacities.push_back(sc.at(k).numbers());
  }

  const Node scen = root.at("scenarios");
  m.scenarios.probabilities = scen.at("probabilities").numbers();
  if (m.scenarios.probabilities.empty()) scen.at("probabilities").fail("expected at least one scenario");
  if (scen.has("names")) {
    const Node names = scen.at("names");
    for (std::size_t k = 0; k < names.size(); ++k) m.scenarios.names.push_back(names.at(k).text());
  }

  const Node parts = root.at("participants");
  for (std::size_t k = 0; k < parts.size(); ++k)
    m.participants.push_back(parse_participant(parts.at(k), m.scenarios.count()));

  try {
    m.validate();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("$: ") + e.what());
  }

  if (root.has("engine")) parse_engine(root.at("engine"), file);
  try {
    file.engine.validate();
    file.proposer.validate();
  } catch (const std::exception& e) {
    throw InputError(std::string("$.engine: ") + e.what());
  }

  if (root.has("decompose")) {
    const Node d = root.at("decompose");
    DecomposeInput in;
    in.trade = parse_scenario_vectors(d.at("trade"));
    if (d.has("state")) in.state = parse_scenario_vectors(d.at("state"));
    else in.state.assign(in.trade.size(), std::vector<double>(static_cast<std::size_t>(m.bus_count()), 0.0));
    if (in.state.size() != in.trade.size()) d.at("state").fail("needs the same number of scenarios as the trade");
    for (std::size_t s = 0; s < in.trade.size(); ++s) {
      if (static_cast<int>(in.trade[s].size()) != m.bus_count()) d.at("trade").fail("expected one entry per bus");
      if (static_cast<int>(in.state[s].size()) != m.bus_count()) d.at("state").fail("expected one entry per bus");
    }
    if (d.has("alpha")) {
      in.alpha = d.at("alpha").numbers();
      if (static_cast<int>(in.alpha->size()) != m.bus_count()) d.at("alpha").fail("expected one entry per bus");
    }
    file.decompose = std::move(in);
  }

  if (root.has("robust_trades")) {
    const Node rt = root.at("robust_trades");
    for (std::size_t k = 0; k < rt.size(); ++k) {
      const Node t = rt.at(k);
      const auto lower = parse_id_map(t.at("lower"), m);
      const auto upper = parse_id_map(t.at("upper"), m);
      IntervalTrade trade;
      for (const auto& [i, lo] : lower) {
        const auto it = upper.find(i);
        if (it == upper.end()) throw InputError(t.path + ".upper." + m.participants[i].id + ": required field missing");
        if (lo > it->second) throw InputError(t.path + "." + m.participants[i].id + ": lower exceeds upper");
        trade.bounds[i] = {lo, it->second};
      }
      for (const auto& [i, hi] : upper)
        if (!lower.count(i)) throw InputError(t.path + ".lower." + m.participants[i].id + ": required field missing");
      file.robust_trades.push_back(std::move(trade));
    }
  }
  return file;
}

MarketFile parse_market_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
  return parse_market(doc);
}

MarketFile load_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open market file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_market_text(buffer.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

double round12(double value) {
  if (!std::isfinite(value)) return value;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;
}

namespace {

json num(double v) { return std::isfinite(v) ? json(round12(v)) : json(nullptr); }

json row_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
  return a;
}

json utility_json(const UtilityFunction& u) {
  json segs = json::array();
  for (std::size_t k = 0; k < u.slopes().size(); ++k)
    segs.push_back({{"breakpoint", num(u.breakpoints()[k])}, {"slope", num(u.slopes()[k])}});
  return segs;
}

json ids_json(const Market& market, const std::vector<std::size_t>& group) {
  json a = json::array();
  for (std::size_t i : group) a.push_back(market.participants[i].id);
  return a;
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(row_json(m.row(r).transpose()));
  return a;
}

json plans_to_json(const Market& market, const PlanMatrix& plans) {
  json o = json::object();
  for (int i = 0; i < market.participant_count(); ++i)
    o[market.participants[static_cast<std::size_t>(i)].id] = row_json(plans.row(i).transpose());
  return o;
}

json engine_to_json(const EngineConfig& engine, const ProposerStrategy& proposer) {
  return {{"epsilon", engine.epsilon},
          {"curtailment", to_string(engine.curtailment)},
          {"seed", engine.seed},
          {"max_steps", engine.max_steps},
          {"proposer", {{"mode", to_string(proposer.mode)}, {"max_size", proposer.max_size}, {"attempts", proposer.attempts}}}};
}

json market_to_json(const MarketFile& file) {
  const Market& m = file.market;
  json lines = json::array();
  for (const Line& l : m.network.lines)
    lines.push_back({{"from", l.from}, {"to", l.to}, {"reactance", l.reactance}, {"capacity", l.capacity}});
  json network = {{"buses", m.network.bus_count}, {"reference_bus", m.network.reference_bus}, {"lines", lines}};
  if (!m.network.scenario_capacities.empty()) network["scenario_capacities"] = m.network.scenario_capacities;
  json scenarios = {{"probabilities", m.scenarios.probabilities}};
  if (!m.scenarios.names.empty()) scenarios["names"] = m.scenarios.names;

  json participants = json::array();
  for (const Participant& p : m.participants) {
    json bounds = json::array();
    for (const Interval& b : p.bounds) bounds.push_back({b.lower, b.upper});
    json utility = json::array();
    for (const UtilityFunction& u : p.utility) utility.push_back(utility_json(u));
    json o = {{"id", p.id},         {"bus", p.bus},       {"kind", to_string(p.kind)}, {"timing", to_string(p.timing)},
              {"bounds", bounds},   {"utility", utility}, {"inelastic", p.inelastic}};
    if (p.subjective_probabilities) o["subjective_probabilities"] = *p.subjective_probabilities;
    participants.push_back(std::move(o));
  }
  json doc = {{"network", network},
              {"scenarios", scenarios},
              {"participants", participants},
              {"engine", engine_to_json(file.engine, file.proposer)}};
  if (file.decompose) {
    doc["decompose"] = {{"trade", file.decompose->trade}, {"state", file.decompose->state}};
    if (file.decompose->alpha) doc["decompose"]["alpha"] = *file.decompose->alpha;
  }
  if (!file.robust_trades.empty()) {
    json trades = json::array();
    for (const IntervalTrade& t : file.robust_trades) {
      json lo = json::object(), hi = json::object();
      for (const auto& [i, b] : t.bounds) {
        lo[m.participants[i].id] = b.lower;
        hi[m.participants[i].id] = b.upper;
      }
      trades.push_back({{"lower", lo}, {"upper", hi}});
    }
    doc["robust_trades"] = trades;
  }
  return doc;
}

json trace_line(const Market& market, const TradeRecord& record) {
  json plans = json::object();
  for (const auto& [i, v] : record.trade.plans) plans[market.participants.at(i).id] = row_json(v);
  json o = {{"step", record.step},
            {"group", ids_json(market, record.trade.group())},
            {"plans", plans},
            {"gamma", num(record.gamma)},
            {"accepted", record.accepted},
            {"reasons", record.reasons},
            {"welfare_delta", num(record.welfare_delta)},
            {"binding_lines_after", record.binding_after}};
  if (!record.scenario_gammas.empty()) {
    json g = json::array();
    for (double v : record.scenario_gammas) g.push_back(num(v));
    o["scenario_gammas"] = g;
  }
  return o;
}

std::string trace_jsonl(const Market& market, const std::vector<TradeRecord>& records) {
  std::string out;
  for (const auto& r : records) out += trace_line(market, r).dump() + "\n";
  return out;
}

json dispatch_to_json(const Market& market, const DispatchSolution& s) {
  return {{"objective", num(s.objective)},
          {"expected_cost", num(expected_producer_cost(market, s.plans))},
          {"plans", plans_to_json(market, s.plans)},
          {"x", matrix_to_json(s.x)},
          {"lambda", matrix_to_json(s.lambda)},
          {"eta_lower", plans_to_json(market, s.eta_lower)},
          {"eta_upper", plans_to_json(market, s.eta_upper)},
          {"zeta", plans_to_json(market, s.zeta)},
          {"beta", matrix_to_json(s.beta)},
          {"gamma_s", row_json(s.gamma_s)}};
}

json prices_to_json(const Market& market, const PriceSystem& prices) {
  json o = {{"lambda", matrix_to_json(prices.lambda)}, {"raw_dual", matrix_to_json(prices.raw_dual)}};
  if (!market.scenarios.names.empty()) o["scenarios"] = market.scenarios.names;
  return o;
}

json equilibrium_to_json(const Market& market, const EquilibriumReport& report) {
  json parts = json::object();
  for (std::size_t i = 0; i < report.participant_ok.size(); ++i)
    parts[market.participants[i].id] = {{"ok", static_cast<bool>(report.participant_ok[i])},
                                        {"slack", num(report.participant_slack[i])}};
  return {{"verdict", report.verdict},
          {"participants", parts},
          {"so_ok", report.so_ok},
          {"so_slack", num(report.so_slack)},
          {"clearing_residual", matrix_to_json(report.clearing_residual)}};
}

json interval_record_to_json(const Market& market, const IntervalRecord& record) {
  json lo = json::object(), hi = json::object();
  for (const auto& [i, b] : record.trade.bounds) {
    lo[market.participants.at(i).id] = num(b.lower);
    hi[market.participants.at(i).id] = num(b.upper);
  }
  return {{"lower", lo},
          {"upper", hi},
          {"q_lower", row_json(record.q.lower)},
          {"q_upper", row_json(record.q.upper)},
          {"gamma", num(record.gamma)},
          {"accepted", record.accepted},
          {"reason", record.reason}};
}

}  // namespace gridtrade
