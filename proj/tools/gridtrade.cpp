#include "gridtrade/commands.hpp"
#include "gridtrade/errors.hpp"
#include "gridtrade/market_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridtrade;

namespace {

enum Exit { ok = 0, verdict_false = 1, input_error = 2, not_converged = 3, internal = 4 };

struct Options {
  std::string market;
  EngineOverrides engine;
  std::string out;
  int batch = 1;
  std::string report;  // check-eq: previous run report
  std::string prices;  // check-eq: price file
};

MarketFile load(const Options& o) {
  MarketFile f = load_market(o.market);
  apply_overrides(f, o.engine);
  return f;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string() + ": cannot write");
  out << text;
}

// Prints the document and, with --out, stores it under the given name too.
void emit(const Options& o, const std::string& name, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  std::cout << text;
  if (!o.out.empty()) write_file(fs::path(o.out) / name, text);
}

int cmd_run(const Options& o) {
  const MarketFile base = load(o);
  if (o.batch < 1) throw InputError("--batch must be at least 1");
  std::vector<std::future<RunOutput>> jobs;
  for (int k = 0; k < o.batch; ++k) {
    MarketFile f = base;
    f.engine.seed = base.engine.seed + static_cast<std::uint64_t>(k);
    f.proposer.seed = f.engine.seed;
    jobs.push_back(std::async(o.batch > 1 ? std::launch::async : std::launch::deferred,
                              [f, path = o.market] { return run_market(f, path); }));
  }
  int code = ok;
  json reports = json::array();
  for (int k = 0; k < o.batch; ++k) {
    RunOutput r = jobs[static_cast<std::size_t>(k)].get();
    spdlog::info("seed {}: {} records, converged {}", base.engine.seed + static_cast<std::uint64_t>(k),
                 r.result.state.records.size(), r.result.converged);
    if (!o.out.empty()) {
      const fs::path dir = o.batch > 1 ? fs::path(o.out) / ("seed_" + std::to_string(base.engine.seed + static_cast<std::uint64_t>(k)))
                                       : fs::path(o.out);
      write_file(dir / "trace.jsonl", r.trace);
      write_file(dir / "report.json", r.report.dump(2) + "\n");
    }
    if (!r.result.converged) code = not_converged;
    reports.push_back(std::move(r.report));
  }
  std::cout << (o.batch > 1 ? reports : reports[0]).dump(2) << "\n";
  return code;
}

int cmd_dispatch(const Options& o) {
  emit(o, "dispatch.json", dispatch_report(load(o)));
  return ok;
}

int cmd_prices(const Options& o) {
  emit(o, "prices.json", prices_report(load(o)));
  return ok;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON: " + e.what());
  }
}

Eigen::MatrixXd matrix_from(const json& j, int rows, int cols, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) throw InputError(what + ": wrong number of rows");
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) throw InputError(what + ": wrong number of columns");
    for (int c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw InputError(what + ": expected numbers");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

int cmd_check_eq(const Options& o) {
  const MarketFile f = load(o);
  const Market& m = f.market;
  std::optional<PlanMatrix> y;
  std::optional<Eigen::MatrixXd> x, lambda;
  if (!o.report.empty()) {
    const json rep = read_json(o.report);
    if (!rep.contains("final_state")) throw InputError(o.report + ": final_state missing");
    const json& ys = rep["final_state"]["y"];
    y = PlanMatrix::Zero(m.participant_count(), m.scenario_count());
    for (int i = 0; i < m.participant_count(); ++i) {
      const std::string& id = m.participants[static_cast<std::size_t>(i)].id;
      if (!ys.contains(id)) throw InputError(o.report + ": final_state.y." + id + " missing");
      y->row(i) = matrix_from(json::array({ys[id]}), 1, m.scenario_count(), "final_state.y." + id);
    }
    x = matrix_from(rep["final_state"]["x"], m.bus_count(), m.scenario_count(), "final_state.x");
  }
  if (!o.prices.empty()) {
    const json p = read_json(o.prices);
    lambda = matrix_from(p.contains("lambda") ? p["lambda"] : p, m.bus_count(), m.scenario_count(), "lambda");
  }
  const json report = equilibrium_report(f, y, x, lambda);
  emit(o, "equilibrium.json", report);
  return report["verdict"].get<bool>() ? ok : verdict_false;
}

int cmd_decompose(const Options& o) {
  emit(o, "decomposition.json", decomposition_report(load(o)));
  return ok;
}

int cmd_robust_run(const Options& o) {
  const RobustOutput r = robust_run(load(o));
  if (!o.out.empty()) write_file(fs::path(o.out) / "robust_trace.jsonl", r.trace);
  emit(o, "robust_report.json", r.summary);
  return ok;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("gridtrade");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("GRIDTRADE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Coordinated multilateral trading on a DC network"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("market", o.market, "Market JSON file")->required();
    sub->add_option("--epsilon", o.engine.epsilon, "Worthiness threshold ($)");
    sub->add_option("--seed", o.engine.seed, "RNG seed");
    sub->add_option("--max-steps", o.engine.max_steps, "Proposer rounds before giving up");
    sub->add_option("--proposer", o.engine.proposer, "full | exhaustive | random")
        ->check(CLI::IsMember({"full", "exhaustive", "random"}));
    sub->add_option("--curtailment", o.engine.curtailment, "uniform | hybrid")->check(CLI::IsMember({"uniform", "hybrid"}));
    sub->add_option("--out", o.out, "Directory for output files");
  };
  auto* run = app.add_subcommand("run", "Run the trading process");
  add_common(run);
  run->add_option("--batch", o.batch, "Run this many consecutive seeds in parallel");
  auto* dispatch = app.add_subcommand("dispatch", "Solve the centralized dispatch");
  add_common(dispatch);
  auto* prices = app.add_subcommand("prices", "Contingent locational prices");
  add_common(prices);
  auto* check = app.add_subcommand("check-eq", "Check equilibrium conditions");
  add_common(check);
  check->add_option("--report", o.report, "report.json of a previous run (default: run now)");
  check->add_option("--prices", o.prices, "Price file (default: dispatch prices)");
  auto* decompose = app.add_subcommand("decompose", "Bilateral decompositions on a radial network");
  add_common(decompose);
  auto* robust = app.add_subcommand("robust-run", "Apply interval trades with robust curtailment");
  add_common(robust);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : input_error;
  }

  try {
    if (*run) return cmd_run(o);
    if (*dispatch) return cmd_dispatch(o);
    if (*prices) return cmd_prices(o);
    if (*check) return cmd_check_eq(o);
    if (*decompose) return cmd_decompose(o);
    if (*robust) return cmd_robust_run(o);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return input_error;
  } catch (const StructuralError& e) {
    spdlog::error("{}", e.what());
    return input_error;
  } catch (const DomainError& e) {
    spdlog::error("{}", e.what());
    return input_error;
  } catch (const UnsupportedError& e) {
    spdlog::error("{}", e.what());
    return input_error;
  } catch (const PreconditionError& e) {
    spdlog::error("{}", e.what());
    return input_error;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return internal;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return internal;
  }
  return internal;
}
