#pragma once

#include "gridtrade/market_io.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace gridtrade {

// Command-line style overrides of the engine section.
struct EngineOverrides {
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_steps;
  std::optional<std::string> proposer;     // full | exhaustive | random
  std::optional<std::string> curtailment;  // uniform | hybrid
};

// Throws InputError for unknown modes or a non-positive epsilon.
void apply_overrides(MarketFile& file, const EngineOverrides& overrides);

struct RunOutput {
  RunResult result;
  std::string trace;     // JSONL, one record per line
  nlohmann::json report;
};

// Runs the trading process with the file's engine settings and compares the
// outcome against the dispatch oracle when one exists.
RunOutput run_market(const MarketFile& file, const std::string& label = "");

nlohmann::json dispatch_report(const MarketFile& file);
nlohmann::json prices_report(const MarketFile& file);

// Equilibrium check of (y, x, lambda). Missing plans come from a fresh run,
// missing prices from the dispatch.
nlohmann::json equilibrium_report(const MarketFile& file, const std::optional<PlanMatrix>& y,
                                  const std::optional<Eigen::MatrixXd>& x,
                                  const std::optional<Eigen::MatrixXd>& lambda);

// Decomposes the file's decompose section, or the injection of a converged run.
nlohmann::json decomposition_report(const MarketFile& file);

struct RobustOutput {
  std::string trace;
  nlohmann::json summary;
};
RobustOutput robust_run(const MarketFile& file);

}  // namespace gridtrade
