#pragma once

#include "gridtrade/dispatch.hpp"
#include "gridtrade/market.hpp"
#include "gridtrade/proposer.hpp"
#include "gridtrade/robust.hpp"
#include "gridtrade/trading.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace gridtrade {

// Optional per-scenario nodal trade to decompose, with the state it starts from
// and linear per-bus marginal values for the profitability test.
struct DecomposeInput {
  std::vector<std::vector<double>> trade;  // S' x N
  std::vector<std::vector<double>> state;  // S' x N, zeros when omitted
  std::optional<std::vector<double>> alpha;
};

struct MarketFile {
  Market market;
  EngineConfig engine;
  ProposerStrategy proposer;
  std::optional<DecomposeInput> decompose;
  std::vector<IntervalTrade> robust_trades;
};

// Parses a market document. Schema problems raise InputError with a message
// of the form "<json path>: <problem>".
MarketFile parse_market(const nlohmann::json& doc);
MarketFile load_market(const std::string& path);
MarketFile parse_market_text(const std::string& text);

nlohmann::json market_to_json(const MarketFile& file);

// Value rounded to 12 significant digits; -0 becomes 0.
double round12(double value);

nlohmann::json trace_line(const Market& market, const TradeRecord& record);
std::string trace_jsonl(const Market& market, const std::vector<TradeRecord>& records);

nlohmann::json plans_to_json(const Market& market, const PlanMatrix& plans);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // row-major nested arrays

nlohmann::json dispatch_to_json(const Market& market, const DispatchSolution& solution);
nlohmann::json prices_to_json(const Market& market, const PriceSystem& prices);
nlohmann::json equilibrium_to_json(const Market& market, const EquilibriumReport& report);
nlohmann::json interval_record_to_json(const Market& market, const IntervalRecord& record);

nlohmann::json engine_to_json(const EngineConfig& engine, const ProposerStrategy& proposer);

}  // namespace gridtrade
