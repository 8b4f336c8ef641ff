#pragma once

#include "joinsearch/search_core.hpp"

#include <limits>

namespace joinsearch {

struct TwoStageConfig {
	SearchParams params;
	std::uint64_t t_pair = 50;
	std::uint64_t t_main = 2000;
	std::optional<LeadingExpression> warm_start;
	//! Shared across all runs of one optimize call; created when null.
	std::shared_ptr<CostCache> cache;
	//! Concurrent stage-1 runs. The oracle must tolerate concurrent cost() calls.
	std::size_t workers = 1;
};

struct EdgeSeed {
	std::size_t edge = 0;
	LeadingExpression prefix; // orientation that seeded the run
	double best_cost = std::numeric_limits<double>::infinity();
	std::optional<LeadingExpression> best;
};

struct StageOneResult {
	std::vector<EdgeSeed> per_edge; // in edge order, one per edge
	std::optional<std::size_t> winner;
	double winner_cost = std::numeric_limits<double>::infinity();
};

struct TwoStageResult {
	LeadingExpression best;
	double best_cost = 0.0;
	StageOneResult stage1;
	LeadingExpression stage2_prefix;
	BestQueue queue {1};
	std::optional<double> warm_start_cost;
	bool trace_enabled = false;
	std::vector<TraceRecord> trace;
	std::uint64_t stage1_calls = 0;
	std::uint64_t stage2_calls = 0;
	std::uint64_t cache_hits = 0;
	std::uint64_t evaluations = 0;
	//! Set when the graph was disconnected and cross joins had to be enabled.
	bool cross_join_fallback = false;
	//! Set when the graph had no edges and one search ran from the empty prefix.
	bool single_stage = false;

	std::uint64_t oracle_calls() const {
		return stage1_calls + stage2_calls;
	}
};

//! Stage 1 seeds one search per edge (T_pair iterations each); stage 2 refines
//! the cheapest edge's prefix for T_main iterations.
TwoStageResult optimize(const JoinGraph &graph, CostOracle &oracle, const TwoStageConfig &config);

struct BudgetReport {
	std::uint64_t stage1_calls = 0;
	std::uint64_t stage2_calls = 0;
	std::uint64_t cache_hits = 0;
};

//! Throws TraceMissing unless the run was traced.
BudgetReport budget_report(const TwoStageResult &result);

} // namespace joinsearch
