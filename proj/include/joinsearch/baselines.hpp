#pragma once

#include "joinsearch/search_core.hpp"

#include <functional>

namespace joinsearch {

constexpr std::size_t DP_DEFAULT_LIMIT = 16;

struct PlanChoice {
	LeadingExpression order;
	double cost = 0.0;
};

//! Exact minimum over left-deep orders (connected extensions only unless
//! cross joins are allowed) by a DP over alias subsets. Among optimal orders
//! the lexicographically smallest alias string is returned.
PlanChoice dp_leftdeep(const JoinGraph &graph, const Catalog &catalog, bool allow_cross_join = false,
                       std::size_t limit = DP_DEFAULT_LIMIT);

//! Greedy Operator Ordering: cheapest joined pair first, then the cheapest
//! incremental extension; ties go to the smaller alias name.
PlanChoice goo(const JoinGraph &graph, const Catalog &catalog, bool allow_cross_join = false);

struct GeqoParams {
	std::size_t population = 32;
	std::size_t generations = 40;
	double mutation_rate = 0.2;
	std::uint64_t seed = 0;
	bool allow_cross_join = false;
};

using OrderCostFn = std::function<double(const LeadingExpression &)>;

//! Steady-state GA over complete orders: binary tournaments, order crossover,
//! swap mutation; a child replaces the worst individual only if cheaper.
//! Each generation produces `population` children.
PlanChoice geqo_like(const JoinGraph &graph, const OrderCostFn &cost, const GeqoParams &params);
PlanChoice geqo_like(const JoinGraph &graph, const Catalog &catalog, const GeqoParams &params);

struct SearchRun {
	PlanChoice plan;
	std::uint64_t oracle_calls = 0;
	std::uint64_t evaluations = 0;
	std::vector<TraceRecord> trace;
};

//! One search from the empty prefix. `evaluation_budget` stops it early.
SearchRun single_stage_search(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params,
                              std::uint64_t iterations, std::optional<std::uint64_t> evaluation_budget = std::nullopt,
                              std::shared_ptr<CostCache> cache = nullptr);

//! single_stage_search with the mean policy.
SearchRun mcts_mean(const JoinGraph &graph, CostOracle &oracle, SearchParams params, std::uint64_t iterations,
                    std::shared_ptr<CostCache> cache = nullptr);

} // namespace joinsearch
