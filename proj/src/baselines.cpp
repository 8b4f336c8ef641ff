#include "joinsearch/baselines.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>

namespace joinsearch {

namespace {

std::vector<AliasId> by_name(const JoinGraph &graph) {
	std::vector<AliasId> ids(graph.size());
	std::iota(ids.begin(), ids.end(), 0);
	std::sort(ids.begin(), ids.end(), [&](AliasId a, AliasId b) { return graph.name(a) < graph.name(b); });
	return ids;
}

} // namespace

PlanChoice dp_leftdeep(const JoinGraph &graph, const Catalog &catalog, bool allow_cross_join, std::size_t limit) {
	const auto n = graph.size();
	if (n > limit) {
		throw TooManyRelations("dp_leftdeep handles at most " + std::to_string(limit) + " relations, got " +
		                       std::to_string(n));
	}
	if (n == 0) {
		throw DegenerateGraph("empty graph");
	}
	const CoutModel model(graph, catalog);
	const std::size_t subsets = std::size_t(1) << n;
	const double inf = std::numeric_limits<double>::infinity();

	// card[S] = card[S - top] * factor(top), the same ascending fold as CoutModel
	std::vector<double> card(subsets, 1.0);
	for (std::size_t s = 1; s < subsets; s++) {
		const auto top = static_cast<AliasId>(std::bit_width(s) - 1);
		const auto rest = s & ~(std::size_t(1) << top);
		double factor = model.weight(top);
		auto row = model.selectivity_row(top);
		for (AliasId j = 0; j < top; j++) {
			if (rest >> j & 1) {
				factor = factor * row[j];
			}
		}
		card[s] = rest == 0 ? factor : card[rest] * factor;
	}

	std::vector<double> best(subsets, inf);
	for (AliasId a = 0; a < n; a++) {
		best[std::size_t(1) << a] = 0.0;
	}
	// subsets in increasing numeric order: every superset comes later
	for (std::size_t s = 1; s < subsets; s++) {
		if (best[s] == inf) {
			continue;
		}
		for (auto m = legal_extensions(graph, s, allow_cross_join); m; m &= m - 1) {
			const auto next = s | (std::size_t(1) << std::countr_zero(m));
			const double cost = best[s] + card[next];
			if (cost < best[next]) {
				best[next] = cost;
			}
		}
	}
	const auto full = subsets - 1;
	if (best[full] == inf) {
		throw NoLegalAction("no connected left-deep order exists; enable cross joins");
	}

	// reach[S]: S extends to the full set along steps that keep every prefix optimal
	std::vector<char> reach(subsets, 0);
	reach[full] = 1;
	for (std::size_t s = full; s-- > 1;) {
		if (best[s] == inf) {
			continue;
		}
		for (auto m = legal_extensions(graph, s, allow_cross_join); m; m &= m - 1) {
			const auto next = s | (std::size_t(1) << std::countr_zero(m));
			if (reach[next] && best[s] + card[next] == best[next]) {
				reach[s] = 1;
				break;
			}
		}
	}

	const auto names = by_name(graph);
	PlanChoice out;
	std::size_t s = 0;
	for (std::size_t step = 0; step < n; step++) {
		const auto legal = step == 0 ? static_cast<AliasMask>(full) : legal_extensions(graph, s, allow_cross_join);
		for (auto a : names) {
			if (!(legal >> a & 1)) {
				continue;
			}
			const auto next = s | (std::size_t(1) << a);
			const bool optimal = step == 0 || best[s] + card[next] == best[next];
			if (optimal && reach[next]) {
				out.order.order.push_back(a);
				s = next;
				break;
			}
		}
	}
	out.cost = best[full];
	return out;
}

PlanChoice goo(const JoinGraph &graph, const Catalog &catalog, bool allow_cross_join) {
	const auto n = graph.size();
	if (n < 2) {
		throw DegenerateGraph("a join order needs at least two aliases");
	}
	const CoutModel model(graph, catalog);
	const auto names = by_name(graph);

	// starting pair; scanning in name order makes the first minimum the lexicographic one
	std::optional<std::pair<AliasId, AliasId>> start;
	double start_card = std::numeric_limits<double>::infinity();
	const bool any_edge = !graph.edges().empty();
	if (!any_edge && !allow_cross_join) {
		throw NoEdges("graph has no join predicates; enable cross joins to order it");
	}
	for (std::size_t i = 0; i < n; i++) {
		for (std::size_t j = i + 1; j < n; j++) {
			const auto a = names[i];
			const auto b = names[j];
			if (any_edge && !(graph.adjacency(a) >> b & 1)) {
				continue;
			}
			const double c = model.subset_cardinality((AliasMask(1) << a) | (AliasMask(1) << b));
			if (c < start_card) {
				start_card = c;
				start = {a, b};
			}
		}
	}

	PlanChoice out;
	out.order.order = {start->first, start->second};
	AliasMask members = (AliasMask(1) << start->first) | (AliasMask(1) << start->second);
	while (out.order.size() < n) {
		const auto legal = legal_extensions(graph, members, allow_cross_join);
		if (legal == 0) {
			throw NoLegalAction("greedy ordering needs a cross join; enable cross joins");
		}
		AliasId pick = 0;
		double pick_card = std::numeric_limits<double>::infinity();
		bool found = false;
		for (auto a : names) {
			if (!(legal >> a & 1)) {
				continue;
			}
			const double c = model.subset_cardinality(members | (AliasMask(1) << a));
			if (!found || c < pick_card) {
				pick = a;
				pick_card = c;
				found = true;
			}
		}
		out.order.order.push_back(pick);
		members |= AliasMask(1) << pick;
	}
	out.cost = model.order_cost(out.order.order);
	return out;
}

PlanChoice geqo_like(const JoinGraph &graph, const OrderCostFn &cost, const GeqoParams &params) {
	if (params.population < 1) {
		throw std::invalid_argument("population must be >= 1");
	}
	if (graph.size() < 2) {
		throw DegenerateGraph("a join order needs at least two aliases");
	}
	Rng rng(params.seed);
	SearchParams random_walk;
	random_walk.exploration_rate = 1.0;
	random_walk.allow_cross_join = params.allow_cross_join;

	struct Individual {
		LeadingExpression order;
		double cost;
	};
	std::vector<Individual> pool;
	for (std::size_t i = 0; i < params.population; i++) {
		auto order = rollout(graph, nullptr, LeadingExpression {}, random_walk, rng);
		const double c = cost(order);
		pool.push_back({std::move(order), c});
	}
	auto tournament = [&]() -> const Individual & {
		const auto &a = pool[rng.uniform_index(pool.size())];
		const auto &b = pool[rng.uniform_index(pool.size())];
		return b.cost < a.cost ? b : a;
	};
	for (std::size_t g = 0; g < params.generations; g++) {
		for (std::size_t k = 0; k < params.population; k++) {
			const auto &pa = tournament();
			const auto &pb = tournament();
			auto child = crossover(graph, pa.order, pb.order, 0, params.allow_cross_join, rng).expr;
			if (rng.bernoulli(params.mutation_rate)) {
				child = mutate(graph, child, 0, params.allow_cross_join, rng).expr;
			}
			const double c = cost(child);
			auto worst = std::max_element(pool.begin(), pool.end(),
			                              [](const Individual &x, const Individual &y) { return x.cost < y.cost; });
			if (c < worst->cost) {
				*worst = {std::move(child), c};
			}
		}
	}
	auto best = std::min_element(pool.begin(), pool.end(),
	                             [](const Individual &x, const Individual &y) { return x.cost < y.cost; });
	return PlanChoice {best->order, best->cost};
}

PlanChoice geqo_like(const JoinGraph &graph, const Catalog &catalog, const GeqoParams &params) {
	const CoutModel model(graph, catalog);
	return geqo_like(graph, [&](const LeadingExpression &e) { return model.order_cost(e.order); }, params);
}

SearchRun single_stage_search(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params,
                              std::uint64_t iterations, std::optional<std::uint64_t> evaluation_budget,
                              std::shared_ptr<CostCache> cache) {
	if (graph.size() < 2) {
		throw DegenerateGraph("a join order needs at least two aliases");
	}
	SearchParams effective = params;
	if (!effective.allow_cross_join && !graph.is_connected()) {
		effective.allow_cross_join = true;
	}
	MctsSearch search(graph, oracle, effective, LeadingExpression {}, Rng(params.seed), std::move(cache));
	search.set_evaluation_budget(evaluation_budget);
	search.run(iterations);
	if (search.best().empty()) {
		throw OracleUnavailable("no expression could be evaluated");
	}
	SearchRun out;
	out.plan = {search.best().best().expr, search.best().best().cost};
	out.oracle_calls = search.evaluator().oracle_calls();
	out.evaluations = search.evaluator().evaluations();
	out.trace = search.take_trace();
	return out;
}

SearchRun mcts_mean(const JoinGraph &graph, CostOracle &oracle, SearchParams params, std::uint64_t iterations,
                    std::shared_ptr<CostCache> cache) {
	params.policy = SearchPolicy::uct_mean;
	return single_stage_search(graph, oracle, params, iterations, std::nullopt, std::move(cache));
}

} // namespace joinsearch
