#include "joinsearch/two_stage.hpp"

#include <atomic>
#include <exception>
#include <thread>

namespace joinsearch {

namespace {

struct SeedRun {
	EdgeSeed seed;
	std::vector<TraceRecord> trace;
	std::uint64_t oracle_calls = 0;
	std::uint64_t cache_hits = 0;
	std::uint64_t evaluations = 0;
};

struct RunOutcome {
	std::optional<BestQueue::Entry> best;
	std::vector<TraceRecord> trace;
};

RunOutcome run_search(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params,
                      const LeadingExpression &prefix, Rng rng, const std::shared_ptr<CostCache> &cache,
                      std::uint64_t iterations, const std::string &stage, std::int64_t edge, SeedRun &totals) {
	MctsSearch search(graph, oracle, params, prefix, rng, cache);
	search.set_trace_label(stage, edge);
	search.run(iterations);
	totals.oracle_calls += search.evaluator().oracle_calls();
	totals.cache_hits += search.evaluator().cache_hits();
	totals.evaluations += search.evaluator().evaluations();
	RunOutcome out;
	if (!search.best().empty()) {
		out.best = search.best().best();
	}
	out.trace = search.take_trace();
	return out;
}

SeedRun seed_edge(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params, std::size_t index,
                  std::uint64_t t_pair, const std::shared_ptr<CostCache> &cache) {
	const auto &edge = graph.edges()[index];
	const Rng rng = Rng(params.seed).split(index);
	const LeadingExpression forward {{edge.left, edge.right}};
	const LeadingExpression backward {{edge.right, edge.left}};
	const auto label = static_cast<std::int64_t>(index);

	SeedRun run;
	run.seed.edge = index;
	auto take = [&](RunOutcome &outcome, const LeadingExpression &prefix) {
		if (outcome.best && outcome.best->cost < run.seed.best_cost) {
			run.seed.best_cost = outcome.best->cost;
			run.seed.best = outcome.best->expr;
			run.seed.prefix = prefix;
		}
		for (auto &r : outcome.trace) {
			run.trace.push_back(std::move(r));
		}
	};

	if (const auto *model = oracle.model()) {
		// prefix costs are known up front; the declared orientation wins ties
		const bool flip = model->order_cost(backward.order) < model->order_cost(forward.order);
		const auto &prefix = flip ? backward : forward;
		run.seed.prefix = prefix;
		auto outcome = run_search(graph, oracle, params, prefix, rng, cache, t_pair, "stage1", label, run);
		take(outcome, prefix);
		return run;
	}

	// no prefix costing: split the budget between the two orientations
	run.seed.prefix = forward;
	const auto first = (t_pair + 1) / 2;
	const auto second = t_pair / 2;
	auto outcome = run_search(graph, oracle, params, forward, rng.split(0), cache, first, "stage1", label, run);
	take(outcome, forward);
	if (second > 0) {
		outcome = run_search(graph, oracle, params, backward, rng.split(1), cache, second, "stage1", label, run);
		take(outcome, backward);
	}
	return run;
}

} // namespace

TwoStageResult optimize(const JoinGraph &graph, CostOracle &oracle, const TwoStageConfig &config) {
	config.params.validate();
	if (config.t_pair < 1 || config.t_main < 1) {
		throw std::invalid_argument("t_pair and t_main must be positive");
	}
	if (graph.size() < 2) {
		throw DegenerateGraph("a join order needs at least two aliases");
	}
	if (config.warm_start) {
		validate_expression(graph, *config.warm_start, true);
	}

	TwoStageResult result;
	result.trace_enabled = config.params.trace;
	SearchParams params = config.params;
	auto cache = config.cache ? config.cache : std::make_shared<CostCache>();

	if (graph.edges().empty()) {
		if (!params.allow_cross_join) {
			throw NoEdges("graph has no join predicates; enable cross joins to order it");
		}
		SeedRun totals;
		MctsSearch search(graph, oracle, params, LeadingExpression {}, Rng(params.seed), cache);
		if (config.warm_start) {
			result.warm_start_cost = search.inject(*config.warm_start);
		}
		search.run(config.t_main);
		result.single_stage = true;
		result.queue = search.best();
		result.trace = search.take_trace();
		result.stage2_calls = search.evaluator().oracle_calls();
		result.cache_hits = search.evaluator().cache_hits();
		result.evaluations = search.evaluator().evaluations();
		if (result.queue.empty()) {
			throw OracleUnavailable("no expression could be evaluated");
		}
		result.best = result.queue.best().expr;
		result.best_cost = result.queue.best().cost;
		return result;
	}
	if (!params.allow_cross_join && !graph.is_connected()) {
		params.allow_cross_join = true;
		result.cross_join_fallback = true;
	}

	// Stage 1
	const auto n_edges = graph.edges().size();
	std::vector<std::optional<SeedRun>> runs(n_edges);
	std::vector<std::exception_ptr> errors(n_edges);
	const auto workers = std::max<std::size_t>(1, std::min(config.workers, n_edges));
	if (workers == 1) {
		for (std::size_t i = 0; i < n_edges; i++) {
			runs[i] = seed_edge(graph, oracle, params, i, config.t_pair, cache);
		}
	} else {
		std::atomic<std::size_t> next {0};
		auto work = [&] {
			for (auto i = next++; i < n_edges; i = next++) {
				try {
					runs[i] = seed_edge(graph, oracle, params, i, config.t_pair, cache);
				} catch (...) {
					errors[i] = std::current_exception();
				}
			}
		};
		std::vector<std::thread> pool;
		for (std::size_t w = 0; w < workers; w++) {
			pool.emplace_back(work);
		}
		for (auto &t : pool) {
			t.join();
		}
		for (auto &e : errors) {
			if (e) {
				std::rethrow_exception(e);
			}
		}
	}

	auto &stage1 = result.stage1;
	for (std::size_t i = 0; i < n_edges; i++) {
		auto &run = *runs[i];
		if (run.seed.best_cost < stage1.winner_cost) {
			stage1.winner_cost = run.seed.best_cost;
			stage1.winner = i;
		}
		result.stage1_calls += run.oracle_calls;
		result.cache_hits += run.cache_hits;
		result.evaluations += run.evaluations;
		for (auto &r : run.trace) {
			result.trace.push_back(std::move(r));
		}
		stage1.per_edge.push_back(std::move(run.seed));
	}
	if (!stage1.winner) {
		throw OracleUnavailable("every stage-1 evaluation failed");
	}

	// Stage 2
	const auto &winner = stage1.per_edge[*stage1.winner];
	result.stage2_prefix = winner.prefix;
	MctsSearch search(graph, oracle, params, winner.prefix, Rng(params.seed).split(n_edges), cache);
	search.set_trace_label("stage2", -1);
	search.inject(*winner.best);
	if (config.warm_start) {
		const auto &w = *config.warm_start;
		if (std::equal(winner.prefix.order.begin(), winner.prefix.order.end(), w.order.begin())) {
			result.warm_start_cost = search.inject(w);
		}
	}
	search.run(config.t_main);
	result.stage2_calls = search.evaluator().oracle_calls();
	result.cache_hits += search.evaluator().cache_hits();
	result.evaluations += search.evaluator().evaluations();
	for (auto &r : search.take_trace()) {
		result.trace.push_back(std::move(r));
	}
	result.queue = search.best();

	if (config.warm_start && !result.warm_start_cost) {
		// inconsistent with p*: still a candidate for the final answer
		Evaluator side(graph, oracle, cache);
		try {
			auto eval = side.evaluate(*config.warm_start);
			result.warm_start_cost = eval.cost.cost;
			result.queue.insert(*config.warm_start, eval.cost.cost, graph.order_key(config.warm_start->order));
		} catch (const OracleUnavailable &) {
		}
		result.stage2_calls += side.oracle_calls();
		result.cache_hits += side.cache_hits();
		result.evaluations += side.evaluations();
	}

	result.best = result.queue.best().expr;
	result.best_cost = result.queue.best().cost;
	return result;
}

BudgetReport budget_report(const TwoStageResult &result) {
	if (!result.trace_enabled) {
		throw TraceMissing("budget report needs a traced run");
	}
	return BudgetReport {result.stage1_calls, result.stage2_calls, result.cache_hits};
}

} // namespace joinsearch
