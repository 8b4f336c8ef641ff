#include "doctest.h"
#include "oracles.hpp"

#include "joinsearch/baselines.hpp"
#include "joinsearch/two_stage.hpp"
#include "joinsearch/workload_gen.hpp"

#include <algorithm>

using namespace joinsearch;
using joinsearch::testing::chain_fixture;

namespace {

TwoStageConfig small_config(std::uint64_t seed, std::uint64_t t_pair = 50, std::uint64_t t_main = 500) {
	TwoStageConfig cfg;
	cfg.params.seed = seed;
	cfg.t_pair = t_pair;
	cfg.t_main = t_main;
	return cfg;
}

} // namespace

TEST_SUITE("two_stage") {

TEST_CASE("chain fixture reaches the optimum for any seed") {
	auto w = chain_fixture();
	for (std::uint64_t seed : {0, 1, 2, 99, 12345}) {
		SyntheticOracle oracle(w.graph, *w.catalog);
		auto r = optimize(w.graph, oracle, small_config(seed));
		CHECK(r.best_cost == 1100.0);
		CHECK(r.stage1.per_edge.size() == 2);
		REQUIRE(r.stage1.winner);
		CHECK(r.stage1.winner_cost == 1100.0);
		CHECK(r.best_cost <= r.stage1.winner_cost);
		CHECK(testing::valid_order(w.graph, r.best.order, false));
	}
}

TEST_CASE("two aliases") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	Catalog c;
	c.base_cardinality = {{"a", 50}, {"b", 70}};
	c.set_edge("a", "b", 0.1);
	SyntheticOracle oracle(g, c);
	auto r = optimize(g, oracle, small_config(3));
	CHECK(r.best_cost == 350.0);
	CHECK(r.best.size() == 2);
	CHECK(r.stage1.per_edge.size() == 1);
}

TEST_CASE("degenerate inputs") {
	JoinGraph one;
	one.add_alias("a", "t");
	Catalog c;
	c.base_cardinality = {{"a", 10}};
	SyntheticOracle oracle(one, c);
	CHECK_THROWS_AS(optimize(one, oracle, small_config(1)), DegenerateGraph);

	auto none = parse_sql("SELECT * FROM t1 a, t2 b, t3 c");
	Catalog nc;
	nc.base_cardinality = {{"a", 10}, {"b", 20}, {"c", 30}};
	SyntheticOracle no_edges(none, nc);
	CHECK_THROWS_AS(optimize(none, no_edges, small_config(1)), NoEdges);
	auto cfg = small_config(1);
	cfg.params.allow_cross_join = true;
	auto r = optimize(none, no_edges, cfg);
	CHECK(r.single_stage);
	// cheapest cross product order starts with the two smallest tables
	CHECK(r.best_cost == 200.0 + 6000.0);
}

TEST_CASE("disconnected graph falls back to cross joins") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b, t3 c, t4 d WHERE a.x = b.y AND c.z = d.w");
	Catalog c;
	c.base_cardinality = {{"a", 100}, {"b", 10}, {"c", 1000}, {"d", 5}};
	c.set_edge("a", "b", 0.1);
	c.set_edge("c", "d", 0.01);
	SyntheticOracle oracle(g, c);
	auto r = optimize(g, oracle, small_config(4, 20, 200));
	CHECK(r.cross_join_fallback);
	CHECK(r.best_cost == testing::brute_force(g, c, true).cost);
}

TEST_CASE("stage-1 tie goes to the earlier edge") {
	auto g = parse_sql("SELECT * FROM t0 h, t1 s1, t2 s2 WHERE h.x = s1.x AND h.x = s2.x");
	Catalog c;
	c.base_cardinality = {{"h", 100}, {"s1", 40}, {"s2", 40}};
	c.set_edge("h", "s1", 0.05);
	c.set_edge("h", "s2", 0.05);
	SyntheticOracle oracle(g, c);
	auto r = optimize(g, oracle, small_config(8, 20, 20));
	REQUIRE(r.stage1.winner);
	CHECK(r.stage1.per_edge[0].best_cost == r.stage1.per_edge[1].best_cost);
	CHECK(*r.stage1.winner == 0);
}

TEST_CASE("stage-1 coverage and call accounting") {
	auto w = generate(Topology::cycle, 8, 31);
	SyntheticOracle oracle(w.graph, *w.catalog);
	auto cfg = small_config(5, 30, 200);
	cfg.params.mutation_rate = 0;
	cfg.params.gp_rate = 0;
	cfg.params.trace = true;
	auto r = optimize(w.graph, oracle, cfg);
	CHECK(r.stage1.per_edge.size() == w.graph.edges().size());
	for (std::size_t i = 0; i < r.stage1.per_edge.size(); i++) {
		CHECK(r.stage1.per_edge[i].edge == i);
		CHECK(r.stage1.winner_cost <= r.stage1.per_edge[i].best_cost);
	}
	auto report = budget_report(r);
	CHECK(report.stage1_calls <= w.graph.edges().size() * cfg.t_pair);
	CHECK(report.stage1_calls + report.stage2_calls == oracle.calls());
	CHECK(r.best_cost <= r.stage1.winner_cost);

	// a rerun against the same cache touches the oracle zero times
	auto cfg2 = cfg;
	cfg2.cache = std::make_shared<CostCache>();
	SyntheticOracle fresh(w.graph, *w.catalog);
	auto first = optimize(w.graph, fresh, cfg2);
	const auto calls = fresh.calls();
	auto again = optimize(w.graph, fresh, cfg2);
	CHECK(fresh.calls() == calls);
	auto rerun = budget_report(again);
	CHECK(rerun.stage1_calls == 0);
	CHECK(rerun.stage2_calls == 0);
	CHECK(rerun.cache_hits == again.evaluations);
	CHECK(again.best_cost == first.best_cost);
}

TEST_CASE("budget report requires a trace") {
	auto w = chain_fixture();
	SyntheticOracle oracle(w.graph, *w.catalog);
	auto r = optimize(w.graph, oracle, small_config(1, 5, 5));
	CHECK_THROWS_AS(budget_report(r), TraceMissing);
}

TEST_CASE("warm start dominance") {
	Rng rng(14);
	for (int i = 0; i < 10; i++) {
		auto w = generate(static_cast<Topology>(i % 4), 8, rng.next_u64());
		auto warm = dp_leftdeep(w.graph, *w.catalog);
		SyntheticOracle oracle(w.graph, *w.catalog);
		auto cfg = small_config(i, 2, 5);
		cfg.warm_start = warm.order;
		auto r = optimize(w.graph, oracle, cfg);
		REQUIRE(r.warm_start_cost);
		CHECK(*r.warm_start_cost == warm.cost);
		CHECK(r.best_cost <= warm.cost);
	}
}

TEST_CASE("more main iterations never hurt") {
	Rng rng(15);
	for (int i = 0; i < 8; i++) {
		auto w = generate(static_cast<Topology>(i % 4), 9, rng.next_u64());
		double prev = INFINITY;
		for (std::uint64_t t_main : {1, 10, 50, 200, 600}) {
			SyntheticOracle oracle(w.graph, *w.catalog);
			auto r = optimize(w.graph, oracle, small_config(i, 10, t_main));
			CHECK(r.best_cost <= prev);
			prev = r.best_cost;
		}
	}
}

TEST_CASE("worker count does not change the result") {
	auto w = generate(Topology::clique, 8, 41);
	TwoStageResult base;
	for (std::size_t workers : {1, 2, 4, 8}) {
		SyntheticOracle oracle(w.graph, *w.catalog);
		auto cfg = small_config(6, 40, 100);
		cfg.workers = workers;
		auto r = optimize(w.graph, oracle, cfg);
		if (workers == 1) {
			base = r;
			continue;
		}
		CHECK(r.best == base.best);
		CHECK(r.best_cost == base.best_cost);
		CHECK(r.stage1_calls == base.stage1_calls);
		REQUIRE(r.stage1.per_edge.size() == base.stage1.per_edge.size());
		for (std::size_t e = 0; e < r.stage1.per_edge.size(); e++) {
			CHECK(r.stage1.per_edge[e].best_cost == base.stage1.per_edge[e].best_cost);
		}
	}
}

} // TEST_SUITE
