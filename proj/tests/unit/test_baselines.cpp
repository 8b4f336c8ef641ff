#include "doctest.h"
#include "oracles.hpp"

#include "joinsearch/baselines.hpp"
#include "joinsearch/workload_gen.hpp"

#include <algorithm>
#include <numeric>

using namespace joinsearch;
using joinsearch::testing::chain_fixture;

TEST_SUITE("baselines") {

TEST_CASE("dp on the chain fixture") {
	auto w = chain_fixture();
	auto r = dp_leftdeep(w.graph, *w.catalog);
	CHECK(r.cost == 1100.0);
	CHECK(w.graph.order_key(r.order.order) == "b c a");
}

TEST_CASE("dp on two aliases takes the lexicographic orientation") {
	auto g = parse_sql("SELECT * FROM t1 y, t2 x WHERE y.a = x.b");
	Catalog c;
	c.base_cardinality = {{"x", 3}, {"y", 9}};
	c.set_edge("x", "y", 0.5);
	auto r = dp_leftdeep(g, c);
	CHECK(r.cost == 13.5);
	CHECK(g.order_key(r.order.order) == "x y");
}

TEST_CASE("dp equals brute force exactly") {
	Rng rng(100);
	for (int i = 0; i < 100; i++) {
		const auto n = 4 + i % 5;
		auto w = generate(static_cast<Topology>(i % 4), n, rng.next_u64());
		CAPTURE(w.graph.label);
		auto dp = dp_leftdeep(w.graph, *w.catalog);
		auto bf = testing::brute_force(w.graph, *w.catalog);
		CHECK(dp.cost == bf.cost);
		CHECK(dp.order.order == bf.order);
	}
}

TEST_CASE("dp with cross joins on a disconnected graph") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b, t3 c, t4 d WHERE a.x = b.y AND c.z = d.w");
	Catalog c;
	c.base_cardinality = {{"a", 100}, {"b", 10}, {"c", 1000}, {"d", 5}};
	c.set_edge("a", "b", 0.1);
	c.set_edge("c", "d", 0.01);
	CHECK_THROWS_AS(dp_leftdeep(g, c), NoLegalAction);
	auto r = dp_leftdeep(g, c, true);
	auto bf = testing::brute_force(g, c, true);
	CHECK(r.cost == bf.cost);
	CHECK(r.order.order == bf.order);
}

TEST_CASE("dp size limit") {
	auto w = generate(Topology::chain, 17, 1);
	CHECK_THROWS_AS(dp_leftdeep(w.graph, *w.catalog), TooManyRelations);
	auto small = generate(Topology::chain, 6, 1);
	CHECK_THROWS_AS(dp_leftdeep(small.graph, *small.catalog, false, 5), TooManyRelations);
}

TEST_CASE("goo") {
	auto w = chain_fixture();
	auto r = goo(w.graph, *w.catalog);
	CHECK(w.graph.order_key(r.order.order) == "b c a");
	CHECK(r.cost == 1100.0);

	auto g = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	Catalog c;
	c.base_cardinality = {{"a", 5}, {"b", 7}};
	c.set_edge("a", "b", 1.0);
	CHECK(goo(g, c).order.size() == 2);
}

TEST_CASE("goo gets trapped on some generated instance") {
	std::size_t worse = 0;
	for (const auto &entry : acceptance_corpus_spec()) {
		for (std::size_t i = 0; i < entry.count; i++) {
			auto w = generate(entry.topology, entry.n, instance_seed(0, entry.topology, entry.n, i));
			auto g = goo(w.graph, *w.catalog);
			auto d = dp_leftdeep(w.graph, *w.catalog);
			CHECK(testing::valid_order(w.graph, g.order.order, false));
			CHECK(d.cost <= g.cost);
			worse += g.cost > d.cost;
		}
	}
	CHECK(worse >= 1);
}

TEST_CASE("geqo") {
	auto w = chain_fixture();
	GeqoParams p;
	p.population = 20;
	p.generations = 50;
	for (std::uint64_t seed : {1, 2, 3}) {
		p.seed = seed;
		CHECK(geqo_like(w.graph, *w.catalog, p).cost == 1100.0);
	}

	GeqoParams one;
	one.population = 1;
	one.generations = 0;
	auto r = geqo_like(w.graph, *w.catalog, one);
	CHECK(testing::valid_order(w.graph, r.order.order, false));
	CHECK(r.cost == testing::canonical_cost(w.graph, *w.catalog, r.order.order));

	auto big = generate(Topology::star, 8, 3);
	GeqoParams q;
	q.seed = 7;
	auto x = geqo_like(big.graph, *big.catalog, q);
	auto y = geqo_like(big.graph, *big.catalog, q);
	CHECK(x.order == y.order);
	CHECK(testing::valid_order(big.graph, x.order.order, false));
	CHECK(dp_leftdeep(big.graph, *big.catalog).cost <= x.cost);
}

TEST_CASE("mcts_mean on the chain fixture") {
	auto w = chain_fixture();
	SyntheticOracle oracle(w.graph, *w.catalog);
	SearchParams p;
	p.seed = 4;
	auto r = mcts_mean(w.graph, oracle, p, 500);
	CHECK(r.plan.cost == 1100.0);
	CHECK(r.oracle_calls >= 1);
}

TEST_CASE("single-stage search respects its evaluation budget") {
	auto w = generate(Topology::clique, 8, 5);
	SyntheticOracle oracle(w.graph, *w.catalog);
	SearchParams p;
	auto r = single_stage_search(w.graph, oracle, p, 100000, 300);
	CHECK(r.evaluations <= 300);
	CHECK(r.evaluations >= 250);
}

TEST_CASE("orders with the same subset chain cost the same") {
	Rng rng(9);
	for (int i = 0; i < 200; i++) {
		auto w = generate(Topology::clique, 7, rng.next_u64());
		CoutModel model(w.graph, *w.catalog);
		std::vector<AliasId> a(7);
		std::iota(a.begin(), a.end(), 0);
		for (std::size_t k = 6; k > 0; k--) {
			std::swap(a[k], a[rng.uniform_index(k + 1)]);
		}
		// swapping the first two keeps every prefix subset from length 2 on
		auto b = a;
		std::swap(b[0], b[1]);
		CHECK(model.order_cost(a) == model.order_cost(b));
	}
}

} // TEST_SUITE
