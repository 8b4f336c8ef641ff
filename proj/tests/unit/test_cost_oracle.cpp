#include "doctest.h"
#include "oracles.hpp"

#include "joinsearch/cost_oracle.hpp"
#include "joinsearch/rng.hpp"
#include "joinsearch/workload_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

using namespace joinsearch;
using joinsearch::testing::chain_fixture;

namespace {

LeadingExpression order_of(const JoinGraph &g, std::initializer_list<const char *> names) {
	std::vector<std::string> v(names.begin(), names.end());
	return LeadingExpression {g.resolve(v)};
}

//! Counts calls and can be told to fail.
class CountingOracle : public CostOracle {
public:
	CountingOracle(const JoinGraph &g, const Catalog &c) : inner(g, c) {
	}
	PlanCost cost(const LeadingExpression &e) override {
		calls++;
		if (fail) {
			throw DbError("boom");
		}
		return inner.cost(e);
	}
	CostSource source() const override {
		return CostSource::synthetic;
	}
	SyntheticOracle inner;
	int calls = 0;
	bool fail = false;
};

//! Final cardinality multiplied out in join order, straight from the catalog.
double literal_final(const JoinGraph &g, const Catalog &c, const std::vector<AliasId> &order) {
	double card = 1.0;
	for (std::size_t k = 0; k < order.size(); k++) {
		const auto &name = g.name(order[k]);
		auto local = c.local_selectivity.find(name);
		card *= c.base_cardinality.at(name) * (local == c.local_selectivity.end() ? 1.0 : local->second);
		for (std::size_t j = 0; j < k; j++) {
			if (auto sel = c.edge(name, g.name(order[j]))) {
				card *= *sel;
			}
		}
	}
	return card;
}

} // namespace

TEST_SUITE("cost_oracle") {

TEST_CASE("chain fixture costs") {
	auto w = chain_fixture();
	auto &g = w.graph;
	CHECK(cost_synthetic(g, *w.catalog, order_of(g, {"b", "c", "a"})) == 1100.0);
	CHECK(cost_synthetic(g, *w.catalog, order_of(g, {"a", "b", "c"})) == 2000.0);
	CHECK(cost_prefix(g, *w.catalog, order_of(g, {"b", "c"})) == 100.0);
	CHECK(cost_prefix(g, *w.catalog, order_of(g, {"b", "c", "a"})) == 1100.0);
	CHECK_THROWS_AS(cost_prefix(g, *w.catalog, order_of(g, {"b"})), InvalidExpression);
	CHECK_THROWS_AS(cost_synthetic(g, *w.catalog, order_of(g, {"b", "c"})), IncompleteExpression);
	CHECK_THROWS_AS(cost_synthetic(g, *w.catalog, LeadingExpression {{0, 0, 1}}), InvalidExpression);
	CHECK_THROWS_AS(cost_synthetic(g, *w.catalog, LeadingExpression {{0, 1, 7}}), InvalidExpression);
}

TEST_CASE("unit two-alias graph") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	Catalog c;
	c.base_cardinality = {{"a", 1}, {"b", 1}};
	c.set_edge("a", "b", 1.0);
	CHECK(cost_synthetic(g, c, LeadingExpression {{0, 1}}) == 1.0);
}

TEST_CASE("missing catalog entries") {
	auto w = chain_fixture();
	Catalog c = *w.catalog;
	c.base_cardinality.erase("c");
	CHECK_THROWS_AS(SyntheticOracle(w.graph, c), MissingCatalogEntry);
	c = *w.catalog;
	c.edge_selectivity.clear();
	CHECK_THROWS_AS(SyntheticOracle(w.graph, c), MissingCatalogEntry);
}

TEST_CASE("canonical cost matches the literal recurrence and an independent evaluation") {
	Rng rng(11);
	for (int trial = 0; trial < 60; trial++) {
		auto t = static_cast<Topology>(trial % 4);
		auto w = generate(t, 3 + trial % 5, rng.next_u64());
		CoutModel model(w.graph, *w.catalog);
		std::vector<AliasId> order(w.graph.size());
		std::iota(order.begin(), order.end(), 0);
		for (int k = 0; k < 20; k++) {
			for (std::size_t i = order.size() - 1; i > 0; i--) {
				std::swap(order[i], order[rng.uniform_index(i + 1)]);
			}
			const double mine = model.order_cost(order);
			CHECK(mine == testing::canonical_cost(w.graph, *w.catalog, order));
			const double literal = testing::literal_cost(w.graph, *w.catalog, order);
			CHECK(std::abs(mine - literal) <= 1e-12 * literal);
		}
	}
}

TEST_CASE("final cardinality is order independent") {
	Rng rng(5);
	for (int trial = 0; trial < 20; trial++) {
		auto w = generate(static_cast<Topology>(trial % 4), 3 + trial % 5, rng.next_u64());
		CoutModel model(w.graph, *w.catalog);
		std::vector<AliasId> order(w.graph.size());
		std::iota(order.begin(), order.end(), 0);
		const double full = model.subset_cardinality(w.graph.all_mask());
		do {
			AliasMask m = 0;
			double last = 0;
			for (auto a : order) {
				m |= AliasMask(1) << a;
				last = model.subset_cardinality(m);
			}
			CHECK(last == full);
			CHECK(std::abs(literal_final(w.graph, *w.catalog, order) - full) <= 1e-12 * full);
		} while (std::next_permutation(order.begin(), order.end()));
	}
}

TEST_CASE("reward normalization") {
	auto w = chain_fixture();
	SyntheticOracle oracle(w.graph, *w.catalog);
	Evaluator ev(w.graph, oracle);
	auto first = ev.evaluate(order_of(w.graph, {"b", "c", "a"}));
	CHECK(first.reward.normalized == 0.5);
	CHECK(first.reward.raw == -1100.0);
	ev.evaluate(order_of(w.graph, {"a", "b", "c"}));
	CHECK(ev.tracker().reward(1100).normalized == 1.0);
	CHECK(ev.tracker().reward(2000).normalized == 0.0);
	CHECK(ev.tracker().reward(1550).normalized == doctest::Approx(0.5));
}

TEST_CASE("normalization is affine: argmax reward is argmin cost") {
	Rng rng(2);
	RewardTracker tracker;
	std::vector<double> costs;
	for (int i = 0; i < 200; i++) {
		costs.push_back(std::exp(rng.uniform01() * 20));
		tracker.observe(costs.back());
	}
	auto best_cost = std::min_element(costs.begin(), costs.end()) - costs.begin();
	std::size_t best_reward = 0;
	for (std::size_t i = 0; i < costs.size(); i++) {
		if (tracker.reward(costs[i]).normalized > tracker.reward(costs[best_reward]).normalized) {
			best_reward = i;
		}
		CHECK(tracker.reward(costs[i]).normalized >= 0.0);
		CHECK(tracker.reward(costs[i]).normalized <= 1.0);
	}
	CHECK(static_cast<std::size_t>(best_cost) == best_reward);
}

TEST_CASE("cache contract") {
	auto w = chain_fixture();
	CountingOracle oracle(w.graph, *w.catalog);
	auto cache = std::make_shared<CostCache>();
	Evaluator ev(w.graph, oracle, cache);
	auto e = order_of(w.graph, {"b", "c", "a"});
	auto a = ev.evaluate(e);
	auto b = ev.evaluate(e);
	CHECK_FALSE(a.cost.cached);
	CHECK(b.cost.cached);
	CHECK(a.cost.cost == b.cost.cost);
	CHECK(oracle.calls == 1);
	CHECK(ev.cache_hits() == 1);
	CHECK(ev.oracle_calls() == 1);
	CHECK(cache->find("b c a") == 1100.0);

	auto other = order_of(w.graph, {"c", "b", "a"});
	ev.evaluate(other);
	CHECK(oracle.calls == 2);
	CHECK(cache->size() == 2);
}

TEST_CASE("cache transparency") {
	auto w = generate(Topology::clique, 6, 9);
	SyntheticOracle oracle(w.graph, *w.catalog);
	Evaluator cached(w.graph, oracle, std::make_shared<CostCache>());
	Evaluator plain(w.graph, oracle);
	Rng rng(3);
	std::vector<AliasId> order(6);
	std::iota(order.begin(), order.end(), 0);
	for (int i = 0; i < 300; i++) {
		for (std::size_t k = order.size() - 1; k > 0; k--) {
			std::swap(order[k], order[rng.uniform_index(k + 1)]);
		}
		auto x = cached.evaluate(LeadingExpression {order});
		auto y = plain.evaluate(LeadingExpression {order});
		CHECK(x.cost.cost == y.cost.cost);
		CHECK(x.reward.normalized == y.reward.normalized);
	}
	CHECK(cached.cache_hits() > 0);
}

TEST_CASE("failed evaluations surface as OracleUnavailable and are not cached") {
	auto w = chain_fixture();
	CountingOracle oracle(w.graph, *w.catalog);
	auto cache = std::make_shared<CostCache>();
	Evaluator ev(w.graph, oracle, cache);
	oracle.fail = true;
	CHECK_THROWS_AS(ev.evaluate(order_of(w.graph, {"b", "c", "a"})), OracleUnavailable);
	CHECK(ev.failures() == 1);
	CHECK(ev.evaluations() == 0);
	CHECK(cache->size() == 0);
	CHECK(ev.tracker().observations() == 0);
	oracle.fail = false;
	CHECK(ev.evaluate(order_of(w.graph, {"b", "c", "a"})).cost.cost == 1100.0);
}

TEST_CASE("cache is single-flight under concurrency") {
	CostCache cache;
	std::atomic<int> computed {0};
	std::vector<std::thread> threads;
	for (int t = 0; t < 8; t++) {
		threads.emplace_back([&] {
			for (int k = 0; k < 50; k++) {
				cache.get_or_compute("key" + std::to_string(k), [&] {
					computed++;
					std::this_thread::yield();
					return double(k);
				});
			}
		});
	}
	for (auto &t : threads) {
		t.join();
	}
	CHECK(computed == 50);
	CHECK(cache.size() == 50);
}

TEST_CASE("cache dump and load") {
	CostCache a;
	a.insert("a b c", 12.5);
	a.insert("b a c", 3.0);
	CostCache b;
	b.load_json(a.dump_json());
	CHECK(b.find("a b c") == 12.5);
	CHECK(b.size() == 2);
	CHECK_THROWS_AS(b.load_json("[1, 2]"), SchemaError);
	CHECK_THROWS_AS(b.load_json(R"({"x": -1})"), SchemaError);
}

} // TEST_SUITE
