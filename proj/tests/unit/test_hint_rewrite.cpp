#include "doctest.h"
#include "oracles.hpp"

#include "joinsearch/hint_rewrite.hpp"
#include "joinsearch/search_core.hpp"
#include "joinsearch/workload_gen.hpp"

#include <algorithm>
#include <set>

using namespace joinsearch;
using joinsearch::testing::chain_fixture;

static const std::string DATA = JOINSEARCH_TEST_DATA;

namespace {

LeadingExpression order_of(const JoinGraph &g, std::initializer_list<const char *> names) {
	std::vector<std::string> v(names.begin(), names.end());
	return LeadingExpression {g.resolve(v)};
}

std::set<std::pair<std::string, std::string>> edge_pairs(const JoinGraph &g) {
	std::set<std::pair<std::string, std::string>> out;
	for (const auto &e : g.edges()) {
		auto a = g.name(e.left), b = g.name(e.right);
		out.insert(std::minmax(a, b));
	}
	return out;
}

std::set<std::string> alias_set(const JoinGraph &g) {
	std::set<std::string> out;
	for (const auto &a : g.aliases()) {
		out.insert(a.alias + ":" + a.table);
	}
	return out;
}

std::size_t occurrences(const std::string &hay, const std::string &needle) {
	std::size_t count = 0;
	for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
		count++;
	}
	return count;
}

} // namespace

TEST_SUITE("hint_rewrite") {

TEST_CASE("emit examples") {
	auto two = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	CHECK(emit_hint(two, order_of(two, {"a", "b"})) == "/*+ Leading(a b) */");
	auto g = chain_fixture().graph;
	CHECK(emit_hint(g, order_of(g, {"b", "c", "a"}), HintFormat::bracketed) == "/*+ Leading(((b c) a)) */");
	CHECK(emit_hint(g, order_of(g, {"b", "c", "a"})) == "/*+ Leading(b c a) */");
	CHECK_THROWS_AS(emit_hint(g, order_of(g, {"b"})), IncompleteExpression);
}

TEST_CASE("parse examples") {
	CHECK(parse_hint_names("/*+ Leading(a b c) */") == std::vector<std::string> {"a", "b", "c"});
	CHECK(parse_hint_names("/*+ Leading(((b c) a)) */") == std::vector<std::string> {"b", "c", "a"});
	CHECK(parse_hint_names("/*+   Leading( ( (B  c) a ) )   */") == std::vector<std::string> {"b", "c", "a"});
	CHECK_THROWS_AS(parse_hint_names("/*+ Leading((a (b c))) */"), NonLeftDeepHint);
	CHECK_THROWS_AS(parse_hint_names("/*+ Leading(a) */"), MalformedHint);
	CHECK_THROWS_AS(parse_hint_names("/*+ Leading(a b a) */"), MalformedHint);
	CHECK_THROWS_AS(parse_hint_names("/*+ Leading(a b */"), MalformedHint);
	CHECK_THROWS_AS(parse_hint_names("Leading(a b)"), MalformedHint);
	CHECK_THROWS_AS(parse_hint_names("/*+ Leading(a b) */ x"), MalformedHint);
	CHECK(linearize_hint("/*+ Leading(((b c) a)) */") == "/*+ Leading(b c a) */");

	auto g = chain_fixture().graph;
	CHECK(parse_hint(g, "/*+ Leading(a b c) */") == order_of(g, {"a", "b", "c"}));
}

TEST_CASE("emit and parse round trip for 500 random expressions") {
	Rng rng(31);
	for (int i = 0; i < 500; i++) {
		auto w = generate(static_cast<Topology>(i % 4), 3 + i % 10, rng.next_u64());
		SearchParams p;
		p.exploration_rate = 1.0;
		auto e = rollout(w.graph, nullptr, LeadingExpression {}, p, rng);
		for (auto f : {HintFormat::linear, HintFormat::bracketed}) {
			CHECK(parse_hint(w.graph, emit_hint(w.graph, e, f)) == e);
		}
		CHECK(linearize_hint(emit_hint(w.graph, e, HintFormat::bracketed)) == emit_hint(w.graph, e));
		// the linear body is the cost-cache key
		auto hint = emit_hint(w.graph, e);
		CHECK(hint.substr(12, hint.size() - 12 - 4) == w.graph.order_key(e.order));
	}
}

TEST_CASE("explicit join rewrites") {
	auto two = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	CHECK(rewrite_sql(two, order_of(two, {"a", "b"}), RewriteMode::explicit_join) ==
	      "SELECT * FROM t1 a JOIN t2 b ON a.x = b.y");

	auto g = chain_fixture().graph;
	CHECK(rewrite_sql(g, order_of(g, {"b", "c", "a"}), RewriteMode::explicit_join) ==
	      "SELECT * FROM t2 b JOIN t3 c ON b.z = c.w JOIN t1 a ON a.x = b.y");

	auto file = load_workload(DATA + "/chain3.sql").graph;
	auto sql = rewrite_sql(file, order_of(file, {"b", "c", "a"}), RewriteMode::explicit_join);
	CHECK(sql.find("JOIN t1 a ON a.x = b.y") != std::string::npos);
	CHECK(sql.find("WHERE a.kind = 'movie'") != std::string::npos);

	auto hinted = rewrite_sql(g, order_of(g, {"b", "c", "a"}), RewriteMode::hint_only);
	CHECK(hinted == "/*+ Leading(b c a) */ " + *g.source_sql);
}

TEST_CASE("steps without a predicate") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b, t3 c WHERE a.x = b.y");
	auto e = order_of(g, {"a", "b", "c"});
	CHECK_THROWS_AS(rewrite_sql(g, e, RewriteMode::explicit_join), DisconnectedOrder);
	CHECK(rewrite_sql(g, e, RewriteMode::explicit_join, HintFormat::linear, true) ==
	      "SELECT * FROM t1 a JOIN t2 b ON a.x = b.y CROSS JOIN t3 c");

	JoinGraph bare;
	bare.add_alias("a", "t1");
	bare.add_alias("b", "t2");
	bare.add_edge(0, 1, "a.x = b.y");
	CHECK_THROWS_AS(rewrite_sql(bare, LeadingExpression {{0, 1}}, RewriteMode::explicit_join), ParseError);
}

TEST_CASE("rewrite round trip and predicate placement on 500 random expressions") {
	Rng rng(32);
	for (int i = 0; i < 500; i++) {
		auto w = generate(static_cast<Topology>(i % 4), 3 + i % 10, rng.next_u64());
		SearchParams p;
		p.exploration_rate = 1.0;
		auto e = rollout(w.graph, nullptr, LeadingExpression {}, p, rng);
		auto sql = rewrite_sql(w.graph, e, RewriteMode::explicit_join);
		auto back = parse_sql(sql);
		CHECK(alias_set(back) == alias_set(w.graph));
		CHECK(edge_pairs(back) == edge_pairs(w.graph));
		for (const auto &edge : w.graph.edges()) {
			for (const auto &pred : edge.predicates) {
				CHECK(occurrences(sql, pred) == 1);
			}
		}
		for (const auto &local : w.graph.shape->local_predicates) {
			CHECK(occurrences(sql, local.text) == 1);
		}
	}
}

TEST_CASE("format and mode names") {
	CHECK(hint_format_from_string("bracketed") == HintFormat::bracketed);
	CHECK(rewrite_mode_from_string("hint") == RewriteMode::hint_only);
	CHECK(rewrite_mode_from_string("explicit") == RewriteMode::explicit_join);
	CHECK_THROWS(rewrite_mode_from_string("bushy"));
}

} // TEST_SUITE
