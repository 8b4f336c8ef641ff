#include "doctest.h"
#include "oracles.hpp"

#include "joinsearch/join_graph.hpp"
#include "joinsearch/workload_gen.hpp"

#include <filesystem>
#include <fstream>

using namespace joinsearch;

static const std::string DATA = JOINSEARCH_TEST_DATA;

TEST_SUITE("join_graph") {

TEST_CASE("two-table join") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y");
	REQUIRE(g.size() == 2);
	CHECK(g.alias(0).alias == "a");
	CHECK(g.alias(0).table == "t1");
	CHECK(g.alias(1).table == "t2");
	REQUIRE(g.edges().size() == 1);
	CHECK(g.edges()[0].connects(0, 1));
	CHECK(g.edges()[0].predicate() == "a.x = b.y");
	CHECK(g.source_sql);
}

TEST_CASE("predicates between the same pair merge") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b, t3 c WHERE a.x=b.y AND b.z=c.w AND a.x=b.q");
	CHECK(g.size() == 3);
	REQUIRE(g.edges().size() == 2);
	auto ab = g.edge_between(*g.find("a"), *g.find("b"));
	REQUIRE(ab);
	CHECK(g.edges()[*ab].predicate() == "a.x=b.y AND a.x=b.q");
}

TEST_CASE("table name doubles as alias; AS and case are normalized") {
	auto g = parse_sql("select count(*) from Title, movie_info AS MI where title.id = mi.movie_id and MI.info > 3");
	REQUIRE(g.size() == 2);
	CHECK(g.name(0) == "title");
	CHECK(g.alias(0).table == "Title");
	CHECK(g.name(1) == "mi");
	CHECK(g.edges().size() == 1);
	REQUIRE(g.shape);
	CHECK(g.shape->local_predicates.size() == 1);
}

TEST_CASE("explicit JOIN ... ON normalizes to the comma form") {
	auto g = parse_sql("SELECT * FROM t1 a JOIN t2 b ON a.x = b.y INNER JOIN t3 c ON b.z = c.w AND c.k < 5 "
	                   "WHERE a.v = 1");
	CHECK(g.size() == 3);
	CHECK(g.edges().size() == 2);
	REQUIRE(g.shape);
	CHECK(g.shape->local_predicates.size() == 2);
}

TEST_CASE("unsupported syntax is rejected with a position") {
	const char *bad[] = {
	    "SELECT * FROM t1 a LEFT JOIN t2 b ON a.x = b.y",
	    "SELECT * FROM t1 a, t2 b WHERE a.x = b.y OR a.z = b.w",
	    "SELECT * FROM t1 a, (SELECT * FROM t2) b WHERE a.x = b.y",
	    "SELECT * FROM t1 a WHERE a.x IN (SELECT y FROM t2)",
	    "SELECT * FROM t1 a UNION SELECT * FROM t2 b",
	    "SELECT * FROM t1 a, t2 b WHERE a.x < b.y",
	    "SELECT * FROM t1 a, t2 b; SELECT 1",
	};
	for (auto *sql : bad) {
		CAPTURE(sql);
		try {
			parse_sql(sql);
			FAIL("accepted");
		} catch (const ParseError &e) {
			CHECK(e.position() != ParseError::npos);
		}
	}
}

TEST_CASE("duplicate and unknown aliases") {
	CHECK_THROWS_AS(parse_sql("SELECT * FROM t1 a, t2 A WHERE a.x = a.y"), DuplicateAliasError);
	CHECK_THROWS_AS(parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = z.y"), UnknownAliasError);
}

TEST_CASE("parenthesized OR stays one local conjunct") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = b.y AND (a.k = 1 OR a.k = 2) AND b.v BETWEEN 1 AND 3");
	REQUIRE(g.shape);
	CHECK(g.edges().size() == 1);
	REQUIRE(g.shape->local_predicates.size() == 2);
	CHECK(g.shape->local_predicates[0].text == "(a.k = 1 OR a.k = 2)");
	CHECK(g.shape->local_predicates[1].text == "b.v BETWEEN 1 AND 3");
}

TEST_CASE("every WHERE conjunct is classified exactly once") {
	auto g = parse_sql("SELECT * FROM t1 a, t2 b, t3 c WHERE a.x = b.y AND a.z = 'q' AND b.z = c.w AND c.k > 2 "
	                   "AND a.x = b.w");
	std::size_t join_parts = 0;
	for (const auto &e : g.edges()) {
		join_parts += e.predicates.size();
	}
	CHECK(join_parts + g.shape->local_predicates.size() == 5);
}

TEST_CASE("chain fixture file loads with its catalog") {
	auto w = load_workload(DATA + "/chain3.json");
	CHECK(w.graph.size() == 3);
	CHECK(w.graph.edges().size() == 2);
	REQUIRE(w.catalog);
	CHECK(w.catalog->base_cardinality.size() == 3);
	CHECK(w.catalog->edge("a", "b") == doctest::Approx(0.01));
	CHECK(w.graph.source_sql);
}

TEST_CASE("sql workload has no catalog") {
	auto w = load_workload(DATA + "/chain3.sql");
	CHECK(w.graph.size() == 3);
	CHECK_FALSE(w.catalog);
}

TEST_CASE("out-of-range and unreferenced values are schema errors") {
	CHECK_THROWS_AS(load_workload(DATA + "/zero_selectivity.json"), SchemaError);
	try {
		load_workload(DATA + "/undeclared_alias.json");
		FAIL("accepted");
	} catch (const SchemaError &e) {
		const std::string what = e.what();
		CHECK((what.find("\"z\"") != std::string::npos || what.find("'z'") != std::string::npos));
	}
	CHECK_THROWS_AS(load_workload(DATA + "/does_not_exist.json"), IoError);
	CHECK_THROWS_AS(parse_workload_json(R"({"name": "x", "tables": [], "edges": [], "extra": 1})"), SchemaError);
	CHECK_THROWS_AS(parse_workload_json(R"({"name": "x", "tables": [{"alias": "a", "table": "t", "cardinality": 0}],
		"edges": []})"),
	                SchemaError);
}

TEST_CASE("workload JSON round trip") {
	auto w = generate(Topology::cycle, 6, 3);
	auto text = workload_to_json(w.graph, *w.catalog);
	auto back = parse_workload_json(text);
	CHECK(workload_to_json(back.graph, *back.catalog) == text);
	CHECK(back.catalog->base_cardinality == w.catalog->base_cardinality);
	CHECK(back.catalog->edge_selectivity == w.catalog->edge_selectivity);
}

TEST_CASE("connected components") {
	auto chain = parse_sql("SELECT * FROM t a, t b, t c WHERE a.x = b.x AND b.y = c.y");
	CHECK(connected_components(chain) == std::vector<std::vector<std::string>> {{"a", "b", "c"}});
	CHECK(chain.is_connected());

	auto sparse = parse_sql("SELECT * FROM t d, t c, t b, t a WHERE a.x = b.x");
	CHECK(connected_components(sparse) == std::vector<std::vector<std::string>> {{"a", "b"}, {"c"}, {"d"}});
	CHECK_FALSE(sparse.is_connected());

	auto clique = generate(Topology::clique, 5, 1).graph;
	REQUIRE(connected_components(clique).size() == 1);
	CHECK(connected_components(clique)[0].size() == 5);
}

TEST_CASE("edge count bound and no self loops") {
	for (auto t : {Topology::chain, Topology::star, Topology::cycle, Topology::clique}) {
		for (std::size_t n = 3; n <= 9; n++) {
			auto g = generate(t, n, n).graph;
			CHECK(g.edges().size() <= n * (n - 1) / 2);
			for (const auto &e : g.edges()) {
				CHECK(e.left != e.right);
			}
		}
	}
	JoinGraph g;
	g.add_alias("a", "t");
	CHECK_THROWS_AS(g.add_edge(0, 0, "a.x = a.y"), InvalidExpression);
	// a same-alias equality is a local filter, not an edge
	auto local = parse_sql("SELECT * FROM t1 a, t2 b WHERE a.x = a.y AND a.x = b.y");
	CHECK(local.edges().size() == 1);
	CHECK(local.shape->local_predicates.size() == 1);
}

} // TEST_SUITE
