#pragma once

#include "joinsearch/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace joinsearch {

//! Index of an alias within its JoinGraph.
using AliasId = std::uint32_t;
//! Bit set over AliasIds.
using AliasMask = std::uint64_t;

constexpr std::size_t MAX_RELATIONS = 64;

struct AliasRef {
	std::string alias; // lower-cased
	std::string table; // as written in the query
};

struct JoinEdge {
	AliasId left;
	AliasId right;
	//! Conjuncts between the pair, in order of appearance; predicate() joins them.
	std::vector<std::string> predicates;
	std::optional<double> selectivity;

	std::string predicate() const;
	bool connects(AliasId a, AliasId b) const {
		return (left == a && right == b) || (left == b && right == a);
	}
};

//! A single-alias WHERE conjunct, kept verbatim for rewriting.
struct LocalPredicate {
	AliasId alias;
	std::string text;
};

//! The non-join parts of a parsed query, needed to rebuild it.
struct QueryShape {
	std::string select_list;
	std::vector<LocalPredicate> local_predicates;
	//! GROUP BY / ORDER BY / LIMIT ... verbatim (may be empty).
	std::string tail;
};

class JoinGraph {
public:
	JoinGraph() = default;

	//! Adds an alias (lower-cased); throws DuplicateAliasError.
	AliasId add_alias(std::string_view alias, std::string_view table);
	//! Adds an edge or merges into the existing edge of the unordered pair:
	//! predicates are appended and selectivities multiplied.
	void add_edge(AliasId left, AliasId right, std::string predicate = {},
	              std::optional<double> selectivity = std::nullopt);

	std::size_t size() const {
		return aliases_.size();
	}
	const std::vector<AliasRef> &aliases() const {
		return aliases_;
	}
	const std::vector<JoinEdge> &edges() const {
		return edges_;
	}
	const AliasRef &alias(AliasId id) const {
		return aliases_.at(id);
	}
	const std::string &name(AliasId id) const {
		return aliases_.at(id).alias;
	}
	std::optional<AliasId> find(std::string_view alias) const;
	//! Index into edges() of the edge between a and b, if any.
	std::optional<std::size_t> edge_between(AliasId a, AliasId b) const;

	AliasMask adjacency(AliasId id) const {
		return adjacency_.at(id);
	}
	AliasMask all_mask() const {
		return size() == 64 ? ~AliasMask(0) : ((AliasMask(1) << size()) - 1);
	}
	bool is_connected() const;

	//! Canonical order string: aliases joined by a single space.
	std::string order_key(std::span<const AliasId> order) const;
	std::vector<std::string> order_names(std::span<const AliasId> order) const;
	//! Resolves alias names (case-insensitive); throws InvalidExpression.
	std::vector<AliasId> resolve(std::span<const std::string> names) const;

	std::optional<std::string> source_sql;
	std::optional<QueryShape> shape;
	std::string label; // workload name

private:
	std::vector<AliasRef> aliases_;
	std::vector<JoinEdge> edges_;
	std::vector<AliasMask> adjacency_;
	std::map<std::string, AliasId, std::less<>> index_;
};

//! Statistics driving the synthetic cost model. Keys are lower-cased aliases;
//! edge keys are ordered pairs (min, max).
struct Catalog {
	std::map<std::string, double> base_cardinality;
	std::map<std::string, double> local_selectivity;
	std::map<std::pair<std::string, std::string>, double> edge_selectivity;

	void set_edge(const std::string &a, const std::string &b, double selectivity);
	std::optional<double> edge(const std::string &a, const std::string &b) const;
};

struct Workload {
	JoinGraph graph;
	std::optional<Catalog> catalog;
};

std::string to_lower(std::string_view text);
bool is_identifier(std::string_view text);

//! Parses a single SELECT in the supported subset (comma FROM lists, inner
//! JOIN ... ON, conjunctive WHERE of equi-joins and single-alias filters).
JoinGraph parse_sql(std::string_view query_text);

//! Loads a workload JSON file, or a .sql file (no catalog).
Workload load_workload(const std::filesystem::path &path);
//! Parses workload JSON text; `origin` is used in error messages.
Workload parse_workload_json(std::string_view text, std::string_view origin = "<memory>");
//! Serializes graph + catalog in the workload JSON format.
std::string workload_to_json(const JoinGraph &graph, const Catalog &catalog);

//! Maximal edge-connected alias sets, ordered by their smallest alias name;
//! members within a set are sorted by name.
std::vector<std::vector<std::string>> connected_components(const JoinGraph &graph);

} // namespace joinsearch
