#include "joinsearch/join_graph.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace joinsearch {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json &object, const std::set<std::string> &required, const std::set<std::string> &optional,
                const std::string &where) {
	if (!object.is_object()) {
		throw SchemaError(where + ": expected an object");
	}
	for (const auto &key : required) {
		if (!object.contains(key)) {
			throw SchemaError(where + ": missing field '" + key + "'");
		}
	}
	for (const auto &[key, _] : object.items()) {
		if (!required.count(key) && !optional.count(key)) {
			throw SchemaError(where + ": unexpected field '" + key + "'");
		}
	}
}

std::string get_string(const json &object, const std::string &key, const std::string &where) {
	const auto &value = object.at(key);
	if (!value.is_string()) {
		throw SchemaError(where + ": field '" + key + "' must be a string");
	}
	return value.get<std::string>();
}

double get_fraction(const json &object, const std::string &key, const std::string &where) {
	const auto &value = object.at(key);
	if (!value.is_number()) {
		throw SchemaError(where + ": field '" + key + "' must be a number");
	}
	auto v = value.get<double>();
	if (!(v > 0.0 && v <= 1.0)) {
		throw SchemaError(where + ": field '" + key + "' must lie in (0, 1], got " + value.dump());
	}
	return v;
}

std::set<std::pair<std::string, std::string>> edge_pairs(const JoinGraph &graph) {
	std::set<std::pair<std::string, std::string>> out;
	for (const auto &e : graph.edges()) {
		auto a = graph.name(e.left);
		auto b = graph.name(e.right);
		out.emplace(std::min(a, b), std::max(a, b));
	}
	return out;
}

// Attach the parsed query to a JSON-declared graph after checking they agree.
void attach_sql(JoinGraph &graph, const std::string &sql, const std::string &origin) {
	auto parsed = parse_sql(sql);
	std::set<std::string> declared;
	std::set<std::string> queried;
	for (const auto &a : graph.aliases()) {
		declared.insert(a.alias);
	}
	for (const auto &a : parsed.aliases()) {
		queried.insert(a.alias);
	}
	if (declared != queried) {
		throw SchemaError(origin + ": aliases in 'sql' do not match 'tables'");
	}
	if (edge_pairs(graph) != edge_pairs(parsed)) {
		throw SchemaError(origin + ": join predicates in 'sql' do not match 'edges'");
	}
	// predicates come from the query text; the declared ones are informational
	JoinGraph rebuilt;
	rebuilt.label = graph.label;
	for (const auto &a : graph.aliases()) {
		rebuilt.add_alias(a.alias, a.table);
	}
	for (const auto &e : graph.edges()) {
		auto pe = parsed.edge_between(*parsed.find(graph.name(e.left)), *parsed.find(graph.name(e.right)));
		JoinEdge merged = parsed.edges()[*pe];
		for (std::size_t i = 0; i < merged.predicates.size(); i++) {
			rebuilt.add_edge(e.left, e.right, merged.predicates[i], i == 0 ? e.selectivity : std::nullopt);
		}
	}
	QueryShape shape = *parsed.shape;
	for (auto &local : shape.local_predicates) {
		local.alias = *rebuilt.find(parsed.name(local.alias));
	}
	rebuilt.shape = std::move(shape);
	rebuilt.source_sql = sql;
	graph = std::move(rebuilt);
}

} // namespace

Workload parse_workload_json(std::string_view text, std::string_view origin_view) {
	const std::string origin(origin_view);
	json doc;
	try {
		doc = json::parse(text);
	} catch (const json::parse_error &e) {
		throw SchemaError(origin + ": invalid JSON: " + e.what());
	}
	check_keys(doc, {"name", "tables", "edges"}, {"sql"}, origin);

	Workload out;
	out.graph.label = get_string(doc, "name", origin);
	Catalog catalog;
	if (!doc["tables"].is_array() || doc["tables"].empty()) {
		throw SchemaError(origin + ": 'tables' must be a nonempty array");
	}
	std::size_t index = 0;
	for (const auto &t : doc["tables"]) {
		const auto where = origin + ": tables[" + std::to_string(index++) + "]";
		check_keys(t, {"alias", "table", "cardinality"}, {"local_selectivity"}, where);
		auto alias = to_lower(get_string(t, "alias", where));
		if (!is_identifier(alias)) {
			throw SchemaError(where + ": invalid alias '" + alias + "'");
		}
		const auto &card = t.at("cardinality");
		if (!card.is_number_integer() || card.get<long long>() < 1) {
			throw SchemaError(where + ": 'cardinality' must be an integer >= 1, got " + card.dump());
		}
		try {
			out.graph.add_alias(alias, get_string(t, "table", where));
		} catch (const DuplicateAliasError &) {
			throw SchemaError(where + ": duplicate alias '" + alias + "'");
		}
		catalog.base_cardinality[alias] = static_cast<double>(card.get<long long>());
		catalog.local_selectivity[alias] = t.contains("local_selectivity") ? get_fraction(t, "local_selectivity", where) : 1.0;
	}
	if (!doc["edges"].is_array()) {
		throw SchemaError(origin + ": 'edges' must be an array");
	}
	index = 0;
	for (const auto &e : doc["edges"]) {
		const auto where = origin + ": edges[" + std::to_string(index++) + "]";
		check_keys(e, {"left", "right", "selectivity"}, {"predicate"}, where);
		auto left = to_lower(get_string(e, "left", where));
		auto right = to_lower(get_string(e, "right", where));
		for (const auto &endpoint : {left, right}) {
			if (!out.graph.find(endpoint)) {
				throw SchemaError(where + ": edge references undeclared alias '" + endpoint + "'");
			}
		}
		if (left == right) {
			throw SchemaError(where + ": self-loop on alias '" + left + "'");
		}
		auto selectivity = get_fraction(e, "selectivity", where);
		std::string predicate = e.contains("predicate") ? get_string(e, "predicate", where) : std::string();
		out.graph.add_edge(*out.graph.find(left), *out.graph.find(right), predicate, selectivity);
		auto prior = catalog.edge(left, right);
		catalog.set_edge(left, right, prior ? *prior * selectivity : selectivity);
	}
	if (doc.contains("sql")) {
		attach_sql(out.graph, get_string(doc, "sql", origin), origin);
	}
	out.catalog = std::move(catalog);
	return out;
}

Workload load_workload(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot open workload file '" + path.string() + "'");
	}
	std::stringstream buffer;
	buffer << in.rdbuf();
	if (in.bad()) {
		throw IoError("error reading '" + path.string() + "'");
	}
	if (path.extension() == ".sql") {
		Workload out;
		out.graph = parse_sql(buffer.str());
		out.graph.label = path.stem().string();
		return out;
	}
	return parse_workload_json(buffer.str(), path.string());
}

std::string workload_to_json(const JoinGraph &graph, const Catalog &catalog) {
	ordered_json doc;
	doc["name"] = graph.label;
	auto tables = ordered_json::array();
	for (const auto &a : graph.aliases()) {
		ordered_json t;
		t["alias"] = a.alias;
		t["table"] = a.table;
		t["cardinality"] = static_cast<long long>(catalog.base_cardinality.at(a.alias));
		auto local = catalog.local_selectivity.find(a.alias);
		t["local_selectivity"] = local == catalog.local_selectivity.end() ? 1.0 : local->second;
		tables.push_back(std::move(t));
	}
	doc["tables"] = std::move(tables);
	auto edges = ordered_json::array();
	for (const auto &e : graph.edges()) {
		ordered_json o;
		o["left"] = graph.name(e.left);
		o["right"] = graph.name(e.right);
		auto sel = catalog.edge(graph.name(e.left), graph.name(e.right));
		if (!sel) {
			throw MissingCatalogEntry("no selectivity for edge " + graph.name(e.left) + "-" + graph.name(e.right));
		}
		o["selectivity"] = *sel;
		if (!e.predicates.empty()) {
			o["predicate"] = e.predicate();
		}
		edges.push_back(std::move(o));
	}
	doc["edges"] = std::move(edges);
	if (graph.source_sql) {
		doc["sql"] = *graph.source_sql;
	}
	return doc.dump(2) + "\n";
}

} // namespace joinsearch
