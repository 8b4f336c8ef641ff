#include "joinsearch/join_graph.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace joinsearch {

std::string to_lower(std::string_view text) {
	std::string out(text);
	std::transform(out.begin(), out.end(), out.begin(),
	               [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
	return out;
}

bool is_identifier(std::string_view text) {
	if (text.empty()) {
		return false;
	}
	auto first = static_cast<unsigned char>(text.front());
	if (!std::isalpha(first) && first != '_') {
		return false;
	}
	return std::all_of(text.begin() + 1, text.end(), [](char ch) {
		auto c = static_cast<unsigned char>(ch);
		return std::isalnum(c) || c == '_';
	});
}

std::string JoinEdge::predicate() const {
	std::string out;
	for (const auto &p : predicates) {
		if (!out.empty()) {
			out += " AND ";
		}
		out += p;
	}
	return out;
}

AliasId JoinGraph::add_alias(std::string_view alias, std::string_view table) {
	auto lowered = to_lower(alias);
	if (!is_identifier(lowered)) {
		throw ParseError("invalid alias identifier '" + std::string(alias) + "'");
	}
	if (index_.count(lowered)) {
		throw DuplicateAliasError("duplicate alias '" + lowered + "'");
	}
	if (aliases_.size() >= MAX_RELATIONS) {
		throw TooManyRelations("at most " + std::to_string(MAX_RELATIONS) + " relations are supported");
	}
	auto id = static_cast<AliasId>(aliases_.size());
	index_.emplace(lowered, id);
	aliases_.push_back(AliasRef {std::move(lowered), std::string(table)});
	adjacency_.push_back(0);
	return id;
}

void JoinGraph::add_edge(AliasId left, AliasId right, std::string predicate, std::optional<double> selectivity) {
	if (left >= size() || right >= size()) {
		throw UnknownAliasError("edge endpoint out of range");
	}
	if (left == right) {
		throw InvalidExpression("self-loop edge on alias '" + name(left) + "'");
	}
	if (auto existing = edge_between(left, right)) {
		auto &edge = edges_[*existing];
		if (!predicate.empty()) {
			edge.predicates.push_back(std::move(predicate));
		}
		if (selectivity) {
			edge.selectivity = edge.selectivity ? *edge.selectivity * *selectivity : *selectivity;
		}
		return;
	}
	JoinEdge edge {left, right, {}, selectivity};
	if (!predicate.empty()) {
		edge.predicates.push_back(std::move(predicate));
	}
	edges_.push_back(std::move(edge));
	adjacency_[left] |= AliasMask(1) << right;
	adjacency_[right] |= AliasMask(1) << left;
}

std::optional<AliasId> JoinGraph::find(std::string_view alias) const {
	auto it = index_.find(to_lower(alias));
	if (it == index_.end()) {
		return std::nullopt;
	}
	return it->second;
}

std::optional<std::size_t> JoinGraph::edge_between(AliasId a, AliasId b) const {
	for (std::size_t i = 0; i < edges_.size(); i++) {
		if (edges_[i].connects(a, b)) {
			return i;
		}
	}
	return std::nullopt;
}

bool JoinGraph::is_connected() const {
	if (size() <= 1) {
		return true;
	}
	AliasMask seen = 1;
	AliasMask frontier = 1;
	while (frontier) {
		AliasMask next = 0;
		for (AliasId i = 0; i < size(); i++) {
			if (frontier >> i & 1) {
				next |= adjacency_[i];
			}
		}
		frontier = next & ~seen;
		seen |= next;
	}
	return seen == all_mask();
}

std::string JoinGraph::order_key(std::span<const AliasId> order) const {
	std::string out;
	for (auto id : order) {
		if (!out.empty()) {
			out += ' ';
		}
		out += name(id);
	}
	return out;
}

std::vector<std::string> JoinGraph::order_names(std::span<const AliasId> order) const {
	std::vector<std::string> out;
	out.reserve(order.size());
	for (auto id : order) {
		out.push_back(name(id));
	}
	return out;
}

std::vector<AliasId> JoinGraph::resolve(std::span<const std::string> names) const {
	std::vector<AliasId> out;
	out.reserve(names.size());
	for (const auto &n : names) {
		auto id = find(n);
		if (!id) {
			throw InvalidExpression("unknown alias '" + n + "'");
		}
		out.push_back(*id);
	}
	return out;
}

static std::pair<std::string, std::string> edge_key(const std::string &a, const std::string &b) {
	return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void Catalog::set_edge(const std::string &a, const std::string &b, double selectivity) {
	edge_selectivity[edge_key(to_lower(a), to_lower(b))] = selectivity;
}

std::optional<double> Catalog::edge(const std::string &a, const std::string &b) const {
	auto it = edge_selectivity.find(edge_key(to_lower(a), to_lower(b)));
	if (it == edge_selectivity.end()) {
		return std::nullopt;
	}
	return it->second;
}

std::vector<std::vector<std::string>> connected_components(const JoinGraph &graph) {
	const auto n = graph.size();
	std::vector<AliasId> parent(n);
	std::iota(parent.begin(), parent.end(), AliasId(0));
	auto root = [&](AliasId x) {
		while (parent[x] != x) {
			parent[x] = parent[parent[x]];
			x = parent[x];
		}
		return x;
	};
	for (const auto &e : graph.edges()) {
		auto a = root(e.left);
		auto b = root(e.right);
		if (a != b) {
			parent[std::max(a, b)] = std::min(a, b);
		}
	}
	std::map<AliasId, std::vector<std::string>> groups;
	for (AliasId i = 0; i < n; i++) {
		groups[root(i)].push_back(graph.name(i));
	}
	std::vector<std::vector<std::string>> out;
	for (auto &[_, members] : groups) {
		std::sort(members.begin(), members.end());
		out.push_back(std::move(members));
	}
	std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.front() < b.front(); });
	return out;
}

} // namespace joinsearch
