#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace joinsearch::testing {

Workload chain_fixture() {
	auto graph = parse_sql("SELECT * FROM t1 a, t2 b, t3 c WHERE a.x = b.y AND b.z = c.w");
	graph.label = "chain3";
	Catalog catalog;
	catalog.base_cardinality = {{"a", 1000}, {"b", 100}, {"c", 10}};
	catalog.set_edge("a", "b", 0.01);
	catalog.set_edge("b", "c", 0.1);
	return Workload {std::move(graph), std::move(catalog)};
}

namespace {

bool has_edge(const JoinGraph &graph, AliasId a, AliasId b) {
	for (const auto &e : graph.edges()) {
		if ((e.left == a && e.right == b) || (e.left == b && e.right == a)) {
			return true;
		}
	}
	return false;
}

double selectivity(const JoinGraph &graph, const Catalog &catalog, AliasId a, AliasId b) {
	return *catalog.edge(graph.name(a), graph.name(b));
}

double weight(const JoinGraph &graph, const Catalog &catalog, AliasId a) {
	const auto &name = graph.name(a);
	auto local = catalog.local_selectivity.find(name);
	return catalog.base_cardinality.at(name) * (local == catalog.local_selectivity.end() ? 1.0 : local->second);
}

} // namespace

bool valid_order(const JoinGraph &graph, const std::vector<AliasId> &order, bool allow_cross_join) {
	const auto n = graph.size();
	if (order.size() != n) {
		return false;
	}
	std::set<AliasId> placed;
	for (std::size_t k = 0; k < n; k++) {
		const auto a = order[k];
		if (a >= n || placed.count(a)) {
			return false;
		}
		if (k > 0) {
			bool joined = false;
			for (auto p : placed) {
				joined = joined || has_edge(graph, a, p);
			}
			if (!joined) {
				// legal only as a cross join, and only when nothing placed has any unplaced neighbour
				if (!allow_cross_join) {
					return false;
				}
				for (auto p : placed) {
					for (AliasId q = 0; q < n; q++) {
						if (!placed.count(q) && has_edge(graph, p, q)) {
							return false;
						}
					}
				}
			}
		}
		placed.insert(a);
	}
	return true;
}

double canonical_cost(const JoinGraph &graph, const Catalog &catalog, const std::vector<AliasId> &order) {
	double cost = 0.0;
	std::vector<AliasId> members;
	for (std::size_t k = 0; k < order.size(); k++) {
		members.push_back(order[k]);
		if (k == 0) {
			continue;
		}
		auto sorted = members;
		std::sort(sorted.begin(), sorted.end());
		double card = 1.0;
		for (std::size_t i = 0; i < sorted.size(); i++) {
			double factor = weight(graph, catalog, sorted[i]);
			for (std::size_t j = 0; j < i; j++) {
				if (has_edge(graph, sorted[i], sorted[j])) {
					factor = factor * selectivity(graph, catalog, sorted[i], sorted[j]);
				}
			}
			card = i == 0 ? factor : card * factor;
		}
		cost = cost + card;
	}
	return cost;
}

double literal_cost(const JoinGraph &graph, const Catalog &catalog, const std::vector<AliasId> &order) {
	double card = weight(graph, catalog, order[0]);
	double cost = 0.0;
	for (std::size_t k = 1; k < order.size(); k++) {
		double step = card * weight(graph, catalog, order[k]);
		for (std::size_t j = 0; j < k; j++) {
			if (has_edge(graph, order[k], order[j])) {
				step *= selectivity(graph, catalog, order[k], order[j]);
			}
		}
		card = step;
		cost += card;
	}
	return cost;
}

BruteForce brute_force(const JoinGraph &graph, const Catalog &catalog, bool allow_cross_join) {
	std::vector<AliasId> perm(graph.size());
	std::iota(perm.begin(), perm.end(), 0);
	BruteForce best;
	best.cost = std::numeric_limits<double>::infinity();
	std::string best_key;
	do {
		if (!valid_order(graph, perm, allow_cross_join)) {
			continue;
		}
		best.valid_orders++;
		const double c = canonical_cost(graph, catalog, perm);
		const auto key = graph.order_key(perm);
		if (c < best.cost || (c == best.cost && key < best_key)) {
			best.cost = c;
			best.order = perm;
			best_key = key;
		}
	} while (std::next_permutation(perm.begin(), perm.end()));
	return best;
}

long double reference_uct_mean(long double mean, long double parent, long double visits, long double c) {
	return mean + c * std::sqrt(2.0L * std::log(parent) / visits);
}

long double reference_uct_extreme(long double best, long double parent, long double visits, long double c,
                                  long double gamma) {
	return best + 2.0L * c * std::pow(std::log(parent) / visits, gamma);
}

} // namespace joinsearch::testing
