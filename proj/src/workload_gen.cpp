#include "joinsearch/workload_gen.hpp"

#include "joinsearch/rng.hpp"

#include <cmath>
#include <fstream>

namespace joinsearch {

std::string to_string(Topology topology) {
	switch (topology) {
	case Topology::chain:
		return "chain";
	case Topology::star:
		return "star";
	case Topology::cycle:
		return "cycle";
	case Topology::clique:
		return "clique";
	}
	return "unknown";
}

Topology topology_from_string(const std::string &text) {
	for (auto t : {Topology::chain, Topology::star, Topology::cycle, Topology::clique}) {
		if (to_string(t) == text) {
			return t;
		}
	}
	throw BadTopologyParams("unknown topology '" + text + "' (chain, star, cycle, clique)");
}

namespace {

double log_uniform(Rng &rng, double lo, double hi) {
	return std::exp(std::log(lo) + rng.uniform01() * (std::log(hi) - std::log(lo)));
}

std::vector<std::pair<std::size_t, std::size_t>> topology_edges(Topology topology, std::size_t n) {
	std::vector<std::pair<std::size_t, std::size_t>> edges;
	switch (topology) {
	case Topology::chain:
		for (std::size_t i = 0; i + 1 < n; i++) {
			edges.emplace_back(i, i + 1);
		}
		break;
	case Topology::star:
		for (std::size_t i = 1; i < n; i++) {
			edges.emplace_back(0, i);
		}
		break;
	case Topology::cycle:
		for (std::size_t i = 0; i + 1 < n; i++) {
			edges.emplace_back(i, i + 1);
		}
		edges.emplace_back(0, n - 1);
		break;
	case Topology::clique:
		for (std::size_t i = 0; i < n; i++) {
			for (std::size_t j = i + 1; j < n; j++) {
				edges.emplace_back(i, j);
			}
		}
		break;
	}
	return edges;
}

} // namespace

Workload generate(Topology topology, std::size_t n, std::uint64_t seed) {
	if (n < 2) {
		throw BadTopologyParams("a workload needs at least 2 relations");
	}
	if (n > MAX_RELATIONS) {
		throw BadTopologyParams("at most " + std::to_string(MAX_RELATIONS) + " relations are supported");
	}
	if (topology == Topology::cycle && n < 3) {
		throw BadTopologyParams("a cycle needs at least 3 relations");
	}
	if (topology == Topology::clique && n > CLIQUE_MAX_RELATIONS) {
		throw BadTopologyParams("a clique is limited to " + std::to_string(CLIQUE_MAX_RELATIONS) + " relations");
	}

	const auto edges = topology_edges(topology, n);
	std::string sql = "SELECT COUNT(*) FROM ";
	for (std::size_t i = 0; i < n; i++) {
		sql += (i ? ", t" : "t") + std::to_string(i) + " r" + std::to_string(i);
	}
	sql += " WHERE ";
	for (std::size_t k = 0; k < edges.size(); k++) {
		const auto [i, j] = edges[k];
		sql += (k ? " AND r" : "r") + std::to_string(i) + ".k" + std::to_string(j) + " = r" + std::to_string(j) +
		       ".k" + std::to_string(i);
	}

	Workload out;
	out.graph = parse_sql(sql);
	out.graph.label = to_string(topology) + "_" + std::to_string(n);

	Rng rng(seed);
	Catalog catalog;
	for (std::size_t i = 0; i < n; i++) {
		const auto alias = "r" + std::to_string(i);
		catalog.base_cardinality[alias] = std::round(log_uniform(rng, 10.0, 1e6));
		catalog.local_selectivity[alias] = 0.05 + rng.uniform01() * 0.95;
	}
	for (const auto &[i, j] : edges) {
		catalog.set_edge("r" + std::to_string(i), "r" + std::to_string(j), log_uniform(rng, 1e-4, 0.5));
	}
	out.catalog = std::move(catalog);
	return out;
}

std::uint64_t instance_seed(std::uint64_t master_seed, Topology topology, std::size_t n, std::size_t index) {
	auto h = hash_combine(master_seed, hash_string(to_string(topology)));
	h = hash_combine(h, n);
	return hash_combine(h, index);
}

std::vector<std::filesystem::path> corpus(const std::vector<CorpusEntry> &entries, std::uint64_t master_seed,
                                          const std::filesystem::path &out_dir) {
	std::error_code ec;
	std::filesystem::create_directories(out_dir, ec);
	if (ec) {
		throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
	}
	std::vector<std::filesystem::path> written;
	for (const auto &entry : entries) {
		for (std::size_t index = 0; index < entry.count; index++) {
			auto workload = generate(entry.topology, entry.n, instance_seed(master_seed, entry.topology, entry.n, index));
			const auto stem = to_string(entry.topology) + "_" + std::to_string(entry.n) + "_" + std::to_string(index);
			workload.graph.label = stem;
			const auto path = out_dir / (stem + ".json");
			std::ofstream file(path, std::ios::binary | std::ios::trunc);
			if (!file) {
				throw IoError("cannot write '" + path.string() + "'");
			}
			file << workload_to_json(workload.graph, *workload.catalog);
			if (!file) {
				throw IoError("write to '" + path.string() + "' failed");
			}
			written.push_back(path);
		}
	}
	return written;
}

std::vector<CorpusEntry> acceptance_corpus_spec() {
	std::vector<CorpusEntry> entries;
	for (auto t : {Topology::chain, Topology::star, Topology::cycle, Topology::clique}) {
		for (std::size_t n = 4; n <= 8; n++) {
			entries.push_back({t, n, 10});
		}
	}
	return entries;
}

} // namespace joinsearch
