#pragma once

#include "joinsearch/join_graph.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace joinsearch {

enum class Topology { chain, star, cycle, clique };

constexpr std::size_t CLIQUE_MAX_RELATIONS = 12;

std::string to_string(Topology topology);
//! Throws BadTopologyParams.
Topology topology_from_string(const std::string &text);

//! Aliases r0..r{n-1} over tables t0..t{n-1}. Cardinalities are log-uniform
//! integers in [10, 1e6], edge selectivities log-uniform in [1e-4, 0.5],
//! local selectivities uniform in [0.05, 1]. The workload carries an
//! equivalent COUNT(*) query. Throws BadTopologyParams.
Workload generate(Topology topology, std::size_t n, std::uint64_t seed);

std::uint64_t instance_seed(std::uint64_t master_seed, Topology topology, std::size_t n, std::size_t index);

struct CorpusEntry {
	Topology topology;
	std::size_t n;
	std::size_t count;
};

//! Writes `{topology}_{n}_{index}.json` files into `out_dir`; returns their paths.
std::vector<std::filesystem::path> corpus(const std::vector<CorpusEntry> &entries, std::uint64_t master_seed,
                                          const std::filesystem::path &out_dir);

//! The 200-instance evaluation corpus: 4 topologies x n in 4..8 x 10 seeds.
std::vector<CorpusEntry> acceptance_corpus_spec();

} // namespace joinsearch
