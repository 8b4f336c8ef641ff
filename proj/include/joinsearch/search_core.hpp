#pragma once

#include "joinsearch/cost_oracle.hpp"
#include "joinsearch/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace joinsearch {

enum class SearchPolicy { uct_mean, uct_extreme };

std::string to_string(SearchPolicy policy);
SearchPolicy policy_from_string(const std::string &text);

struct SearchParams {
	SearchPolicy policy = SearchPolicy::uct_extreme;
	double c = 1.0;
	double gamma = 0.5;
	double gp_rate = 0.1;
	double mutation_rate = 0.2;
	double exploration_rate = 0.3;
	std::size_t k = 10;
	std::uint64_t seed = 0;
	bool allow_cross_join = false;
	bool trace = false;

	//! Throws std::invalid_argument when out of range.
	void validate() const;
};

//===--------------------------------------------------------------------===//
// Bandit scores
//===--------------------------------------------------------------------===//
struct ArmStats {
	std::uint64_t visits = 0;
	double mean_reward = 0.0;
	double max_reward = 0.0;
};

//! X + c * sqrt(2 ln N / n)
double uct_mean_score(double mean_reward, double parent_visits, double visits, double c);
//! Q + 2c * (ln N / n)^gamma
double uct_extreme_score(double max_reward, double parent_visits, double visits, double c, double gamma);

//! Index of the arm to play. Unvisited arms come first (uniform among them);
//! otherwise argmax of the policy score with uniform tie-breaking.
//! Throws NoLegalAction when `arms` is empty.
std::size_t select_child(std::span<const ArmStats> arms, std::uint64_t parent_visits, const SearchParams &params,
                         Rng &rng);

//===--------------------------------------------------------------------===//
// Action space and operators
//===--------------------------------------------------------------------===//

//! Aliases not in `members` adjacent to a member; if none while aliases
//! remain, every remaining alias when cross joins are allowed. All aliases
//! for the empty set.
AliasMask legal_extensions(const JoinGraph &graph, AliasMask members, bool allow_cross_join);
std::vector<AliasId> legal_extensions(const JoinGraph &graph, const LeadingExpression &prefix, bool allow_cross_join);

//! True when `order` is a permutation and every step is a legal extension.
bool is_valid_order(const JoinGraph &graph, std::span<const AliasId> order, bool allow_cross_join);

//! Keeps the first `protected_len` aliases and re-sequences the rest stably:
//! each alias is deferred to the earliest position where it is legal.
LeadingExpression repair_order(const JoinGraph &graph, const LeadingExpression &expr, std::size_t protected_len,
                               bool allow_cross_join);

//! Completes a prefix epsilon-greedily: with probability exploration_rate a
//! uniform legal extension, else the one with the smallest incremental
//! cardinality (`model` non-null) or a uniform one (no model).
LeadingExpression rollout(const JoinGraph &graph, const CoutModel *model, const LeadingExpression &prefix,
                          const SearchParams &params, Rng &rng);

struct OperatorResult {
	LeadingExpression expr;
	//! False when fewer than two free positions exist; expr is then the input.
	bool applied = false;
};

//! Swaps two distinct positions after the protected prefix, then repairs.
OperatorResult mutate(const JoinGraph &graph, const LeadingExpression &expr, std::size_t protected_len,
                      bool allow_cross_join, Rng &rng);

//! Order crossover on the suffixes: a random slice of parent_a kept in place,
//! remaining positions filled in parent_b's order, then repaired.
OperatorResult crossover(const JoinGraph &graph, const LeadingExpression &parent_a, const LeadingExpression &parent_b,
                         std::size_t protected_len, bool allow_cross_join, Rng &rng);

//===--------------------------------------------------------------------===//
// Best queue
//===--------------------------------------------------------------------===//
class BestQueue {
public:
	struct Entry {
		LeadingExpression expr;
		double cost;
		std::string key;
	};

	explicit BestQueue(std::size_t capacity) : capacity_(capacity) {
	}

	//! Inserts in ascending cost order (after equal costs); ignores keys
	//! already present. Returns true if the entry was kept.
	bool insert(const LeadingExpression &expr, double cost, const std::string &key);

	const std::vector<Entry> &entries() const {
		return entries_;
	}
	bool empty() const {
		return entries_.empty();
	}
	std::size_t size() const {
		return entries_.size();
	}
	std::size_t capacity() const {
		return capacity_;
	}
	const Entry &best() const {
		return entries_.front();
	}

private:
	std::size_t capacity_;
	std::vector<Entry> entries_;
};

//===--------------------------------------------------------------------===//
// Search tree
//===--------------------------------------------------------------------===//
struct SearchNode {
	static constexpr std::int32_t NONE = -1;

	AliasId action = 0; // alias appended by this node (unused at the root)
	std::int32_t parent = NONE;
	std::uint32_t depth = 0; // prefix length
	AliasMask members = 0;
	std::vector<AliasId> actions;       // legal extensions, ascending id
	std::vector<std::int32_t> children; // parallel to actions; NONE = unexpanded
	ArmStats stats;
};

class SearchTree {
public:
	SearchTree(const JoinGraph &graph, LeadingExpression root_prefix, bool allow_cross_join);

	const SearchNode &root() const {
		return nodes_.front();
	}
	const SearchNode &node(std::int32_t id) const {
		return nodes_.at(id);
	}
	SearchNode &node(std::int32_t id) {
		return nodes_.at(id);
	}
	std::size_t node_count() const {
		return nodes_.size();
	}
	const LeadingExpression &root_prefix() const {
		return root_prefix_;
	}
	//! Prefix represented by a node.
	LeadingExpression prefix_of(std::int32_t id) const;
	//! Creates the child of `parent` for actions[slot].
	std::int32_t expand(std::int32_t parent, std::size_t slot);
	//! Removes the most recently expanded node (must be a leaf).
	void discard_last(std::int32_t id);
	//! Root followed by the deepest existing nodes along expr's order.
	std::vector<std::int32_t> common_prefix_path(const LeadingExpression &expr) const;
	void backpropagate(std::span<const std::int32_t> path, double reward);

private:
	const JoinGraph &graph_;
	bool allow_cross_join_;
	LeadingExpression root_prefix_;
	std::vector<SearchNode> nodes_;
};

enum class SearchOperator { mcts, mutation, crossover };

std::string to_string(SearchOperator op);

struct TraceRecord {
	std::uint64_t iteration = 0;
	std::string stage;   // "single", "stage1", "stage2"
	std::int64_t edge = -1;
	std::vector<AliasId> path; // actions below the root that received the reward
	std::string expression;
	double raw_cost = 0.0;
	double normalized_reward = 0.0;
	SearchOperator op = SearchOperator::mcts;
	bool cached = false;
};

std::string trace_to_jsonl(const JoinGraph &graph, std::span<const TraceRecord> records);

//===--------------------------------------------------------------------===//
// MCTS driver
//===--------------------------------------------------------------------===//
struct IterationResult {
	//! Evaluated by the tree descent (absent when the oracle failed or the
	//! evaluation budget was exhausted).
	std::optional<LeadingExpression> expression;
	std::size_t evaluations = 0;
};

class MctsSearch {
public:
	MctsSearch(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params, LeadingExpression root_prefix,
	           Rng rng, std::shared_ptr<CostCache> cache = nullptr);

	//! Selection, expansion, rollout, evaluation, backpropagation; then the
	//! mutation / crossover jumps with their configured probabilities.
	IterationResult iterate();
	//! Runs up to `iterations` iterations, stopping early once the
	//! evaluation budget (if any) is spent.
	void run(std::uint64_t iterations);
	void set_evaluation_budget(std::optional<std::uint64_t> budget) {
		budget_ = budget;
	}
	//! Evaluates expr and adds it to the best queue (no tree update).
	std::optional<double> inject(const LeadingExpression &expr);

	const BestQueue &best() const {
		return best_;
	}
	const SearchTree &tree() const {
		return tree_;
	}
	const Evaluator &evaluator() const {
		return evaluator_;
	}
	const std::vector<TraceRecord> &trace() const {
		return trace_;
	}
	std::vector<TraceRecord> take_trace() {
		return std::move(trace_);
	}
	std::uint64_t iterations() const {
		return iteration_;
	}
	void set_trace_label(std::string stage, std::int64_t edge) {
		stage_ = std::move(stage);
		edge_ = edge;
	}

private:
	bool budget_left() const {
		return !budget_ || evaluator_.evaluations() + evaluator_.failures() < *budget_;
	}
	//! Evaluates, backpropagates along `path`, records; false on oracle failure.
	bool absorb(const LeadingExpression &expr, std::span<const std::int32_t> path, SearchOperator op);
	void evolve();

	const JoinGraph &graph_;
	SearchParams params_;
	Evaluator evaluator_;
	SearchTree tree_;
	BestQueue best_;
	Rng rng_;
	std::optional<std::uint64_t> budget_;
	std::uint64_t iteration_ = 0;
	std::vector<TraceRecord> trace_;
	std::string stage_ = "single";
	std::int64_t edge_ = -1;
};

} // namespace joinsearch
