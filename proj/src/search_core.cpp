#include "joinsearch/search_core.hpp"

#include "joinsearch/kernels.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace joinsearch {

std::string to_string(SearchPolicy policy) {
	return policy == SearchPolicy::uct_mean ? "uct_mean" : "uct_extreme";
}

SearchPolicy policy_from_string(const std::string &text) {
	if (text == "uct_mean" || text == "mean") {
		return SearchPolicy::uct_mean;
	}
	if (text == "uct_extreme" || text == "extreme") {
		return SearchPolicy::uct_extreme;
	}
	throw std::invalid_argument("unknown policy '" + text + "'");
}

void SearchParams::validate() const {
	auto probability = [](double p, const char *name) {
		if (!(p >= 0.0 && p <= 1.0)) {
			throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
		}
	};
	probability(gp_rate, "gp_rate");
	probability(mutation_rate, "mutation_rate");
	probability(exploration_rate, "exploration_rate");
	if (!(c >= 0.0) || !std::isfinite(c)) {
		throw std::invalid_argument("c must be a finite value >= 0");
	}
	if (!(gamma > 0.0) || !std::isfinite(gamma)) {
		throw std::invalid_argument("gamma must be > 0");
	}
	if (k < 1) {
		throw std::invalid_argument("k must be >= 1");
	}
}

double uct_mean_score(double mean_reward, double parent_visits, double visits, double c) {
	return mean_reward + c * std::sqrt(2.0 * std::log(parent_visits) / visits);
}

double uct_extreme_score(double max_reward, double parent_visits, double visits, double c, double gamma) {
	return max_reward + (2.0 * c) * kernels::extreme_bonus(std::log(parent_visits) / visits, gamma);
}

std::size_t select_child(std::span<const ArmStats> arms, std::uint64_t parent_visits, const SearchParams &params,
                         Rng &rng) {
	if (arms.empty()) {
		throw NoLegalAction("no child action available");
	}
	thread_local std::vector<std::size_t> picks;
	picks.clear();
	for (std::size_t i = 0; i < arms.size(); i++) {
		if (arms[i].visits == 0) {
			picks.push_back(i);
		}
	}
	if (!picks.empty()) {
		return picks[picks.size() == 1 ? 0 : rng.uniform_index(picks.size())];
	}

	thread_local std::vector<double> value;
	thread_local std::vector<double> visits;
	thread_local std::vector<double> score;
	const auto n = arms.size();
	value.resize(n);
	visits.resize(n);
	score.resize(n);
	const bool extreme = params.policy == SearchPolicy::uct_extreme;
	for (std::size_t i = 0; i < n; i++) {
		value[i] = extreme ? arms[i].max_reward : arms[i].mean_reward;
		visits[i] = static_cast<double>(arms[i].visits);
	}
	const double log_parent = std::log(static_cast<double>(parent_visits));
	const auto &k = kernels::active();
	if (extreme) {
		k.uct_extreme(value.data(), visits.data(), n, log_parent, params.c, params.gamma, score.data());
	} else {
		k.uct_mean(value.data(), visits.data(), n, log_parent, params.c, score.data());
	}
	const double top = *std::max_element(score.begin(), score.end());
	for (std::size_t i = 0; i < n; i++) {
		if (score[i] == top) {
			picks.push_back(i);
		}
	}
	return picks[picks.size() == 1 ? 0 : rng.uniform_index(picks.size())];
}

//===--------------------------------------------------------------------===//
// Action space and operators
//===--------------------------------------------------------------------===//
AliasMask legal_extensions(const JoinGraph &graph, AliasMask members, bool allow_cross_join) {
	const AliasMask all = graph.all_mask();
	if (members == 0) {
		return all;
	}
	AliasMask reach = 0;
	for (AliasMask m = members; m; m &= m - 1) {
		reach |= graph.adjacency(static_cast<AliasId>(std::countr_zero(m)));
	}
	reach &= ~members;
	const AliasMask remaining = all & ~members;
	if (reach == 0 && remaining != 0 && allow_cross_join) {
		return remaining;
	}
	return reach;
}

static std::vector<AliasId> mask_to_ids(AliasMask mask) {
	std::vector<AliasId> out;
	for (; mask; mask &= mask - 1) {
		out.push_back(static_cast<AliasId>(std::countr_zero(mask)));
	}
	return out;
}

std::vector<AliasId> legal_extensions(const JoinGraph &graph, const LeadingExpression &prefix, bool allow_cross_join) {
	return mask_to_ids(legal_extensions(graph, prefix.members(), allow_cross_join));
}

bool is_valid_order(const JoinGraph &graph, std::span<const AliasId> order, bool allow_cross_join) {
	if (order.size() != graph.size()) {
		return false;
	}
	AliasMask members = 0;
	for (auto a : order) {
		if (a >= graph.size() || !(legal_extensions(graph, members, allow_cross_join) >> a & 1)) {
			return false;
		}
		members |= AliasMask(1) << a;
	}
	return true;
}

LeadingExpression repair_order(const JoinGraph &graph, const LeadingExpression &expr, std::size_t protected_len,
                               bool allow_cross_join) {
	LeadingExpression out;
	out.order.assign(expr.order.begin(), expr.order.begin() + static_cast<std::ptrdiff_t>(protected_len));
	std::vector<AliasId> pending(expr.order.begin() + static_cast<std::ptrdiff_t>(protected_len), expr.order.end());
	AliasMask members = out.members();
	while (!pending.empty()) {
		const auto legal = legal_extensions(graph, members, allow_cross_join);
		auto it = std::find_if(pending.begin(), pending.end(), [&](AliasId a) { return legal >> a & 1; });
		if (it == pending.end()) {
			throw NoLegalAction("cannot extend '" + graph.order_key(out.order) + "' without a cross join");
		}
		out.order.push_back(*it);
		members |= AliasMask(1) << *it;
		pending.erase(it);
	}
	return out;
}

LeadingExpression rollout(const JoinGraph &graph, const CoutModel *model, const LeadingExpression &prefix,
                          const SearchParams &params, Rng &rng) {
	validate_expression(graph, prefix, false);
	const auto n = graph.size();
	LeadingExpression out = prefix;
	AliasMask members = prefix.members();
	std::vector<double> factor;
	if (model) {
		// factor[a] = weight(a) * prod of selectivities to the current members
		factor.resize(n);
		for (AliasId a = 0; a < n; a++) {
			factor[a] = model->weight(a);
		}
		for (auto p : prefix.order) {
			kernels::scale(factor, model->selectivity_row(p));
		}
	}
	while (out.size() < n) {
		const auto legal = legal_extensions(graph, members, params.allow_cross_join);
		if (legal == 0) {
			throw NoLegalAction("cannot extend '" + graph.order_key(out.order) + "' without a cross join");
		}
		const bool explore = rng.uniform01() < params.exploration_rate;
		AliasId next;
		if (explore || !model) {
			auto pick = rng.uniform_index(static_cast<std::size_t>(std::popcount(legal)));
			AliasMask m = legal;
			for (std::size_t i = 0; i < pick; i++) {
				m &= m - 1;
			}
			next = static_cast<AliasId>(std::countr_zero(m));
		} else {
			next = static_cast<AliasId>(kernels::masked_argmin(factor, legal));
		}
		out.order.push_back(next);
		members |= AliasMask(1) << next;
		if (model) {
			kernels::scale(factor, model->selectivity_row(next));
		}
	}
	return out;
}

OperatorResult mutate(const JoinGraph &graph, const LeadingExpression &expr, std::size_t protected_len,
                      bool allow_cross_join, Rng &rng) {
	validate_expression(graph, expr, true);
	if (protected_len > expr.size()) {
		throw InvalidExpression("protected prefix longer than the expression");
	}
	const auto free = expr.size() - protected_len;
	if (free < 2) {
		return {expr, false};
	}
	auto i = protected_len + rng.uniform_index(free);
	auto j = protected_len + rng.uniform_index(free - 1);
	if (j >= i) {
		j++;
	}
	LeadingExpression swapped = expr;
	std::swap(swapped.order[i], swapped.order[j]);
	return {repair_order(graph, swapped, protected_len, allow_cross_join), true};
}

OperatorResult crossover(const JoinGraph &graph, const LeadingExpression &parent_a, const LeadingExpression &parent_b,
                         std::size_t protected_len, bool allow_cross_join, Rng &rng) {
	validate_expression(graph, parent_a, true);
	validate_expression(graph, parent_b, true);
	if (protected_len > parent_a.size() ||
	    !std::equal(parent_a.order.begin(), parent_a.order.begin() + static_cast<std::ptrdiff_t>(protected_len),
	                parent_b.order.begin())) {
		throw InvalidExpression("crossover parents do not share the protected prefix");
	}
	const auto m = parent_a.size() - protected_len;
	if (m < 2) {
		return {parent_a, false};
	}
	auto lo = rng.uniform_index(m);
	auto hi = rng.uniform_index(m);
	if (lo > hi) {
		std::swap(lo, hi);
	}
	const auto *a = parent_a.order.data() + protected_len;
	const auto *b = parent_b.order.data() + protected_len;
	AliasMask taken = 0;
	for (auto i = lo; i <= hi; i++) {
		taken |= AliasMask(1) << a[i];
	}
	LeadingExpression child;
	child.order.assign(parent_a.order.begin(), parent_a.order.begin() + static_cast<std::ptrdiff_t>(protected_len));
	child.order.resize(parent_a.size());
	auto *suffix = child.order.data() + protected_len;
	std::size_t fill = 0;
	for (std::size_t pos = 0; pos < m; pos++) {
		if (pos >= lo && pos <= hi) {
			suffix[pos] = a[pos];
			continue;
		}
		while (taken >> b[fill] & 1) {
			fill++;
		}
		suffix[pos] = b[fill++];
	}
	return {repair_order(graph, child, protected_len, allow_cross_join), true};
}

//===--------------------------------------------------------------------===//
// BestQueue
//===--------------------------------------------------------------------===//
bool BestQueue::insert(const LeadingExpression &expr, double cost, const std::string &key) {
	for (const auto &e : entries_) {
		if (e.key == key) {
			return false;
		}
	}
	auto pos = std::upper_bound(entries_.begin(), entries_.end(), cost,
	                            [](double c, const Entry &e) { return c < e.cost; });
	if (static_cast<std::size_t>(pos - entries_.begin()) >= capacity_) {
		return false;
	}
	entries_.insert(pos, Entry {expr, cost, key});
	if (entries_.size() > capacity_) {
		entries_.pop_back();
	}
	return true;
}

//===--------------------------------------------------------------------===//
// SearchTree
//===--------------------------------------------------------------------===//
SearchTree::SearchTree(const JoinGraph &graph, LeadingExpression root_prefix, bool allow_cross_join)
    : graph_(graph), allow_cross_join_(allow_cross_join), root_prefix_(std::move(root_prefix)) {
	validate_expression(graph_, root_prefix_, false);
	SearchNode root;
	root.depth = static_cast<std::uint32_t>(root_prefix_.size());
	root.members = root_prefix_.members();
	if (root.depth < graph_.size()) {
		root.actions = mask_to_ids(legal_extensions(graph_, root.members, allow_cross_join_));
	}
	root.children.assign(root.actions.size(), SearchNode::NONE);
	nodes_.push_back(std::move(root));
}

LeadingExpression SearchTree::prefix_of(std::int32_t id) const {
	std::vector<AliasId> tail;
	for (auto cur = id; cur != 0; cur = nodes_[cur].parent) {
		tail.push_back(nodes_[cur].action);
	}
	LeadingExpression out = root_prefix_;
	out.order.insert(out.order.end(), tail.rbegin(), tail.rend());
	return out;
}

std::int32_t SearchTree::expand(std::int32_t parent, std::size_t slot) {
	auto &p = nodes_.at(parent);
	SearchNode child;
	child.action = p.actions.at(slot);
	child.parent = parent;
	child.depth = p.depth + 1;
	child.members = p.members | (AliasMask(1) << child.action);
	if (child.depth < graph_.size()) {
		child.actions = mask_to_ids(legal_extensions(graph_, child.members, allow_cross_join_));
	}
	child.children.assign(child.actions.size(), SearchNode::NONE);
	const auto id = static_cast<std::int32_t>(nodes_.size());
	p.children[slot] = id;
	nodes_.push_back(std::move(child));
	return id;
}

void SearchTree::discard_last(std::int32_t id) {
	if (id != static_cast<std::int32_t>(nodes_.size()) - 1 || id == 0) {
		throw std::logic_error("only the newest node can be discarded");
	}
	auto &p = nodes_[nodes_[id].parent];
	for (auto &c : p.children) {
		if (c == id) {
			c = SearchNode::NONE;
		}
	}
	nodes_.pop_back();
}

std::vector<std::int32_t> SearchTree::common_prefix_path(const LeadingExpression &expr) const {
	std::vector<std::int32_t> path {0};
	std::int32_t cur = 0;
	for (auto k = root_prefix_.size(); k < expr.size(); k++) {
		const auto &node = nodes_[cur];
		auto it = std::find(node.actions.begin(), node.actions.end(), expr.order[k]);
		if (it == node.actions.end()) {
			break;
		}
		auto child = node.children[static_cast<std::size_t>(it - node.actions.begin())];
		if (child == SearchNode::NONE) {
			break;
		}
		cur = child;
		path.push_back(cur);
	}
	return path;
}

void SearchTree::backpropagate(std::span<const std::int32_t> path, double reward) {
	for (auto id : path) {
		auto &s = nodes_[id].stats;
		s.visits++;
		if (s.visits == 1) {
			s.mean_reward = reward;
			s.max_reward = reward;
		} else {
			s.mean_reward += (reward - s.mean_reward) / static_cast<double>(s.visits);
			s.max_reward = std::max(s.max_reward, reward);
		}
	}
}

std::string to_string(SearchOperator op) {
	switch (op) {
	case SearchOperator::mcts:
		return "mcts";
	case SearchOperator::mutation:
		return "mutation";
	case SearchOperator::crossover:
		return "crossover";
	}
	return "unknown";
}

std::string trace_to_jsonl(const JoinGraph &graph, std::span<const TraceRecord> records) {
	std::string out;
	for (const auto &r : records) {
		nlohmann::ordered_json line;
		line["iter"] = r.iteration;
		line["stage"] = r.stage;
		if (r.edge >= 0) {
			line["edge"] = r.edge;
		}
		line["path"] = graph.order_names(r.path);
		line["expression"] = r.expression;
		line["raw_cost"] = r.raw_cost;
		line["normalized_reward"] = r.normalized_reward;
		line["operator"] = to_string(r.op);
		line["cached"] = r.cached;
		out += line.dump();
		out += '\n';
	}
	return out;
}

//===--------------------------------------------------------------------===//
// MctsSearch
//===--------------------------------------------------------------------===//
MctsSearch::MctsSearch(const JoinGraph &graph, CostOracle &oracle, const SearchParams &params,
                       LeadingExpression root_prefix, Rng rng, std::shared_ptr<CostCache> cache)
    : graph_(graph), params_(params), evaluator_(graph, oracle, std::move(cache)),
      tree_(graph, std::move(root_prefix), params.allow_cross_join), best_(params.k), rng_(rng) {
	params_.validate();
}

bool MctsSearch::absorb(const LeadingExpression &expr, std::span<const std::int32_t> path, SearchOperator op) {
	Evaluation eval;
	try {
		eval = evaluator_.evaluate(expr);
	} catch (const OracleUnavailable &) {
		return false;
	}
	tree_.backpropagate(path, eval.reward.normalized);
	auto key = graph_.order_key(expr.order);
	best_.insert(expr, eval.cost.cost, key);
	if (params_.trace) {
		TraceRecord r;
		r.iteration = iteration_;
		r.stage = stage_;
		r.edge = edge_;
		for (std::size_t i = 1; i < path.size(); i++) {
			r.path.push_back(tree_.node(path[i]).action);
		}
		r.expression = std::move(key);
		r.raw_cost = eval.cost.cost;
		r.normalized_reward = eval.reward.normalized;
		r.op = op;
		r.cached = eval.cost.cached;
		trace_.push_back(std::move(r));
	}
	return true;
}

IterationResult MctsSearch::iterate() {
	IterationResult result;
	iteration_++;
	if (!budget_left()) {
		return result;
	}
	const auto before = evaluator_.evaluations();

	std::vector<std::int32_t> path {0};
	std::int32_t cur = 0;
	std::int32_t fresh = SearchNode::NONE;
	std::vector<ArmStats> arms;
	while (tree_.node(cur).depth < graph_.size()) {
		const auto &node = tree_.node(cur);
		if (node.actions.empty()) {
			throw NoLegalAction("cannot extend '" + graph_.order_key(tree_.prefix_of(cur).order) +
			                    "' without a cross join");
		}
		arms.clear();
		for (auto child : node.children) {
			arms.push_back(child == SearchNode::NONE ? ArmStats {} : tree_.node(child).stats);
		}
		auto slot = select_child(arms, node.stats.visits, params_, rng_);
		auto child = node.children[slot];
		if (child == SearchNode::NONE) {
			fresh = tree_.expand(cur, slot);
			path.push_back(fresh);
			break;
		}
		cur = child;
		path.push_back(cur);
	}
	auto expr = rollout(graph_, evaluator_.oracle().model(), tree_.prefix_of(path.back()), params_, rng_);
	if (absorb(expr, path, SearchOperator::mcts)) {
		result.expression = std::move(expr);
	} else if (fresh != SearchNode::NONE) {
		tree_.discard_last(fresh);
	}
	evolve();
	result.evaluations = evaluator_.evaluations() - before;
	return result;
}

void MctsSearch::evolve() {
	const auto protected_len = tree_.root_prefix().size();
	if (rng_.bernoulli(params_.mutation_rate) && !best_.empty() && budget_left()) {
		const auto &parent = best_.entries()[rng_.uniform_index(best_.size())].expr;
		auto mutated = mutate(graph_, parent, protected_len, params_.allow_cross_join, rng_);
		if (mutated.applied) {
			absorb(mutated.expr, tree_.common_prefix_path(mutated.expr), SearchOperator::mutation);
		}
	}
	if (rng_.bernoulli(params_.gp_rate) && best_.size() >= 2 && budget_left()) {
		auto i = rng_.uniform_index(best_.size());
		auto j = rng_.uniform_index(best_.size() - 1);
		if (j >= i) {
			j++;
		}
		// copies: absorb() may reorder the queue
		auto parent_a = best_.entries()[i].expr;
		auto parent_b = best_.entries()[j].expr;
		auto child = crossover(graph_, parent_a, parent_b, protected_len, params_.allow_cross_join, rng_);
		if (child.applied) {
			absorb(child.expr, tree_.common_prefix_path(child.expr), SearchOperator::crossover);
		}
	}
}

void MctsSearch::run(std::uint64_t iterations) {
	for (std::uint64_t t = 0; t < iterations && budget_left(); t++) {
		iterate();
	}
}

std::optional<double> MctsSearch::inject(const LeadingExpression &expr) {
	validate_expression(graph_, expr, true);
	try {
		auto eval = evaluator_.evaluate(expr);
		best_.insert(expr, eval.cost.cost, graph_.order_key(expr.order));
		return eval.cost.cost;
	} catch (const OracleUnavailable &) {
		return std::nullopt;
	}
}

} // namespace joinsearch
