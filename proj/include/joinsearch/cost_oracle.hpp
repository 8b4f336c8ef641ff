#pragma once

#include "joinsearch/join_graph.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace joinsearch {

//! A left-deep join order (complete) or a leading part of one (prefix).
struct LeadingExpression {
	std::vector<AliasId> order;

	std::size_t size() const {
		return order.size();
	}
	bool complete_for(const JoinGraph &graph) const {
		return order.size() == graph.size();
	}
	AliasMask members() const {
		AliasMask m = 0;
		for (auto a : order) {
			m |= AliasMask(1) << a;
		}
		return m;
	}
	bool operator==(const LeadingExpression &) const = default;
};

//! Throws InvalidExpression on duplicates or unknown ids; IncompleteExpression
//! if `require_complete` and the order does not cover the graph.
void validate_expression(const JoinGraph &graph, const LeadingExpression &expr, bool require_complete);

enum class CostSource { synthetic, explain };

struct PlanCost {
	double cost = 0.0;
	CostSource source = CostSource::synthetic;
	bool cached = false;
};

struct Reward {
	double raw = 0.0;        // == -cost
	double normalized = 0.0; // in [0, 1]; 1 at the cheapest cost seen so far
};

//! Dense form of a catalog for one graph: the C_out cost model.
//!
//! The cardinality of a joined alias set is evaluated canonically, folding the
//! members in ascending id order: card = card * (base * local * prod sel(new, j)).
//! Every order that yields the same subset therefore yields bit-identical
//! cardinalities, and the cost of an order is the left-to-right sum of its
//! prefix cardinalities from length 2 on.
class CoutModel {
public:
	CoutModel(const JoinGraph &graph, const Catalog &catalog);

	std::size_t size() const {
		return weight_.size();
	}
	//! base_cardinality * local_selectivity
	double weight(AliasId a) const {
		return weight_[a];
	}
	//! Row a of the selectivity matrix; 1.0 where no edge exists.
	std::span<const double> selectivity_row(AliasId a) const {
		return {selectivity_.data() + a * size(), size()};
	}
	double subset_cardinality(AliasMask members) const;
	//! Sum of prefix cardinalities for prefix lengths 2..order.size().
	double order_cost(std::span<const AliasId> order) const;

private:
	std::vector<double> weight_;
	std::vector<double> selectivity_;
};

double cost_synthetic(const JoinGraph &graph, const Catalog &catalog, const LeadingExpression &expr);
double cost_prefix(const JoinGraph &graph, const Catalog &catalog, const LeadingExpression &expr);

//! Cost-evaluation contract used as the search reward.
class CostOracle {
public:
	virtual ~CostOracle() = default;
	//! Cost of a complete expression.
	virtual PlanCost cost(const LeadingExpression &expr) = 0;
	//! Non-null when per-prefix synthetic costing is available (rollout guidance).
	virtual const CoutModel *model() const {
		return nullptr;
	}
	virtual CostSource source() const = 0;
};

class SyntheticOracle : public CostOracle {
public:
	SyntheticOracle(const JoinGraph &graph, const Catalog &catalog);

	PlanCost cost(const LeadingExpression &expr) override;
	const CoutModel *model() const override {
		return &model_;
	}
	CostSource source() const override {
		return CostSource::synthetic;
	}
	std::uint64_t calls() const {
		return calls_.load();
	}

private:
	const JoinGraph &graph_;
	CoutModel model_;
	std::atomic<std::uint64_t> calls_ {0};
};

//! Thread-safe memo of complete-expression costs keyed by order string.
//! Concurrent requests for the same key wait for a single computation.
class CostCache {
public:
	struct Lookup {
		double cost;
		bool hit;
	};

	//! Returns the cached cost or runs `compute` exactly once for the key.
	//! A throwing `compute` leaves no entry; waiting callers then retry.
	Lookup get_or_compute(const std::string &key, const std::function<double()> &compute);
	std::optional<double> find(const std::string &key) const;
	void insert(const std::string &key, double cost);
	std::size_t size() const;

	std::string dump_json() const;
	void load_json(std::string_view text);
	void save(const std::filesystem::path &path) const;
	void load(const std::filesystem::path &path);

private:
	struct Slot {
		bool ready = false;
		double cost = 0.0;
	};
	mutable std::mutex mutex_;
	std::condition_variable ready_;
	std::map<std::string, Slot> slots_;
};

//! Running cost range of one search; maps costs to [0, 1] rewards.
class RewardTracker {
public:
	void observe(double cost);
	Reward reward(double cost) const;
	std::size_t observations() const {
		return count_;
	}
	double min_cost() const {
		return min_;
	}
	double max_cost() const {
		return max_;
	}

private:
	std::size_t count_ = 0;
	double min_ = 0.0;
	double max_ = 0.0;
};

struct Evaluation {
	PlanCost cost;
	Reward reward;
};

//! Per-search evaluation front end: cache, then oracle, then normalization.
class Evaluator {
public:
	Evaluator(const JoinGraph &graph, CostOracle &oracle, std::shared_ptr<CostCache> cache = nullptr);

	//! Throws OracleUnavailable if the oracle failed (ConnectError propagates).
	Evaluation evaluate(const LeadingExpression &expr);

	const RewardTracker &tracker() const {
		return tracker_;
	}
	CostOracle &oracle() const {
		return oracle_;
	}
	const JoinGraph &graph() const {
		return graph_;
	}
	std::uint64_t evaluations() const {
		return evaluations_;
	}
	std::uint64_t oracle_calls() const {
		return oracle_calls_;
	}
	std::uint64_t cache_hits() const {
		return cache_hits_;
	}
	std::uint64_t failures() const {
		return failures_;
	}

private:
	const JoinGraph &graph_;
	CostOracle &oracle_;
	std::shared_ptr<CostCache> cache_;
	RewardTracker tracker_;
	std::uint64_t evaluations_ = 0;
	std::uint64_t oracle_calls_ = 0;
	std::uint64_t cache_hits_ = 0;
	std::uint64_t failures_ = 0;
};

} // namespace joinsearch
