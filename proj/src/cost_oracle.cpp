#include "joinsearch/cost_oracle.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace joinsearch {

void validate_expression(const JoinGraph &graph, const LeadingExpression &expr, bool require_complete) {
	AliasMask seen = 0;
	for (auto a : expr.order) {
		if (a >= graph.size()) {
			throw InvalidExpression("alias id " + std::to_string(a) + " is not part of the graph");
		}
		if (seen >> a & 1) {
			throw InvalidExpression("alias '" + graph.name(a) + "' appears twice");
		}
		seen |= AliasMask(1) << a;
	}
	if (require_complete && expr.size() != graph.size()) {
		throw IncompleteExpression("expression '" + graph.order_key(expr.order) + "' covers " +
		                           std::to_string(expr.size()) + " of " + std::to_string(graph.size()) + " aliases");
	}
}

CoutModel::CoutModel(const JoinGraph &graph, const Catalog &catalog) {
	const auto n = graph.size();
	weight_.resize(n);
	selectivity_.assign(n * n, 1.0);
	for (AliasId a = 0; a < n; a++) {
		const auto &name = graph.name(a);
		auto card = catalog.base_cardinality.find(name);
		if (card == catalog.base_cardinality.end()) {
			throw MissingCatalogEntry("no cardinality for alias '" + name + "'");
		}
		auto local = catalog.local_selectivity.find(name);
		weight_[a] = card->second * (local == catalog.local_selectivity.end() ? 1.0 : local->second);
	}
	for (const auto &e : graph.edges()) {
		auto sel = catalog.edge(graph.name(e.left), graph.name(e.right));
		if (!sel) {
			throw MissingCatalogEntry("no selectivity for edge " + graph.name(e.left) + "-" + graph.name(e.right));
		}
		selectivity_[e.left * n + e.right] = *sel;
		selectivity_[e.right * n + e.left] = *sel;
	}
}

double CoutModel::subset_cardinality(AliasMask members) const {
	double card = 1.0;
	bool first = true;
	const auto n = size();
	for (AliasId i = 0; i < n; i++) {
		if (!(members >> i & 1)) {
			continue;
		}
		double factor = weight_[i];
		const double *row = selectivity_.data() + i * n;
		for (AliasId j = 0; j < i; j++) {
			if (members >> j & 1) {
				factor = factor * row[j];
			}
		}
		card = first ? factor : card * factor;
		first = false;
	}
	return card;
}

double CoutModel::order_cost(std::span<const AliasId> order) const {
	double cost = 0.0;
	AliasMask members = 0;
	for (std::size_t k = 0; k < order.size(); k++) {
		members |= AliasMask(1) << order[k];
		if (k >= 1) {
			cost = cost + subset_cardinality(members);
		}
	}
	return cost;
}

double cost_synthetic(const JoinGraph &graph, const Catalog &catalog, const LeadingExpression &expr) {
	validate_expression(graph, expr, true);
	return CoutModel(graph, catalog).order_cost(expr.order);
}

double cost_prefix(const JoinGraph &graph, const Catalog &catalog, const LeadingExpression &expr) {
	validate_expression(graph, expr, false);
	if (expr.size() < 2) {
		throw InvalidExpression("a prefix needs at least two aliases");
	}
	return CoutModel(graph, catalog).order_cost(expr.order);
}

SyntheticOracle::SyntheticOracle(const JoinGraph &graph, const Catalog &catalog) : graph_(graph), model_(graph, catalog) {
}

PlanCost SyntheticOracle::cost(const LeadingExpression &expr) {
	validate_expression(graph_, expr, true);
	calls_++;
	return PlanCost {model_.order_cost(expr.order), CostSource::synthetic, false};
}

//===--------------------------------------------------------------------===//
// CostCache
//===--------------------------------------------------------------------===//
CostCache::Lookup CostCache::get_or_compute(const std::string &key, const std::function<double()> &compute) {
	std::unique_lock lock(mutex_);
	while (true) {
		auto it = slots_.find(key);
		if (it == slots_.end()) {
			break;
		}
		if (it->second.ready) {
			return {it->second.cost, true};
		}
		ready_.wait(lock);
		// the computing thread may have failed and erased the slot; loop and retry
	}
	slots_.emplace(key, Slot {});
	lock.unlock();
	double cost;
	try {
		cost = compute();
	} catch (...) {
		lock.lock();
		slots_.erase(key);
		lock.unlock();
		ready_.notify_all();
		throw;
	}
	lock.lock();
	auto &slot = slots_[key];
	slot.ready = true;
	slot.cost = cost;
	lock.unlock();
	ready_.notify_all();
	return {cost, false};
}

std::optional<double> CostCache::find(const std::string &key) const {
	std::lock_guard lock(mutex_);
	auto it = slots_.find(key);
	if (it == slots_.end() || !it->second.ready) {
		return std::nullopt;
	}
	return it->second.cost;
}

void CostCache::insert(const std::string &key, double cost) {
	{
		std::lock_guard lock(mutex_);
		auto &slot = slots_[key];
		slot.ready = true;
		slot.cost = cost;
	}
	ready_.notify_all();
}

std::size_t CostCache::size() const {
	std::lock_guard lock(mutex_);
	std::size_t n = 0;
	for (const auto &[_, slot] : slots_) {
		n += slot.ready;
	}
	return n;
}

std::string CostCache::dump_json() const {
	nlohmann::json doc = nlohmann::json::object();
	std::lock_guard lock(mutex_);
	for (const auto &[key, slot] : slots_) {
		if (slot.ready) {
			doc[key] = slot.cost;
		}
	}
	return doc.dump(2) + "\n";
}

void CostCache::load_json(std::string_view text) {
	nlohmann::json doc;
	try {
		doc = nlohmann::json::parse(text);
	} catch (const nlohmann::json::parse_error &e) {
		throw SchemaError(std::string("invalid cost cache: ") + e.what());
	}
	if (!doc.is_object()) {
		throw SchemaError("cost cache must be a JSON object");
	}
	for (const auto &[key, value] : doc.items()) {
		if (!value.is_number() || !std::isfinite(value.get<double>()) || value.get<double>() < 0) {
			throw SchemaError("cost cache entry '" + key + "' must be a finite nonnegative number");
		}
		insert(key, value.get<double>());
	}
}

void CostCache::save(const std::filesystem::path &path) const {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw IoError("cannot write cost cache '" + path.string() + "'");
	}
	out << dump_json();
}

void CostCache::load(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot read cost cache '" + path.string() + "'");
	}
	std::stringstream buffer;
	buffer << in.rdbuf();
	load_json(buffer.str());
}

//===--------------------------------------------------------------------===//
// RewardTracker / Evaluator
//===--------------------------------------------------------------------===//
void RewardTracker::observe(double cost) {
	if (count_ == 0) {
		min_ = max_ = cost;
	} else {
		min_ = std::min(min_, cost);
		max_ = std::max(max_, cost);
	}
	count_++;
}

Reward RewardTracker::reward(double cost) const {
	Reward r;
	r.raw = -cost;
	if (count_ == 0 || max_ == min_) {
		r.normalized = 0.5;
	} else {
		r.normalized = (max_ - cost) / (max_ - min_);
	}
	return r;
}

Evaluator::Evaluator(const JoinGraph &graph, CostOracle &oracle, std::shared_ptr<CostCache> cache)
    : graph_(graph), oracle_(oracle), cache_(std::move(cache)) {
}

Evaluation Evaluator::evaluate(const LeadingExpression &expr) {
	validate_expression(graph_, expr, true);
	PlanCost cost;
	cost.source = oracle_.source();
	auto call = [&] {
		try {
			return oracle_.cost(expr).cost;
		} catch (const ConnectError &) {
			throw;
		} catch (const OracleError &e) {
			failures_++;
			throw OracleUnavailable(std::string("evaluation of '") + graph_.order_key(expr.order) + "' failed: " + e.what());
		}
	};
	if (cache_) {
		auto lookup = cache_->get_or_compute(graph_.order_key(expr.order), call);
		cost.cost = lookup.cost;
		cost.cached = lookup.hit;
	} else {
		cost.cost = call();
	}
	evaluations_++;
	if (cost.cached) {
		cache_hits_++;
	} else {
		oracle_calls_++;
	}
	tracker_.observe(cost.cost);
	return Evaluation {cost, tracker_.reward(cost.cost)};
}

} // namespace joinsearch
