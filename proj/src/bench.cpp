#include "joinsearch/bench.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace joinsearch {

std::string to_string(Outcome outcome) {
	switch (outcome) {
	case Outcome::improved:
		return "improved";
	case Outcome::same:
		return "same";
	case Outcome::degraded:
		return "degraded";
	case Outcome::error:
		return "error";
	}
	return "unknown";
}

Outcome outcome_from_string(const std::string &text) {
	for (auto o : {Outcome::improved, Outcome::same, Outcome::degraded, Outcome::error}) {
		if (to_string(o) == text) {
			return o;
		}
	}
	throw std::invalid_argument("unknown outcome '" + text + "'");
}

Outcome classify(double ratio, double epsilon) {
	if (ratio < 1.0 - epsilon) {
		return Outcome::improved;
	}
	if (ratio > 1.0 + epsilon) {
		return Outcome::degraded;
	}
	return Outcome::same;
}

const std::vector<std::string> &optimizer_names() {
	static const std::vector<std::string> names {"extreme", "mean", "dp", "goo", "geqo", "default"};
	return names;
}

namespace {

bool cross_needed(const JoinGraph &graph, const SearchParams &params) {
	return params.allow_cross_join || !graph.is_connected();
}

const Catalog &require_catalog(const Workload &workload, const std::string &name) {
	if (!workload.catalog) {
		throw MissingCatalogEntry("optimizer '" + name + "' needs catalog statistics, which '" +
		                          workload.graph.label + "' lacks");
	}
	return *workload.catalog;
}

//! Cost of a fixed order: from the model when there is one, else one oracle call.
OptimizerRun cost_fixed(CostOracle &oracle, LeadingExpression plan) {
	OptimizerRun run;
	if (const auto *model = oracle.model()) {
		run.cost = model->order_cost(plan.order);
	} else {
		run.cost = oracle.cost(plan).cost;
		run.oracle_calls = 1;
	}
	run.plan = std::move(plan);
	return run;
}

OptimizerRun run_geqo(const JoinGraph &graph, CostOracle &oracle, const BenchConfig &config, std::uint64_t seed,
                      const std::shared_ptr<CostCache> &cache) {
	Evaluator evaluator(graph, oracle, cache);
	GeqoParams geqo = config.geqo;
	geqo.seed = seed;
	geqo.allow_cross_join = cross_needed(graph, config.params);
	auto choice = geqo_like(graph, [&](const LeadingExpression &e) { return evaluator.evaluate(e).cost.cost; }, geqo);
	return OptimizerRun {choice.order, choice.cost, evaluator.oracle_calls()};
}

} // namespace

OptimizerRun run_optimizer(const std::string &name, const Workload &workload, CostOracle &oracle,
                           const BenchConfig &config, std::uint64_t seed) {
	const auto &graph = workload.graph;
	SearchParams params = config.params;
	params.seed = seed;
	if (name == "extreme") {
		auto cache = std::make_shared<CostCache>();
		TwoStageConfig two;
		two.params = params;
		two.params.policy = SearchPolicy::uct_extreme;
		two.t_pair = config.t_pair;
		two.t_main = config.t_main;
		two.cache = cache;
		std::uint64_t extra = 0;
		if (config.warm_start_geqo) {
			auto warm = run_geqo(graph, oracle, config, hash_combine(seed, 1), cache);
			two.warm_start = warm.plan;
			extra = warm.oracle_calls;
		}
		auto result = optimize(graph, oracle, two);
		return OptimizerRun {result.best, result.best_cost, result.oracle_calls() + extra};
	}
	if (name == "mean") {
		params.policy = SearchPolicy::uct_mean;
		const auto iterations = graph.edges().size() * config.t_pair + config.t_main;
		auto run = single_stage_search(graph, oracle, params, iterations);
		return OptimizerRun {run.plan.order, run.plan.cost, run.oracle_calls};
	}
	if (name == "dp") {
		const auto &catalog = require_catalog(workload, name);
		return cost_fixed(oracle, dp_leftdeep(graph, catalog, cross_needed(graph, params)).order);
	}
	if (name == "goo") {
		const auto &catalog = require_catalog(workload, name);
		return cost_fixed(oracle, goo(graph, catalog, cross_needed(graph, params)).order);
	}
	if (name == "geqo") {
		return run_geqo(graph, oracle, config, seed, std::make_shared<CostCache>());
	}
	if (name == "default") {
		auto *explain = dynamic_cast<ExplainOracle *>(&oracle);
		if (!explain) {
			throw std::invalid_argument("the 'default' baseline needs a DBMS connection");
		}
		return OptimizerRun {LeadingExpression {}, explain->default_cost(), 1};
	}
	throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::vector<std::filesystem::path> list_workloads(const std::filesystem::path &dir) {
	std::error_code ec;
	std::vector<std::filesystem::path> out;
	auto it = std::filesystem::directory_iterator(dir, ec);
	if (ec) {
		throw IoError("cannot list '" + dir.string() + "': " + ec.message());
	}
	for (const auto &entry : it) {
		const auto ext = entry.path().extension();
		if (entry.is_regular_file() && (ext == ".json" || ext == ".sql")) {
			out.push_back(entry.path());
		}
	}
	std::sort(out.begin(), out.end());
	return out;
}

namespace {

std::vector<RunRecord> bench_instance(const std::filesystem::path &path, const BenchConfig &config) {
	const auto query_id = path.stem().string();
	const auto seed = hash_combine(config.seed, hash_string(query_id));
	const double nan = std::numeric_limits<double>::quiet_NaN();
	std::vector<RunRecord> records;
	auto fail_all = [&](std::size_t n, const std::string &why) {
		for (const auto &name : config.optimizers) {
			RunRecord r;
			r.query_id = query_id;
			r.n_relations = n;
			r.optimizer = name;
			r.best_cost = r.baseline_cost = r.ratio = nan;
			r.outcome = Outcome::error;
			r.seed = seed;
			r.error = why;
			records.push_back(std::move(r));
		}
		return records;
	};

	Workload workload;
	try {
		workload = load_workload(path);
		workload.graph.label = query_id;
	} catch (const Error &e) {
		return fail_all(0, e.what());
	}
	const auto n = workload.graph.size();

	std::unique_ptr<CostOracle> oracle;
	try {
		if (config.db) {
			auto factory = config.session_factory ? config.session_factory : libpq_session_factory(*config.db);
			oracle = std::make_unique<ExplainOracle>(workload.graph, *config.db, factory, config.explain);
		} else if (workload.catalog) {
			oracle = std::make_unique<SyntheticOracle>(workload.graph, *workload.catalog);
		} else {
			return fail_all(n, "no catalog statistics and no DBMS connection");
		}
	} catch (const ConnectError &) {
		throw;
	} catch (const Error &e) {
		return fail_all(n, e.what());
	}

	std::optional<double> dp_cost;
	if (workload.catalog && !config.db && n <= DP_DEFAULT_LIMIT) {
		try {
			dp_cost = dp_leftdeep(workload.graph, *workload.catalog, cross_needed(workload.graph, config.params)).cost;
		} catch (const Error &) {
		}
	}

	std::map<std::string, OptimizerRun> done;
	std::map<std::string, double> elapsed;
	std::map<std::string, std::string> failed;
	auto run = [&](const std::string &name) {
		if (done.count(name) || failed.count(name)) {
			return;
		}
		const auto start = std::chrono::steady_clock::now();
		try {
			done[name] = run_optimizer(name, workload, *oracle, config, seed);
		} catch (const ConnectError &) {
			throw;
		} catch (const std::exception &e) {
			failed[name] = e.what();
		}
		elapsed[name] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
	};

	std::optional<double> baseline;
	std::string baseline_error;
	if (config.baseline == "dp" && dp_cost) {
		baseline = dp_cost;
	} else {
		run(config.baseline);
		if (done.count(config.baseline)) {
			baseline = done[config.baseline].cost;
		} else {
			baseline_error = "baseline failed: " + failed[config.baseline];
		}
	}

	for (const auto &name : config.optimizers) {
		run(name);
		RunRecord r;
		r.query_id = query_id;
		r.n_relations = n;
		r.optimizer = name;
		r.dp_cost = dp_cost;
		r.seed = seed;
		r.wall_ms = elapsed[name];
		r.baseline_cost = baseline.value_or(nan);
		if (done.count(name)) {
			const auto &res = done[name];
			r.best_cost = res.cost;
			r.oracle_calls = res.oracle_calls;
			r.plan = res.plan;
		}
		if (!baseline) {
			r.best_cost = done.count(name) ? r.best_cost : nan;
			r.ratio = nan;
			r.outcome = Outcome::error;
			r.error = baseline_error;
		} else if (!done.count(name)) {
			// fall back to the baseline plan
			r.best_cost = *baseline;
			r.ratio = 1.0;
			r.outcome = Outcome::error;
			r.error = failed[name];
		} else {
			if (*baseline > 0.0) {
				r.ratio = r.best_cost / *baseline;
			} else {
				r.ratio = r.best_cost == *baseline ? 1.0 : std::numeric_limits<double>::infinity();
			}
			r.outcome = classify(r.ratio, config.epsilon);
		}
		records.push_back(std::move(r));
	}
	return records;
}

} // namespace

BenchReport run_bench(const std::vector<std::filesystem::path> &workloads, const BenchConfig &config) {
	for (const auto &name : config.optimizers) {
		if (std::find(optimizer_names().begin(), optimizer_names().end(), name) == optimizer_names().end()) {
			throw std::invalid_argument("unknown optimizer '" + name + "'");
		}
	}
	if (std::find(optimizer_names().begin(), optimizer_names().end(), config.baseline) == optimizer_names().end()) {
		throw std::invalid_argument("unknown baseline '" + config.baseline + "'");
	}
	config.params.validate();

	BenchReport report;
	std::mutex mutex;
	std::atomic<std::size_t> next {0};
	std::exception_ptr fatal;
	auto work = [&] {
		for (auto i = next++; i < workloads.size(); i = next++) {
			std::vector<RunRecord> records;
			try {
				records = bench_instance(workloads[i], config);
			} catch (...) {
				std::lock_guard lock(mutex);
				if (!fatal) {
					fatal = std::current_exception();
				}
				next = workloads.size();
				return;
			}
			std::lock_guard lock(mutex);
			for (auto &r : records) {
				if (config.on_record) {
					config.on_record(r);
				}
				report.records.push_back(std::move(r));
			}
		}
	};
	const auto workers = std::max<std::size_t>(1, std::min(config.workers, workloads.size()));
	if (workers == 1) {
		work();
	} else {
		std::vector<std::thread> pool;
		for (std::size_t w = 0; w < workers; w++) {
			pool.emplace_back(work);
		}
		for (auto &t : pool) {
			t.join();
		}
	}
	if (fatal) {
		std::rethrow_exception(fatal);
	}
	std::sort(report.records.begin(), report.records.end(), [](const RunRecord &a, const RunRecord &b) {
		return std::tie(a.query_id, a.optimizer) < std::tie(b.query_id, b.optimizer);
	});
	return report;
}

BenchReport run_bench(const std::filesystem::path &dir, const BenchConfig &config) {
	return run_bench(list_workloads(dir), config);
}

//===--------------------------------------------------------------------===//
// Emission
//===--------------------------------------------------------------------===//
namespace {

// non-finite values are left empty, as JSON has no spelling for them
std::string num(double v) {
	if (!std::isfinite(v)) {
		return {};
	}
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

nlohmann::ordered_json json_num(double v) {
	return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

} // namespace

std::string report_csv(const BenchReport &report) {
	std::string out = "query_id,n_relations,optimizer,best_cost,baseline_cost,dp_cost,ratio,outcome,oracle_calls,wall_ms,seed\n";
	for (const auto &r : report.records) {
		out += r.query_id + "," + std::to_string(r.n_relations) + "," + r.optimizer + "," + num(r.best_cost) + "," +
		       num(r.baseline_cost) + "," + (r.dp_cost ? num(*r.dp_cost) : "") + "," + num(r.ratio) + "," +
		       to_string(r.outcome) + "," + std::to_string(r.oracle_calls) + "," + num(r.wall_ms) + "," +
		       std::to_string(r.seed) + "\n";
	}
	return out;
}

std::string report_json(const BenchReport &report) {
	nlohmann::ordered_json doc;
	auto records = nlohmann::ordered_json::array();
	for (const auto &r : report.records) {
		nlohmann::ordered_json o;
		o["query_id"] = r.query_id;
		o["n_relations"] = r.n_relations;
		o["optimizer"] = r.optimizer;
		o["best_cost"] = json_num(r.best_cost);
		o["baseline_cost"] = json_num(r.baseline_cost);
		o["dp_cost"] = r.dp_cost ? json_num(*r.dp_cost) : nlohmann::ordered_json(nullptr);
		o["ratio"] = json_num(r.ratio);
		o["outcome"] = to_string(r.outcome);
		o["oracle_calls"] = r.oracle_calls;
		o["wall_ms"] = r.wall_ms;
		o["seed"] = r.seed;
		records.push_back(std::move(o));
	}
	doc["records"] = std::move(records);
	auto summary = nlohmann::ordered_json::array();
	if (!report.records.empty()) {
		for (const auto &s : report_summary(report)) {
			nlohmann::ordered_json o;
			o["optimizer"] = s.optimizer;
			o["stratum"] = s.stratum;
			o["count"] = s.count;
			o["pct_improved"] = s.pct_improved;
			o["pct_same"] = s.pct_same;
			o["pct_degraded"] = s.pct_degraded;
			o["pct_error"] = s.pct_error;
			o["geomean_ratio"] = json_num(s.geomean_ratio);
			o["median_ratio"] = json_num(s.median_ratio);
			summary.push_back(std::move(o));
		}
	}
	doc["summary"] = std::move(summary);
	return doc.dump(2) + "\n";
}

void write_report(const BenchReport &report, const std::filesystem::path &out_dir) {
	std::error_code ec;
	std::filesystem::create_directories(out_dir, ec);
	if (ec) {
		throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
	}
	auto write = [](const std::filesystem::path &path, const std::string &text) {
		std::ofstream out(path, std::ios::binary | std::ios::trunc);
		if (!out || !(out << text)) {
			throw IoError("cannot write '" + path.string() + "'");
		}
	};
	write(out_dir / "report.csv", report_csv(report));
	write(out_dir / "report.json", report_json(report));
}

std::vector<SummaryRow> report_summary(const BenchReport &report) {
	if (report.records.empty()) {
		throw EmptyReport("report has no records");
	}
	std::map<std::pair<std::string, int>, std::vector<const RunRecord *>> groups;
	for (const auto &r : report.records) {
		groups[{r.optimizer, r.n_relations >= STRATUM_SPLIT ? 1 : 0}].push_back(&r);
	}
	std::vector<SummaryRow> rows;
	for (const auto &[key, members] : groups) {
		SummaryRow row;
		row.optimizer = key.first;
		row.stratum = key.second ? "n>=12" : "n<12";
		row.count = members.size();
		std::size_t counts[4] = {0, 0, 0, 0};
		std::vector<double> ratios;
		for (const auto *r : members) {
			counts[static_cast<int>(r->outcome)]++;
			if (std::isfinite(r->ratio) && r->ratio > 0.0) {
				ratios.push_back(r->ratio);
			}
		}
		const double total = static_cast<double>(row.count);
		row.pct_improved = 100.0 * static_cast<double>(counts[0]) / total;
		row.pct_same = 100.0 * static_cast<double>(counts[1]) / total;
		row.pct_degraded = 100.0 * static_cast<double>(counts[2]) / total;
		row.pct_error = 100.0 * static_cast<double>(counts[3]) / total;
		if (ratios.empty()) {
			row.geomean_ratio = row.median_ratio = std::numeric_limits<double>::quiet_NaN();
		} else {
			double log_sum = 0.0;
			for (double x : ratios) {
				log_sum += std::log(x);
			}
			row.geomean_ratio = std::exp(log_sum / static_cast<double>(ratios.size()));
			std::sort(ratios.begin(), ratios.end());
			const auto m = ratios.size();
			row.median_ratio = m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
		}
		rows.push_back(std::move(row));
	}
	return rows;
}

std::string format_summary(const std::vector<SummaryRow> &rows) {
	std::string out;
	char line[256];
	std::snprintf(line, sizeof line, "%-10s %-6s %6s %9s %7s %9s %7s %9s %9s\n", "optimizer", "n", "count", "improved",
	              "same", "degraded", "error", "geomean", "median");
	out += line;
	for (const auto &r : rows) {
		std::snprintf(line, sizeof line, "%-10s %-6s %6zu %8.1f%% %6.1f%% %8.1f%% %6.1f%% %9.4f %9.4f\n",
		              r.optimizer.c_str(), r.stratum.c_str(), r.count, r.pct_improved, r.pct_same, r.pct_degraded,
		              r.pct_error, r.geomean_ratio, r.median_ratio);
		out += line;
	}
	return out;
}

} // namespace joinsearch
