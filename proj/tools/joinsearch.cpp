#include "joinsearch/bench.hpp"
#include "joinsearch/workload_gen.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>

using namespace joinsearch;

namespace {

enum Exit { OK = 0, USAGE = 1, WORKLOAD = 2, DBMS = 3 };

struct SearchFlags {
	SearchParams params;
	std::uint64_t t_pair = 50;
	std::uint64_t t_main = 2000;
	std::string warm_start;
	std::size_t workers = 1;

	void add(CLI::App &app) {
		app.add_option("--seed", params.seed, "RNG seed")->capture_default_str();
		app.add_option("--t-pair", t_pair, "Iterations per stage-1 edge run")->capture_default_str()->check(CLI::PositiveNumber);
		app.add_option("--t-main", t_main, "Stage-2 iterations")->capture_default_str()->check(CLI::PositiveNumber);
		app.add_option("--c", params.c, "Exploration constant")->capture_default_str();
		app.add_option("--gamma", params.gamma, "Exploration exponent (extreme policy)")->capture_default_str();
		app.add_option("--gp-rate", params.gp_rate, "Crossover probability per iteration")->capture_default_str();
		app.add_option("--mutation-rate", params.mutation_rate, "Mutation probability per iteration")->capture_default_str();
		app.add_option("--exploration-rate", params.exploration_rate, "Random-move probability in rollouts")
		    ->capture_default_str();
		app.add_option("--k", params.k, "Best-queue capacity")->capture_default_str();
		app.add_flag("--allow-cross-join", params.allow_cross_join, "Permit cross-product extensions");
		app.add_option("--warm-start", warm_start, "Seed the search with another optimizer's plan")
		    ->check(CLI::IsMember({"geqo"}));
		app.add_option("--workers", workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
	}
};

struct DbFlags {
	std::string dsn;
	std::uint64_t statement_timeout_ms = 60000;
	std::string explain_format = "json";
	std::string hint_format = "linear";
	std::string mode = "explicit";
	std::string log_sql;
	bool no_verify = false;

	void add(CLI::App &app) {
		app.add_option("--dsn", dsn, "Connection string (default: $JOINSEARCH_DSN)");
		app.add_option("--statement-timeout-ms", statement_timeout_ms, "Timeout for executed statements")
		    ->capture_default_str()->check(CLI::PositiveNumber);
		app.add_option("--explain-format", explain_format)->capture_default_str()->check(CLI::IsMember({"json", "text"}));
		app.add_option("--format", hint_format, "Hint format")->capture_default_str()->check(
		    CLI::IsMember({"linear", "bracketed"}));
		app.add_option("--mode", mode, "Join-order enforcement")->capture_default_str()->check(
		    CLI::IsMember({"hint", "explicit"}));
		app.add_option("--log-sql", log_sql, "Append outgoing SQL to this file");
		app.add_flag("--no-verify", no_verify, "Skip plan leaf-order verification");
	}

	std::string resolved_dsn() const {
		if (!dsn.empty()) {
			return dsn;
		}
		const char *env = std::getenv("JOINSEARCH_DSN");
		return env ? env : "";
	}

	DbTarget target() const {
		DbTarget t;
		t.dsn = resolved_dsn();
		t.statement_timeout_ms = statement_timeout_ms;
		t.explain_format = explain_format_from_string(explain_format);
		return t;
	}

	ExplainOptions options(bool allow_cross_join) const {
		ExplainOptions o;
		o.mode = rewrite_mode_from_string(mode);
		o.format = hint_format_from_string(hint_format);
		o.verify = !no_verify;
		o.allow_cross_join = allow_cross_join;
		return o;
	}

	SessionFactory factory(const DbTarget &target) const {
		auto base = libpq_session_factory(target);
		if (log_sql.empty()) {
			return base;
		}
		auto file = std::make_shared<std::ofstream>(log_sql, std::ios::app);
		if (!*file) {
			throw IoError("cannot open SQL log '" + log_sql + "'");
		}
		auto mutex = std::make_shared<std::mutex>();
		return logging_session_factory(base, [file, mutex](const std::string &sql) {
			std::lock_guard lock(*mutex);
			*file << sql << ";\n";
			file->flush();
		});
	}
};

void write_text(const std::string &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out || !(out << text)) {
		throw IoError("cannot write '" + path + "'");
	}
}

int cmd_optimize(const std::string &file, const std::string &optimizer, SearchFlags &search, const DbFlags &db,
                 const std::string &trace_path, const std::string &cache_path, bool execute) {
	auto workload = load_workload(file);
	auto &graph = workload.graph;
	const bool use_db = !db.resolved_dsn().empty();

	std::unique_ptr<CostOracle> oracle;
	ExplainOracle *explain = nullptr;
	if (use_db) {
		auto target = db.target();
		target.allow_execution = execute;
		auto owned = std::make_unique<ExplainOracle>(graph, target, db.factory(target),
		                                             db.options(search.params.allow_cross_join));
		explain = owned.get();
		oracle = std::move(owned);
		std::cerr << "costing with EXPLAIN via " << redact_dsn(target.dsn) << "\n";
	} else {
		if (!workload.catalog) {
			throw MissingCatalogEntry("'" + file + "' has no catalog statistics; pass --dsn to cost with EXPLAIN");
		}
		if (execute) {
			throw std::invalid_argument("--execute needs a DBMS connection");
		}
		oracle = std::make_unique<SyntheticOracle>(graph, *workload.catalog);
	}

	auto cache = std::make_shared<CostCache>();
	if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
		cache->load(cache_path);
	}

	nlohmann::ordered_json out;
	out["query"] = graph.label;
	out["optimizer"] = optimizer;
	out["n_relations"] = graph.size();
	LeadingExpression plan;
	double cost = 0.0;

	if (optimizer == "extreme") {
		TwoStageConfig config;
		config.params = search.params;
		config.params.policy = SearchPolicy::uct_extreme;
		config.params.trace = !trace_path.empty();
		config.t_pair = search.t_pair;
		config.t_main = search.t_main;
		config.cache = cache;
		config.workers = search.workers;
		if (search.warm_start == "geqo") {
			BenchConfig bc;
			bc.params = search.params;
			auto warm = run_optimizer("geqo", workload, *oracle, bc, hash_combine(search.params.seed, 1));
			config.warm_start = warm.plan;
			out["warm_start_cost"] = warm.cost;
		}
		auto result = optimize(graph, *oracle, config);
		plan = result.best;
		cost = result.best_cost;
		out["stage1_calls"] = result.stage1_calls;
		out["stage2_calls"] = result.stage2_calls;
		out["cache_hits"] = result.cache_hits;
		if (result.stage1.winner) {
			const auto &e = graph.edges()[*result.stage1.winner];
			out["stage1_winner"] = graph.name(e.left) + "-" + graph.name(e.right);
			out["stage1_winner_cost"] = result.stage1.winner_cost;
		}
		if (result.cross_join_fallback) {
			out["cross_join_fallback"] = true;
		}
		if (!trace_path.empty()) {
			write_text(trace_path, trace_to_jsonl(graph, result.trace));
		}
	} else if (optimizer == "mean") {
		SearchParams params = search.params;
		params.policy = SearchPolicy::uct_mean;
		params.trace = !trace_path.empty();
		auto run = single_stage_search(graph, *oracle, params, graph.edges().size() * search.t_pair + search.t_main,
		                               std::nullopt, cache);
		plan = run.plan.order;
		cost = run.plan.cost;
		out["oracle_calls"] = run.oracle_calls;
		if (!trace_path.empty()) {
			write_text(trace_path, trace_to_jsonl(graph, run.trace));
		}
	} else {
		BenchConfig bc;
		bc.params = search.params;
		auto run = run_optimizer(optimizer, workload, *oracle, bc, search.params.seed);
		plan = run.plan;
		cost = run.cost;
		out["oracle_calls"] = run.oracle_calls;
	}

	out["cost"] = cost;
	out["order"] = graph.order_names(plan.order);
	const auto format = hint_format_from_string(db.hint_format);
	out["hint"] = emit_hint(graph, plan, format);
	if (graph.source_sql) {
		const bool cross = search.params.allow_cross_join || !graph.is_connected();
		out["sql"] = rewrite_sql(graph, plan, rewrite_mode_from_string(db.mode), format, cross);
	}
	if (execute && explain) {
		try {
			out["latency_ms"] = explain->execute_latency(plan);
		} catch (const ExecutionTimeout &e) {
			out["latency_ms"] = nullptr;
			out["timeout"] = true;
			std::cerr << e.what() << "\n";
		}
	}
	if (!cache_path.empty()) {
		cache->save(cache_path);
	}
	std::cout << out.dump(2) << "\n";
	return OK;
}

int cmd_bench(const std::string &dir, const std::string &optimizers, const std::string &baseline, double epsilon,
              const std::string &out_dir, SearchFlags &search, const DbFlags &db) {
	BenchConfig config;
	config.optimizers.clear();
	std::stringstream list(optimizers);
	for (std::string name; std::getline(list, name, ',');) {
		if (!name.empty()) {
			config.optimizers.push_back(name);
		}
	}
	config.baseline = baseline;
	config.params = search.params;
	config.t_pair = search.t_pair;
	config.t_main = search.t_main;
	config.warm_start_geqo = search.warm_start == "geqo";
	config.seed = search.params.seed;
	config.epsilon = epsilon;
	config.workers = search.workers;
	if (!db.resolved_dsn().empty()) {
		config.db = db.target();
		config.explain = db.options(search.params.allow_cross_join);
		config.session_factory = db.factory(*config.db);
		std::cerr << "costing with EXPLAIN via " << redact_dsn(config.db->dsn) << "\n";
	}
	config.on_record = [](const RunRecord &r) {
		if (r.outcome == Outcome::error && !r.error.empty()) {
			std::cerr << r.query_id << " [" << r.optimizer << "]: " << r.error << "\n";
		}
	};
	auto report = run_bench(std::filesystem::path(dir), config);
	if (report.records.empty()) {
		throw EmptyReport("no workload files in '" + dir + "'");
	}
	write_report(report, out_dir);
	std::cout << format_summary(report_summary(report));
	return OK;
}

int cmd_gen(const std::string &topology, std::size_t n, std::size_t count, std::uint64_t seed, const std::string &out,
            bool acceptance) {
	std::vector<CorpusEntry> entries;
	if (acceptance) {
		entries = acceptance_corpus_spec();
	} else {
		if (topology.empty() || n == 0) {
			throw std::invalid_argument("gen needs --topology and --n (or --acceptance)");
		}
		entries.push_back({topology_from_string(topology), n, count});
	}
	auto files = corpus(entries, seed, out);
	std::cout << "wrote " << files.size() << " workloads to " << out << "\n";
	return OK;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app {"Join-order search over left-deep plans"};
	app.require_subcommand(1);

	auto *optimize_cmd = app.add_subcommand("optimize", "Find a join order for one workload");
	std::string file;
	std::string optimizer = "extreme";
	std::string trace_path;
	std::string cache_path;
	bool execute = false;
	SearchFlags opt_search;
	DbFlags opt_db;
	optimize_cmd->add_option("file", file, "Workload JSON or .sql file")->required();
	optimize_cmd->add_option("--optimizer", optimizer)->capture_default_str()->check(
	    CLI::IsMember({"extreme", "mean", "dp", "goo", "geqo"}));
	optimize_cmd->add_option("--trace", trace_path, "Write the search trace (JSON lines)");
	optimize_cmd->add_option("--cache", cache_path, "Cost cache file, loaded and updated");
	optimize_cmd->add_flag("--execute", execute, "Run the chosen plan and report its latency");
	opt_search.add(*optimize_cmd);
	opt_db.add(*optimize_cmd);

	auto *bench_cmd = app.add_subcommand("bench", "Run optimizers over a workload directory");
	std::string dir;
	std::string optimizers = "extreme";
	std::string baseline = "dp";
	double epsilon = 0.05;
	std::string out_dir = "report";
	SearchFlags bench_search;
	DbFlags bench_db;
	bench_cmd->add_option("dir", dir, "Directory of workload files")->required();
	bench_cmd->add_option("--optimizers", optimizers, "Comma-separated list")->capture_default_str();
	bench_cmd->add_option("--baseline", baseline)->capture_default_str()->check(
	    CLI::IsMember({"dp", "goo", "geqo", "extreme", "mean", "default"}));
	bench_cmd->add_option("--epsilon", epsilon, "Tolerance for 'same'")->capture_default_str()->check(
	    CLI::NonNegativeNumber);
	bench_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
	bench_search.add(*bench_cmd);
	bench_db.add(*bench_cmd);

	auto *gen_cmd = app.add_subcommand("gen", "Generate synthetic workloads");
	std::string topology;
	std::size_t n = 0;
	std::size_t count = 1;
	std::uint64_t gen_seed = 0;
	std::string gen_out = "workloads";
	bool acceptance = false;
	gen_cmd->add_option("--topology", topology)->check(CLI::IsMember({"chain", "star", "cycle", "clique"}));
	gen_cmd->add_option("--n", n, "Relations per instance");
	gen_cmd->add_option("--count", count, "Instances")->capture_default_str();
	gen_cmd->add_option("--seed", gen_seed, "Master seed")->capture_default_str();
	gen_cmd->add_option("--out", gen_out)->capture_default_str();
	gen_cmd->add_flag("--acceptance", acceptance, "Generate the 200-instance evaluation corpus");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		const int code = app.exit(e);
		return code == 0 ? OK : USAGE;
	}

	try {
		if (*optimize_cmd) {
			return cmd_optimize(file, optimizer, opt_search, opt_db, trace_path, cache_path, execute);
		}
		if (*bench_cmd) {
			return cmd_bench(dir, optimizers, baseline, epsilon, out_dir, bench_search, bench_db);
		}
		return cmd_gen(topology, n, count, gen_seed, gen_out, acceptance);
	} catch (const WorkloadError &e) {
		std::cerr << "workload error: " << e.what() << "\n";
		return WORKLOAD;
	} catch (const OracleError &e) {
		std::cerr << "database error: " << e.what() << "\n";
		return DBMS;
	} catch (const std::invalid_argument &e) {
		std::cerr << "usage error: " << e.what() << "\n";
		return USAGE;
	} catch (const Error &e) {
		std::cerr << "error: " << e.what() << "\n";
		return WORKLOAD;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return USAGE;
	}
}
