#pragma once

#include "joinsearch/baselines.hpp"
#include "joinsearch/explain_adapter.hpp"
#include "joinsearch/two_stage.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace joinsearch {

enum class Outcome { improved, same, degraded, error };

std::string to_string(Outcome outcome);
Outcome outcome_from_string(const std::string &text);
//! improved iff ratio < 1 - epsilon, degraded iff ratio > 1 + epsilon.
Outcome classify(double ratio, double epsilon);

struct RunRecord {
	std::string query_id;
	std::size_t n_relations = 0;
	std::string optimizer;
	double best_cost = 0.0;
	double baseline_cost = 0.0;
	std::optional<double> dp_cost;
	double ratio = 1.0;
	Outcome outcome = Outcome::same;
	std::uint64_t oracle_calls = 0;
	double wall_ms = 0.0;
	std::uint64_t seed = 0;
	//! Diagnostic only; not part of the emitted report.
	std::string error;
	LeadingExpression plan;
};

struct SummaryRow {
	std::string optimizer;
	std::string stratum; // "n<12" or "n>=12"
	std::size_t count = 0;
	double pct_improved = 0.0;
	double pct_same = 0.0;
	double pct_degraded = 0.0;
	double pct_error = 0.0;
	double geomean_ratio = 0.0;
	double median_ratio = 0.0;
};

struct BenchReport {
	std::vector<RunRecord> records;
};

constexpr std::size_t STRATUM_SPLIT = 12;

//! Names accepted in BenchConfig::optimizers and as the baseline.
const std::vector<std::string> &optimizer_names();

struct BenchConfig {
	std::vector<std::string> optimizers {"extreme"};
	//! "dp" on synthetic workloads; "default" (the unhinted plan) needs a DBMS.
	std::string baseline = "dp";
	SearchParams params;
	std::uint64_t t_pair = 50;
	std::uint64_t t_main = 2000;
	bool warm_start_geqo = false;
	GeqoParams geqo;
	std::uint64_t seed = 0;
	double epsilon = 0.05;
	std::size_t workers = 1;
	//! Present: costs come from EXPLAIN instead of the catalog.
	std::optional<DbTarget> db;
	ExplainOptions explain;
	//! Overrides the session source (tests); defaults to libpq.
	SessionFactory session_factory;
	//! Called once per record as it completes (any thread, serialized).
	std::function<void(const RunRecord &)> on_record;
};

struct OptimizerRun {
	LeadingExpression plan;
	double cost = 0.0;
	std::uint64_t oracle_calls = 0;
};

//! Runs one named optimizer on a loaded workload. `seed` drives every random choice.
OptimizerRun run_optimizer(const std::string &name, const Workload &workload, CostOracle &oracle,
                           const BenchConfig &config, std::uint64_t seed);

//! Workload files (*.json, *.sql) of a directory in name order.
std::vector<std::filesystem::path> list_workloads(const std::filesystem::path &dir);

BenchReport run_bench(const std::vector<std::filesystem::path> &workloads, const BenchConfig &config);
BenchReport run_bench(const std::filesystem::path &dir, const BenchConfig &config);

std::string report_csv(const BenchReport &report);
std::string report_json(const BenchReport &report);
//! Writes report.csv and report.json into `out_dir`.
void write_report(const BenchReport &report, const std::filesystem::path &out_dir);

//! Per optimizer and stratum. Throws EmptyReport.
std::vector<SummaryRow> report_summary(const BenchReport &report);
std::string format_summary(const std::vector<SummaryRow> &rows);

} // namespace joinsearch
