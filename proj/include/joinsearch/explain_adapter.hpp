#pragma once

#include "joinsearch/hint_rewrite.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace joinsearch {

enum class ExplainFormat { json, text };

std::string to_string(ExplainFormat format);
ExplainFormat explain_format_from_string(const std::string &text);

struct DbTarget {
	std::string dsn;
	//! Applies to executed statements; EXPLAIN runs without a timeout.
	std::uint64_t statement_timeout_ms = 60000;
	std::uint64_t connect_timeout_s = 10;
	ExplainFormat explain_format = ExplainFormat::json;
	//! execute_latency refuses to run unless set.
	bool allow_execution = false;
};

//! Connection string with password values masked, safe for logs and errors.
std::string redact_dsn(std::string_view dsn);

//! One database connection. exec() returns all rows as text and throws
//! DbError, or TimeoutError for a cancelled statement (SQLSTATE 57014).
class SqlSession {
public:
	using Rows = std::vector<std::vector<std::string>>;

	virtual ~SqlSession() = default;
	virtual Rows exec(const std::string &sql) = 0;
};

using SessionFactory = std::function<std::unique_ptr<SqlSession>()>;

//! Sessions over libpq, loaded at runtime. Throws ConnectError when the
//! library is missing or the server is unreachable.
SessionFactory libpq_session_factory(const DbTarget &target);

//! Receives every outgoing statement. Must be thread-safe.
using SqlLogSink = std::function<void(const std::string &statement)>;

//! Decorates sessions from `inner` so every statement goes to `sink` first.
SessionFactory logging_session_factory(SessionFactory inner, SqlLogSink sink);

//===--------------------------------------------------------------------===//
// Plans
//===--------------------------------------------------------------------===//
struct PlanNode {
	std::string node_type;
	std::string relation; // empty unless a scan
	std::string alias;    // lower-cased; empty unless a scan
	double total_cost = 0.0;
	std::vector<PlanNode> children;
};

struct ExplainPlan {
	PlanNode root;
	double total_cost() const {
		return root.total_cost;
	}
};

//! Throws ExplainParseError.
ExplainPlan parse_explain_json(std::string_view text);
ExplainPlan parse_explain_text(std::span<const std::string> lines);

//! Scan aliases in left-to-right leaf order.
std::vector<std::string> leaf_aliases(const PlanNode &root);

//! Checks that the plan joins `requested` left-deep in that order: every join
//! node's alias set must be one of the requested prefixes (inner/outer input
//! swaps are accepted). Aliases outside `requested` are ignored. Throws
//! HintRejectedError carrying both orders.
void verify_join_order(const ExplainPlan &plan, const std::vector<std::string> &requested);

//===--------------------------------------------------------------------===//
// Oracle
//===--------------------------------------------------------------------===//
struct ExplainOptions {
	RewriteMode mode = RewriteMode::explicit_join;
	HintFormat format = HintFormat::linear;
	bool verify = true;
	bool allow_cross_join = false;
};

//! EXPLAIN-backed cost oracle. Sessions are pooled; each concurrent call
//! borrows its own, so the oracle may be shared by workers.
class ExplainOracle : public CostOracle {
public:
	ExplainOracle(const JoinGraph &graph, DbTarget target, SessionFactory factory, ExplainOptions options = {});

	PlanCost cost(const LeadingExpression &expr) override;
	CostSource source() const override {
		return CostSource::explain;
	}

	//! Plan for the rewritten statement (no cost extraction shortcuts).
	ExplainPlan explain(const LeadingExpression &expr);
	//! Planner cost of the original statement, unhinted.
	double default_cost();
	//! Runs the rewritten statement under the statement timeout; milliseconds.
	//! Throws ExecutionTimeout when cancelled. Never cached.
	double execute_latency(const LeadingExpression &expr);
	double execute_default_latency();

	std::uint64_t round_trips() const;

private:
	class Lease;
	std::unique_ptr<SqlSession> borrow();
	void give_back(std::unique_ptr<SqlSession> session);
	ExplainPlan explain_sql(const std::string &sql);
	double timed_run(const std::string &sql);

	const JoinGraph &graph_;
	DbTarget target_;
	SessionFactory factory_;
	ExplainOptions options_;
	mutable std::mutex mutex_;
	std::vector<std::unique_ptr<SqlSession>> idle_;
	std::uint64_t round_trips_ = 0;
};

} // namespace joinsearch
