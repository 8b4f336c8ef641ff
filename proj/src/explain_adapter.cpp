#include "joinsearch/explain_adapter.hpp"

#include "json.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <chrono>
#include <map>
#include <regex>

namespace joinsearch {

namespace {

std::string join_names(const std::vector<std::string> &names) {
	std::string out;
	for (const auto &n : names) {
		if (!out.empty()) {
			out += ' ';
		}
		out += n;
	}
	return out;
}

} // namespace

HintRejectedError::HintRejectedError(std::vector<std::string> requested, std::vector<std::string> observed)
    : OracleError("planner did not follow the requested join order: requested (" + join_names(requested) +
                  "), observed (" + join_names(observed) + ")"),
      requested_(std::move(requested)), observed_(std::move(observed)) {
}

std::string to_string(ExplainFormat format) {
	return format == ExplainFormat::json ? "json" : "text";
}

ExplainFormat explain_format_from_string(const std::string &text) {
	if (text == "json") {
		return ExplainFormat::json;
	}
	if (text == "text") {
		return ExplainFormat::text;
	}
	throw std::invalid_argument("unknown explain format '" + text + "'");
}

std::string redact_dsn(std::string_view dsn) {
	std::string out(dsn);
	static const std::regex uri_userinfo(R"(^(postgres(?:ql)?://[^:@/?]*):[^@/?]*@)", std::regex::icase);
	static const std::regex uri_param(R"(([?&]password=)[^&]*)", std::regex::icase);
	static const std::regex keyword(R"((\bpassword\s*=\s*)('(?:[^'\\]|\\.)*'|[^\s']\S*))", std::regex::icase);
	static const std::regex uri_scheme(R"(^\s*postgres(?:ql)?://)", std::regex::icase);
	if (std::regex_search(out, uri_scheme)) {
		out = std::regex_replace(out, uri_userinfo, "$1:***@");
		return std::regex_replace(out, uri_param, "$1***");
	}
	return std::regex_replace(out, keyword, "$1***");
}

//===--------------------------------------------------------------------===//
// libpq, resolved at runtime
//===--------------------------------------------------------------------===//
namespace {

struct pg_conn;
struct pg_result;

constexpr int CONNECTION_OK = 0;
constexpr int PGRES_COMMAND_OK = 1;
constexpr int PGRES_TUPLES_OK = 2;
constexpr int PG_DIAG_SQLSTATE = 'C';

struct LibPq {
	pg_conn *(*connectdb_params)(const char *const *, const char *const *, int);
	int (*status)(const pg_conn *);
	char *(*error_message)(const pg_conn *);
	void (*finish)(pg_conn *);
	pg_result *(*exec)(pg_conn *, const char *);
	int (*result_status)(const pg_result *);
	char *(*result_error_field)(const pg_result *, int);
	char *(*result_error_message)(const pg_result *);
	int (*ntuples)(const pg_result *);
	int (*nfields)(const pg_result *);
	char *(*getvalue)(const pg_result *, int, int);
	void (*clear)(pg_result *);

	static const LibPq &get() {
		static const LibPq lib = load();
		return lib;
	}

private:
	static LibPq load() {
		void *handle = dlopen("libpq.so.5", RTLD_NOW | RTLD_LOCAL);
		if (!handle) {
			handle = dlopen("libpq.so", RTLD_NOW | RTLD_LOCAL);
		}
		if (!handle) {
			throw ConnectError("libpq could not be loaded: " + std::string(dlerror()));
		}
		LibPq lib;
		auto bind = [&](auto &fn, const char *name) {
			void *sym = dlsym(handle, name);
			if (!sym) {
				throw ConnectError(std::string("libpq lacks ") + name);
			}
			fn = reinterpret_cast<std::remove_reference_t<decltype(fn)>>(sym);
		};
		bind(lib.connectdb_params, "PQconnectdbParams");
		bind(lib.status, "PQstatus");
		bind(lib.error_message, "PQerrorMessage");
		bind(lib.finish, "PQfinish");
		bind(lib.exec, "PQexec");
		bind(lib.result_status, "PQresultStatus");
		bind(lib.result_error_field, "PQresultErrorField");
		bind(lib.result_error_message, "PQresultErrorMessage");
		bind(lib.ntuples, "PQntuples");
		bind(lib.nfields, "PQnfields");
		bind(lib.getvalue, "PQgetvalue");
		bind(lib.clear, "PQclear");
		return lib;
	}
};

class PqSession : public SqlSession {
public:
	explicit PqSession(const DbTarget &target) : lib_(LibPq::get()) {
		// keywords are processed in order, so a connect_timeout inside the dsn wins
		const auto timeout = std::to_string(std::max<std::uint64_t>(1, target.connect_timeout_s));
		const char *keys[] = {"connect_timeout", "dbname", nullptr};
		const char *values[] = {timeout.c_str(), target.dsn.c_str(), nullptr};
		conn_ = lib_.connectdb_params(keys, values, 1);
		if (!conn_ || lib_.status(conn_) != CONNECTION_OK) {
			std::string why = conn_ ? lib_.error_message(conn_) : "out of memory";
			if (conn_) {
				lib_.finish(conn_);
			}
			while (!why.empty() && (why.back() == '\n' || why.back() == ' ')) {
				why.pop_back();
			}
			throw ConnectError("cannot connect to '" + redact_dsn(target.dsn) + "': " + why);
		}
	}
	~PqSession() override {
		lib_.finish(conn_);
	}

	Rows exec(const std::string &sql) override {
		pg_result *res = lib_.exec(conn_, sql.c_str());
		if (!res) {
			throw ConnectError(std::string("connection lost: ") + lib_.error_message(conn_));
		}
		const int status = lib_.result_status(res);
		if (status != PGRES_COMMAND_OK && status != PGRES_TUPLES_OK) {
			const char *state = lib_.result_error_field(res, PG_DIAG_SQLSTATE);
			std::string sqlstate = state ? state : "";
			std::string message = lib_.result_error_message(res);
			lib_.clear(res);
			while (!message.empty() && message.back() == '\n') {
				message.pop_back();
			}
			if (sqlstate == "57014") {
				throw TimeoutError("statement cancelled: " + message);
			}
			if (lib_.status(conn_) != CONNECTION_OK) {
				throw ConnectError("connection lost: " + message);
			}
			throw DbError(message + (sqlstate.empty() ? "" : " [SQLSTATE " + sqlstate + "]"));
		}
		Rows rows;
		const int n = lib_.ntuples(res);
		const int m = lib_.nfields(res);
		rows.reserve(static_cast<std::size_t>(n));
		for (int r = 0; r < n; r++) {
			auto &row = rows.emplace_back();
			for (int c = 0; c < m; c++) {
				row.emplace_back(lib_.getvalue(res, r, c));
			}
		}
		lib_.clear(res);
		return rows;
	}

private:
	const LibPq &lib_;
	pg_conn *conn_ = nullptr;
};

class LoggingSession : public SqlSession {
public:
	LoggingSession(std::unique_ptr<SqlSession> inner, SqlLogSink sink) : inner_(std::move(inner)), sink_(std::move(sink)) {
	}
	Rows exec(const std::string &sql) override {
		sink_(sql);
		return inner_->exec(sql);
	}

private:
	std::unique_ptr<SqlSession> inner_;
	SqlLogSink sink_;
};

} // namespace

SessionFactory libpq_session_factory(const DbTarget &target) {
	return [target] { return std::make_unique<PqSession>(target); };
}

SessionFactory logging_session_factory(SessionFactory inner, SqlLogSink sink) {
	return [inner = std::move(inner), sink = std::move(sink)] {
		return std::make_unique<LoggingSession>(inner(), sink);
	};
}

//===--------------------------------------------------------------------===//
// Plan parsing
//===--------------------------------------------------------------------===//
namespace {

PlanNode from_json(const nlohmann::json &node) {
	if (!node.is_object() || !node.contains("Node Type")) {
		throw ExplainParseError("plan node without 'Node Type'");
	}
	PlanNode out;
	out.node_type = node["Node Type"].get<std::string>();
	if (auto it = node.find("Total Cost"); it != node.end() && it->is_number()) {
		out.total_cost = it->get<double>();
	} else {
		throw ExplainParseError("plan node '" + out.node_type + "' without 'Total Cost'");
	}
	if (auto it = node.find("Relation Name"); it != node.end() && it->is_string()) {
		out.relation = it->get<std::string>();
	}
	if (auto it = node.find("Alias"); it != node.end() && it->is_string()) {
		out.alias = to_lower(it->get<std::string>());
	}
	if (auto it = node.find("Plans"); it != node.end()) {
		if (!it->is_array()) {
			throw ExplainParseError("'Plans' is not an array");
		}
		for (const auto &child : *it) {
			out.children.push_back(from_json(child));
		}
	}
	return out;
}

std::string trim(std::string_view s) {
	auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string_view::npos) {
		return {};
	}
	auto e = s.find_last_not_of(" \t\r\n");
	return std::string(s.substr(b, e - b + 1));
}

PlanNode from_text_line(const std::string &text) {
	static const std::regex cost(R"(\(cost=([0-9.eE+-]+)\.\.([0-9.eE+-]+))");
	PlanNode node;
	std::smatch m;
	if (!std::regex_search(text, m, cost)) {
		throw ExplainParseError("plan line without a cost estimate: '" + text + "'");
	}
	try {
		node.total_cost = std::stod(m[2].str());
	} catch (const std::exception &) {
		throw ExplainParseError("bad cost figure in '" + text + "'");
	}
	auto head = trim(std::string_view(text).substr(0, static_cast<std::size_t>(m.position(0))));
	node.node_type = head;
	auto on = head.rfind(" on ");
	if (on != std::string::npos) {
		node.node_type = head.substr(0, on);
		std::string rest = trim(std::string_view(head).substr(on + 4));
		auto space = rest.find(' ');
		node.relation = rest.substr(0, space);
		if (space != std::string::npos) {
			node.alias = to_lower(trim(std::string_view(rest).substr(space + 1)));
		} else {
			auto dot = node.relation.rfind('.');
			node.alias = to_lower(dot == std::string::npos ? node.relation : node.relation.substr(dot + 1));
		}
		if (node.node_type.starts_with("Bitmap Index Scan")) {
			// "on" names the index here, not a relation
			node.relation.clear();
			node.alias.clear();
		}
		if (auto using_pos = node.node_type.find(" using "); using_pos != std::string::npos) {
			node.node_type = node.node_type.substr(0, using_pos);
		}
	}
	return node;
}

} // namespace

ExplainPlan parse_explain_json(std::string_view text) {
	nlohmann::json doc;
	try {
		doc = nlohmann::json::parse(text);
	} catch (const nlohmann::json::exception &e) {
		throw ExplainParseError(std::string("EXPLAIN output is not JSON: ") + e.what());
	}
	if (doc.is_array()) {
		if (doc.empty()) {
			throw ExplainParseError("empty EXPLAIN output");
		}
		doc = doc[0];
	}
	if (!doc.is_object() || !doc.contains("Plan")) {
		throw ExplainParseError("EXPLAIN output without a 'Plan'");
	}
	try {
		return ExplainPlan {from_json(doc["Plan"])};
	} catch (const nlohmann::json::exception &e) {
		throw ExplainParseError(std::string("malformed EXPLAIN plan: ") + e.what());
	}
}

ExplainPlan parse_explain_text(std::span<const std::string> lines) {
	struct Open {
		std::size_t indent;
		PlanNode *node;
	};
	ExplainPlan plan;
	std::vector<Open> stack;
	bool have_root = false;
	for (const auto &raw : lines) {
		if (trim(raw).empty()) {
			continue;
		}
		if (!have_root) {
			plan.root = from_text_line(trim(raw));
			stack.push_back({0, &plan.root});
			have_root = true;
			continue;
		}
		auto arrow = raw.find("->");
		if (arrow == std::string::npos || !trim(std::string_view(raw).substr(0, arrow)).empty()) {
			continue; // detail line (conditions, filters, InitPlan headers)
		}
		auto node = from_text_line(trim(std::string_view(raw).substr(arrow + 2)));
		const auto indent = arrow + 1;
		while (stack.size() > 1 && stack.back().indent >= indent) {
			stack.pop_back();
		}
		auto &children = stack.back().node->children;
		children.push_back(std::move(node));
		stack.push_back({indent, &children.back()});
	}
	if (!have_root) {
		throw ExplainParseError("empty EXPLAIN output");
	}
	return plan;
}

std::vector<std::string> leaf_aliases(const PlanNode &root) {
	std::vector<std::string> out;
	std::function<void(const PlanNode &)> walk = [&](const PlanNode &n) {
		if (!n.alias.empty()) {
			out.push_back(n.alias);
			return;
		}
		for (const auto &c : n.children) {
			walk(c);
		}
	};
	walk(root);
	return out;
}

void verify_join_order(const ExplainPlan &plan, const std::vector<std::string> &requested) {
	std::map<std::string, std::size_t> position;
	for (std::size_t i = 0; i < requested.size(); i++) {
		position[requested[i]] = i;
	}
	std::vector<std::string> observed;
	for (auto &a : leaf_aliases(plan.root)) {
		if (position.count(a)) {
			observed.push_back(a);
		}
	}
	auto reject = [&] { throw HintRejectedError(requested, observed); };
	if (observed.size() != requested.size()) {
		reject();
	}
	// bit i = requested[i]; requested prefixes are the masks 2^k - 1
	std::function<std::uint64_t(const PlanNode &)> check = [&](const PlanNode &n) -> std::uint64_t {
		std::uint64_t mask = 0;
		if (!n.alias.empty() || n.children.empty()) {
			auto it = position.find(n.alias);
			return it == position.end() ? 0 : std::uint64_t(1) << it->second;
		}
		int inputs = 0;
		for (const auto &c : n.children) {
			auto sub = check(c);
			inputs += sub != 0;
			mask |= sub;
		}
		if (inputs >= 2 && (mask & (mask + 1)) != 0) {
			reject();
		}
		return mask;
	};
	check(plan.root);
}

//===--------------------------------------------------------------------===//
// ExplainOracle
//===--------------------------------------------------------------------===//
ExplainOracle::ExplainOracle(const JoinGraph &graph, DbTarget target, SessionFactory factory, ExplainOptions options)
    : graph_(graph), target_(std::move(target)), factory_(std::move(factory)), options_(options) {
	if (!graph_.source_sql) {
		throw ParseError("workload '" + graph_.label + "' carries no SQL text; EXPLAIN costing needs it");
	}
}

std::unique_ptr<SqlSession> ExplainOracle::borrow() {
	{
		std::lock_guard lock(mutex_);
		if (!idle_.empty()) {
			auto s = std::move(idle_.back());
			idle_.pop_back();
			return s;
		}
	}
	auto session = factory_();
	// forced orders are only meaningful with both collapse limits in place
	session->exec("SET join_collapse_limit = 1");
	session->exec("SET from_collapse_limit = 1");
	session->exec("SET statement_timeout = 0");
	return session;
}

void ExplainOracle::give_back(std::unique_ptr<SqlSession> session) {
	std::lock_guard lock(mutex_);
	idle_.push_back(std::move(session));
}

class ExplainOracle::Lease {
public:
	explicit Lease(ExplainOracle &owner) : owner_(owner), session_(owner.borrow()) {
	}
	~Lease() {
		if (session_ && !broken_) {
			owner_.give_back(std::move(session_));
		}
	}
	SqlSession &operator*() {
		return *session_;
	}
	//! Drop the connection instead of pooling it (state unknown after a failure).
	void discard() {
		broken_ = true;
	}

private:
	ExplainOracle &owner_;
	std::unique_ptr<SqlSession> session_;
	bool broken_ = false;
};

std::uint64_t ExplainOracle::round_trips() const {
	std::lock_guard lock(mutex_);
	return round_trips_;
}

ExplainPlan ExplainOracle::explain_sql(const std::string &sql) {
	const bool json = target_.explain_format == ExplainFormat::json;
	const std::string statement = (json ? "EXPLAIN (FORMAT JSON) " : "EXPLAIN ") + sql;
	Lease lease(*this);
	SqlSession::Rows rows;
	try {
		rows = (*lease).exec(statement);
	} catch (const ConnectError &) {
		lease.discard();
		throw;
	}
	{
		std::lock_guard lock(mutex_);
		round_trips_++;
	}
	if (json) {
		std::string text;
		for (const auto &r : rows) {
			if (!r.empty()) {
				text += r[0];
				text += '\n';
			}
		}
		return parse_explain_json(text);
	}
	std::vector<std::string> lines;
	for (const auto &r : rows) {
		if (!r.empty()) {
			lines.push_back(r[0]);
		}
	}
	return parse_explain_text(lines);
}

ExplainPlan ExplainOracle::explain(const LeadingExpression &expr) {
	validate_expression(graph_, expr, true);
	auto sql = rewrite_sql(graph_, expr, options_.mode, options_.format, options_.allow_cross_join);
	auto plan = explain_sql(sql);
	if (options_.verify) {
		verify_join_order(plan, graph_.order_names(expr.order));
	}
	return plan;
}

PlanCost ExplainOracle::cost(const LeadingExpression &expr) {
	return PlanCost {explain(expr).total_cost(), CostSource::explain, false};
}

double ExplainOracle::default_cost() {
	return explain_sql(*graph_.source_sql).total_cost();
}

double ExplainOracle::timed_run(const std::string &sql) {
	if (!target_.allow_execution) {
		throw DbError("query execution is disabled; enable it explicitly to measure latency");
	}
	Lease lease(*this);
	auto &session = *lease;
	session.exec("SET statement_timeout = " + std::to_string(target_.statement_timeout_ms));
	double elapsed = 0.0;
	try {
		const auto start = std::chrono::steady_clock::now();
		session.exec(sql);
		elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
	} catch (const TimeoutError &e) {
		session.exec("SET statement_timeout = 0");
		throw ExecutionTimeout(std::string("execution exceeded ") + std::to_string(target_.statement_timeout_ms) +
		                       " ms: " + e.what());
	} catch (const ConnectError &) {
		lease.discard();
		throw;
	} catch (...) {
		session.exec("SET statement_timeout = 0");
		throw;
	}
	session.exec("SET statement_timeout = 0");
	return elapsed;
}

double ExplainOracle::execute_latency(const LeadingExpression &expr) {
	validate_expression(graph_, expr, true);
	return timed_run(rewrite_sql(graph_, expr, options_.mode, options_.format, options_.allow_cross_join));
}

double ExplainOracle::execute_default_latency() {
	return timed_run(*graph_.source_sql);
}

} // namespace joinsearch
