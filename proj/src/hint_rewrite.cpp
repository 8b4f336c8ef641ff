#include "joinsearch/hint_rewrite.hpp"

#include <cctype>
#include <stdexcept>

namespace joinsearch {

std::string to_string(HintFormat format) {
	return format == HintFormat::linear ? "linear" : "bracketed";
}

HintFormat hint_format_from_string(const std::string &text) {
	if (text == "linear") {
		return HintFormat::linear;
	}
	if (text == "bracketed") {
		return HintFormat::bracketed;
	}
	throw std::invalid_argument("unknown hint format '" + text + "'");
}

std::string to_string(RewriteMode mode) {
	return mode == RewriteMode::hint_only ? "hint" : "explicit";
}

RewriteMode rewrite_mode_from_string(const std::string &text) {
	if (text == "hint" || text == "hint_only") {
		return RewriteMode::hint_only;
	}
	if (text == "explicit" || text == "explicit_join") {
		return RewriteMode::explicit_join;
	}
	throw std::invalid_argument("unknown rewrite mode '" + text + "'");
}

std::string emit_hint(const JoinGraph &graph, const LeadingExpression &expr, HintFormat format) {
	validate_expression(graph, expr, true);
	if (expr.size() < 2) {
		throw IncompleteExpression("a leading hint needs at least two aliases");
	}
	std::string body;
	if (format == HintFormat::linear) {
		body = graph.order_key(expr.order);
	} else {
		body = "(" + graph.name(expr.order[0]) + " " + graph.name(expr.order[1]) + ")";
		for (std::size_t i = 2; i < expr.size(); i++) {
			body = "(" + body + " " + graph.name(expr.order[i]) + ")";
		}
	}
	return "/*+ Leading(" + body + ") */";
}

namespace {

class HintParser {
public:
	explicit HintParser(std::string_view text) : text_(text) {
	}

	std::vector<std::string> parse() {
		skip_space();
		expect("/*+");
		skip_space();
		auto word = identifier();
		if (to_lower(word) != "leading") {
			fail("expected Leading");
		}
		skip_space();
		expect("(");
		skip_space();
		std::vector<std::string> names;
		if (peek() == '(') {
			group(names);
			skip_space();
		} else {
			while (pos_ < text_.size() && peek() != ')') {
				if (peek() == '(') {
					fail("mixed bracketed and linear forms");
				}
				names.push_back(to_lower(identifier()));
				skip_space();
			}
		}
		expect(")");
		skip_space();
		expect("*/");
		skip_space();
		if (pos_ != text_.size()) {
			fail("trailing text after the hint");
		}
		if (names.size() < 2) {
			fail("a leading hint needs at least two aliases");
		}
		for (std::size_t i = 0; i < names.size(); i++) {
			for (std::size_t j = 0; j < i; j++) {
				if (names[i] == names[j]) {
					fail("alias '" + names[i] + "' appears twice");
				}
			}
		}
		return names;
	}

private:
	//! ( item item ) where the right item must be a plain alias.
	void group(std::vector<std::string> &names) {
		expect("(");
		skip_space();
		if (peek() == '(') {
			group(names);
		} else {
			names.push_back(to_lower(identifier()));
		}
		skip_space();
		if (peek() == '(') {
			throw NonLeftDeepHint("hint nests to the right (only left-deep orders are accepted)");
		}
		if (peek() == ')') {
			fail("a bracketed pair needs two members");
		}
		names.push_back(to_lower(identifier()));
		skip_space();
		expect(")");
	}

	char peek() const {
		return pos_ < text_.size() ? text_[pos_] : '\0';
	}
	void skip_space() {
		while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
			pos_++;
		}
	}
	void expect(std::string_view token) {
		if (text_.substr(pos_, token.size()) != token) {
			fail("expected '" + std::string(token) + "'");
		}
		pos_ += token.size();
	}
	std::string identifier() {
		const auto start = pos_;
		while (pos_ < text_.size() &&
		       (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '$')) {
			pos_++;
		}
		if (pos_ == start || std::isdigit(static_cast<unsigned char>(text_[start]))) {
			fail("expected an alias");
		}
		return std::string(text_.substr(start, pos_ - start));
	}
	[[noreturn]] void fail(const std::string &message) const {
		throw MalformedHint(message + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
	}

	std::string_view text_;
	std::size_t pos_ = 0;
};

} // namespace

std::vector<std::string> parse_hint_names(std::string_view hint) {
	return HintParser(hint).parse();
}

LeadingExpression parse_hint(const JoinGraph &graph, std::string_view hint) {
	auto names = parse_hint_names(hint);
	return LeadingExpression {graph.resolve(names)};
}

std::string linearize_hint(std::string_view hint) {
	auto names = parse_hint_names(hint);
	std::string body;
	for (const auto &n : names) {
		if (!body.empty()) {
			body += ' ';
		}
		body += n;
	}
	return "/*+ Leading(" + body + ") */";
}

std::string rewrite_sql(const JoinGraph &graph, const LeadingExpression &expr, RewriteMode mode, HintFormat format,
                        bool allow_cross_join) {
	validate_expression(graph, expr, true);
	if (!graph.source_sql) {
		throw ParseError("workload '" + graph.label + "' carries no SQL text to rewrite");
	}
	if (mode == RewriteMode::hint_only) {
		return emit_hint(graph, expr, format) + " " + *graph.source_sql;
	}
	if (!graph.shape) {
		throw ParseError("workload '" + graph.label + "' has no parsed query shape");
	}
	const auto &shape = *graph.shape;
	auto from_item = [&](AliasId a) { return graph.alias(a).table + " " + graph.name(a); };

	std::string sql = "SELECT " + shape.select_list + " FROM " + from_item(expr.order[0]);
	AliasMask members = AliasMask(1) << expr.order[0];
	for (std::size_t i = 1; i < expr.size(); i++) {
		const auto a = expr.order[i];
		std::string on;
		for (const auto &e : graph.edges()) {
			const bool joins = (e.left == a && (members >> e.right & 1)) || (e.right == a && (members >> e.left & 1));
			if (!joins) {
				continue;
			}
			if (!on.empty()) {
				on += " AND ";
			}
			on += e.predicate();
		}
		if (on.empty()) {
			if (!allow_cross_join) {
				throw DisconnectedOrder("alias '" + graph.name(a) + "' has no join predicate to '" +
				                        graph.order_key(std::span(expr.order).first(i)) + "'");
			}
			sql += " CROSS JOIN " + from_item(a);
		} else {
			sql += " JOIN " + from_item(a) + " ON " + on;
		}
		members |= AliasMask(1) << a;
	}
	if (!shape.local_predicates.empty()) {
		sql += " WHERE ";
		for (std::size_t i = 0; i < shape.local_predicates.size(); i++) {
			if (i) {
				sql += " AND ";
			}
			sql += shape.local_predicates[i].text;
		}
	}
	if (!shape.tail.empty()) {
		sql += " " + shape.tail;
	}
	return sql;
}

} // namespace joinsearch
