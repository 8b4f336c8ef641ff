#include "joinsearch/join_graph.hpp"

#include <array>
#include <cctype>
#include <set>

namespace joinsearch {

namespace {

enum class TokenKind { IDENT, QUOTED_IDENT, NUMBER, STRING, SYMBOL, END };

struct Token {
	TokenKind kind;
	std::size_t begin;
	std::size_t end;
	std::string text;  // raw source slice
	std::string upper; // keyword comparison form (identifiers only)

	bool is_keyword(std::string_view kw) const {
		return kind == TokenKind::IDENT && upper == kw;
	}
	bool is_symbol(std::string_view sym) const {
		return kind == TokenKind::SYMBOL && text == sym;
	}
	bool is_name() const {
		return kind == TokenKind::IDENT || kind == TokenKind::QUOTED_IDENT;
	}
};

std::string to_upper(std::string_view s) {
	std::string out(s);
	for (auto &ch : out) {
		ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
	}
	return out;
}

std::vector<Token> tokenize(std::string_view src) {
	static constexpr std::array<std::string_view, 10> MULTI = {"!~~", "<=", ">=", "<>", "!=", "::", "||", "~~", "!~", "~*"};
	std::vector<Token> out;
	std::size_t i = 0;
	const auto n = src.size();
	auto push = [&](TokenKind kind, std::size_t b, std::size_t e) {
		Token t {kind, b, e, std::string(src.substr(b, e - b)), {}};
		if (kind == TokenKind::IDENT) {
			t.upper = to_upper(t.text);
		}
		out.push_back(std::move(t));
	};
	while (i < n) {
		const char ch = src[i];
		const auto uch = static_cast<unsigned char>(ch);
		if (std::isspace(uch)) {
			i++;
		} else if (ch == '-' && i + 1 < n && src[i + 1] == '-') {
			while (i < n && src[i] != '\n') {
				i++;
			}
		} else if (ch == '/' && i + 1 < n && src[i + 1] == '*') {
			auto close = src.find("*/", i + 2);
			if (close == std::string_view::npos) {
				throw ParseError("unterminated comment", i);
			}
			i = close + 2;
		} else if (std::isalpha(uch) || ch == '_') {
			auto b = i;
			while (i < n && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_' || src[i] == '$')) {
				i++;
			}
			push(TokenKind::IDENT, b, i);
		} else if (std::isdigit(uch) || (ch == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
			auto b = i;
			while (i < n && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '.')) {
				i++;
			}
			push(TokenKind::NUMBER, b, i);
		} else if (ch == '\'') {
			auto b = i++;
			while (true) {
				if (i >= n) {
					throw ParseError("unterminated string literal", b);
				}
				if (src[i] == '\'') {
					if (i + 1 < n && src[i + 1] == '\'') {
						i += 2;
						continue;
					}
					i++;
					break;
				}
				i++;
			}
			push(TokenKind::STRING, b, i);
		} else if (ch == '"') {
			auto b = i;
			auto close = src.find('"', i + 1);
			if (close == std::string_view::npos) {
				throw ParseError("unterminated quoted identifier", b);
			}
			i = close + 1;
			push(TokenKind::QUOTED_IDENT, b, i);
		} else {
			std::size_t len = 1;
			for (auto m : MULTI) {
				if (src.substr(i, m.size()) == m) {
					len = m.size();
					break;
				}
			}
			push(TokenKind::SYMBOL, i, i + len);
			i += len;
		}
	}
	out.push_back(Token {TokenKind::END, n, n, {}, {}});
	return out;
}

std::string name_of(const Token &t) {
	if (t.kind == TokenKind::QUOTED_IDENT) {
		return t.text.substr(1, t.text.size() - 2);
	}
	return t.text;
}

const std::set<std::string, std::less<>> &reserved_words() {
	static const std::set<std::string, std::less<>> words = {
	    "SELECT", "FROM",  "WHERE",  "AS",    "JOIN",     "INNER",  "CROSS", "LEFT",   "RIGHT", "FULL",
	    "OUTER",  "NATURAL", "ON",   "USING", "GROUP",    "ORDER",  "LIMIT", "HAVING", "UNION", "INTERSECT",
	    "EXCEPT", "OFFSET", "FETCH", "FOR",   "WINDOW",   "AND",    "OR",    "NOT"};
	return words;
}

bool is_set_operation(const Token &t) {
	return t.is_keyword("UNION") || t.is_keyword("INTERSECT") || t.is_keyword("EXCEPT");
}

bool is_tail_start(const Token &t) {
	return t.is_keyword("GROUP") || t.is_keyword("ORDER") || t.is_keyword("LIMIT") || t.is_keyword("HAVING") ||
	       t.is_keyword("OFFSET") || t.is_keyword("FETCH") || t.is_keyword("WINDOW") || t.is_keyword("FOR");
}

struct Conjunct {
	std::size_t first; // token index range [first, last)
	std::size_t last;
};

class Parser {
public:
	explicit Parser(std::string_view src) : src_(src), tokens_(tokenize(src)) {
	}

	JoinGraph parse() {
		expect_keyword("SELECT");
		auto select_begin = peek().begin;
		skip_select_list();
		auto select_end = peek().begin;
		graph_.shape.emplace();
		graph_.shape->select_list = trim(src_.substr(select_begin, select_end - select_begin));
		expect_keyword("FROM");
		parse_from();
		if (peek().is_keyword("WHERE")) {
			advance();
			auto begin = pos_;
			auto end = scan_condition_end();
			if (begin == end) {
				throw ParseError("empty WHERE clause", peek().begin);
			}
			split_conjuncts(begin, end, true);
		}
		parse_tail();
		for (const auto &c : conjuncts_) {
			classify(c);
		}
		graph_.source_sql = std::string(src_);
		return std::move(graph_);
	}

private:
	const Token &peek(std::size_t ahead = 0) const {
		return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
	}
	const Token &advance() {
		const auto &t = tokens_[pos_];
		if (t.kind != TokenKind::END) {
			pos_++;
		}
		return t;
	}
	void expect_keyword(std::string_view kw) {
		if (!peek().is_keyword(kw)) {
			throw ParseError("expected " + std::string(kw), peek().begin);
		}
		advance();
	}
	static std::string trim(std::string_view s) {
		auto b = s.find_first_not_of(" \t\r\n");
		if (b == std::string_view::npos) {
			return {};
		}
		auto e = s.find_last_not_of(" \t\r\n");
		return std::string(s.substr(b, e - b + 1));
	}
	std::string slice(std::size_t first, std::size_t last) const {
		return trim(src_.substr(tokens_[first].begin, tokens_[last - 1].end - tokens_[first].begin));
	}

	void reject_subquery(const Token &t) const {
		if (t.is_keyword("SELECT") || t.is_keyword("EXISTS")) {
			throw ParseError("subqueries are not supported", t.begin);
		}
		if (is_set_operation(t)) {
			throw ParseError("set operations are not supported", t.begin);
		}
	}

	void skip_select_list() {
		int depth = 0;
		while (true) {
			const auto &t = peek();
			if (t.kind == TokenKind::END) {
				throw ParseError("missing FROM clause", t.begin);
			}
			if (t.is_symbol("(")) {
				depth++;
			} else if (t.is_symbol(")")) {
				depth--;
			} else if (depth == 0 && t.is_keyword("FROM")) {
				return;
			} else {
				reject_subquery(t);
			}
			advance();
		}
	}

	void parse_from() {
		parse_table_ref();
		while (true) {
			const auto &t = peek();
			if (t.is_symbol(",")) {
				advance();
				parse_table_ref();
			} else if (t.is_keyword("JOIN") || t.is_keyword("INNER")) {
				if (t.is_keyword("INNER")) {
					advance();
					if (!peek().is_keyword("JOIN")) {
						throw ParseError("expected JOIN after INNER", peek().begin);
					}
				}
				advance();
				parse_table_ref();
				expect_keyword_on();
			} else if (t.is_keyword("CROSS")) {
				advance();
				expect_keyword("JOIN");
				parse_table_ref();
			} else if (t.is_keyword("LEFT") || t.is_keyword("RIGHT") || t.is_keyword("FULL") ||
			           t.is_keyword("OUTER") || t.is_keyword("NATURAL")) {
				throw ParseError("outer and natural joins are not supported", t.begin);
			} else {
				return;
			}
		}
	}

	void expect_keyword_on() {
		if (peek().is_keyword("USING")) {
			throw ParseError("JOIN ... USING is not supported", peek().begin);
		}
		expect_keyword("ON");
		auto begin = pos_;
		auto end = scan_condition_end();
		if (begin == end) {
			throw ParseError("empty ON condition", peek().begin);
		}
		split_conjuncts(begin, end, true);
	}

	void parse_table_ref() {
		const auto &t = peek();
		if (t.is_symbol("(")) {
			if (peek(1).is_keyword("SELECT")) {
				throw ParseError("subqueries are not supported", t.begin);
			}
			throw ParseError("parenthesized FROM items are not supported", t.begin);
		}
		if (!t.is_name() || (t.kind == TokenKind::IDENT && reserved_words().count(t.upper))) {
			throw ParseError("expected table name", t.begin);
		}
		auto table_begin = t.begin;
		std::string last_part = name_of(advance());
		while (peek().is_symbol(".") && peek(1).is_name()) {
			advance();
			last_part = name_of(advance());
		}
		if (peek().is_symbol("(")) {
			throw ParseError("table functions are not supported", peek().begin);
		}
		auto table_text = std::string(src_.substr(table_begin, tokens_[pos_ - 1].end - table_begin));
		std::string alias = last_part;
		if (peek().is_keyword("AS")) {
			advance();
			if (!peek().is_name()) {
				throw ParseError("expected alias after AS", peek().begin);
			}
			alias = name_of(advance());
		} else if (peek().kind == TokenKind::QUOTED_IDENT ||
		           (peek().kind == TokenKind::IDENT && !reserved_words().count(peek().upper))) {
			alias = name_of(advance());
		}
		if (!is_identifier(alias)) {
			throw ParseError("invalid alias identifier '" + alias + "'", table_begin);
		}
		graph_.add_alias(alias, table_text);
	}

	//! Advances to the end of a condition (ON or WHERE body); returns end index.
	std::size_t scan_condition_end() {
		int depth = 0;
		while (true) {
			const auto &t = peek();
			if (t.kind == TokenKind::END) {
				break;
			}
			if (t.is_symbol("(")) {
				depth++;
			} else if (t.is_symbol(")")) {
				if (depth == 0) {
					throw ParseError("unbalanced parenthesis", t.begin);
				}
				depth--;
			} else if (depth == 0) {
				if (t.is_symbol(";") || t.is_symbol(",") || is_tail_start(t) || t.is_keyword("WHERE") ||
				    t.is_keyword("JOIN") || t.is_keyword("INNER") || t.is_keyword("CROSS") ||
				    t.is_keyword("LEFT") || t.is_keyword("RIGHT") || t.is_keyword("FULL") ||
				    t.is_keyword("NATURAL")) {
					break;
				}
			}
			reject_subquery(t);
			advance();
		}
		if (depth != 0) {
			throw ParseError("unbalanced parenthesis", peek().begin);
		}
		return pos_;
	}

	//! True if tokens [first, last) are wrapped by one matching pair of parens.
	bool fully_wrapped(std::size_t first, std::size_t last) const {
		if (last - first < 2 || !tokens_[first].is_symbol("(") || !tokens_[last - 1].is_symbol(")")) {
			return false;
		}
		int depth = 0;
		for (auto i = first; i < last; i++) {
			if (tokens_[i].is_symbol("(")) {
				depth++;
			} else if (tokens_[i].is_symbol(")")) {
				depth--;
				if (depth == 0 && i != last - 1) {
					return false;
				}
			}
		}
		return true;
	}

	//! Splits [first, last) at depth-0 ANDs (BETWEEN ... AND excluded).
	//! Returns false if a depth-0 OR was found (only legal when !top_level).
	bool split_conjuncts(std::size_t first, std::size_t last, bool top_level) {
		std::vector<Conjunct> pieces;
		int depth = 0;
		int pending_between = 0;
		auto start = first;
		for (auto i = first; i < last; i++) {
			const auto &t = tokens_[i];
			if (t.is_symbol("(")) {
				depth++;
			} else if (t.is_symbol(")")) {
				depth--;
			} else if (depth == 0) {
				if (t.is_keyword("BETWEEN")) {
					pending_between++;
				} else if (t.is_keyword("OR")) {
					if (top_level) {
						throw ParseError("OR at the top level of a join condition is not supported", t.begin);
					}
					return false;
				} else if (t.is_keyword("AND")) {
					if (pending_between > 0) {
						pending_between--;
						continue;
					}
					if (i == start) {
						throw ParseError("empty conjunct", t.begin);
					}
					pieces.push_back({start, i});
					start = i + 1;
				}
			}
		}
		if (start >= last) {
			throw ParseError("dangling AND", tokens_[last - 1].begin);
		}
		pieces.push_back({start, last});
		for (const auto &piece : pieces) {
			if (fully_wrapped(piece.first, piece.last)) {
				auto saved = conjuncts_.size();
				if (split_conjuncts(piece.first + 1, piece.last - 1, false)) {
					continue;
				}
				conjuncts_.resize(saved);
			}
			conjuncts_.push_back(piece);
		}
		return true;
	}

	void parse_tail() {
		auto begin = pos_;
		while (peek().kind != TokenKind::END && !peek().is_symbol(";")) {
			const auto &t = peek();
			if (begin == pos_ && !is_tail_start(t)) {
				throw ParseError("unexpected token '" + t.text + "'", t.begin);
			}
			reject_subquery(t);
			advance();
		}
		if (pos_ > begin) {
			graph_.shape->tail = slice(begin, pos_);
		}
		if (peek().is_symbol(";")) {
			advance();
		}
		if (peek().kind != TokenKind::END) {
			throw ParseError("only a single statement is supported", peek().begin);
		}
	}

	void classify(const Conjunct &c) {
		// alias references are `name . column` pairs not preceded by '.'
		std::vector<AliasId> refs;
		for (auto i = c.first; i + 1 < c.last; i++) {
			const auto &t = tokens_[i];
			if (!t.is_name() || !tokens_[i + 1].is_symbol(".")) {
				continue;
			}
			if (i > c.first && tokens_[i - 1].is_symbol(".")) {
				continue;
			}
			auto id = graph_.find(name_of(t));
			if (!id) {
				throw UnknownAliasError("predicate references unknown alias '" + to_lower(name_of(t)) + "' at offset " +
				                        std::to_string(t.begin));
			}
			if (std::find(refs.begin(), refs.end(), *id) == refs.end()) {
				refs.push_back(*id);
			}
		}
		auto text = slice(c.first, c.last);
		if (refs.empty()) {
			if (graph_.size() == 1) {
				graph_.shape->local_predicates.push_back({0, std::move(text)});
				return;
			}
			throw ParseError("predicate references no alias: " + text, tokens_[c.first].begin);
		}
		if (refs.size() == 1) {
			graph_.shape->local_predicates.push_back({refs[0], std::move(text)});
			return;
		}
		auto first = c.first;
		auto last = c.last;
		while (fully_wrapped(first, last)) {
			first++;
			last--;
		}
		if (refs.size() == 2 && is_equi_join(first, last)) {
			graph_.add_edge(refs[0], refs[1], std::move(text));
			return;
		}
		throw ParseError("unsupported cross-alias predicate: " + text, tokens_[c.first].begin);
	}

	bool is_equi_join(std::size_t first, std::size_t last) const {
		if (last - first != 7) {
			return false;
		}
		const auto *t = &tokens_[first];
		return t[0].is_name() && t[1].is_symbol(".") && t[2].is_name() && t[3].is_symbol("=") && t[4].is_name() &&
		       t[5].is_symbol(".") && t[6].is_name();
	}

	std::string_view src_;
	std::vector<Token> tokens_;
	std::size_t pos_ = 0;
	JoinGraph graph_;
	std::vector<Conjunct> conjuncts_;
};

} // namespace

JoinGraph parse_sql(std::string_view query_text) {
	return Parser(query_text).parse();
}

} // namespace joinsearch
