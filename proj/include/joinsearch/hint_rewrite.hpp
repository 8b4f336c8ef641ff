#pragma once

#include "joinsearch/cost_oracle.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace joinsearch {

enum class HintFormat { linear, bracketed };
enum class RewriteMode { hint_only, explicit_join };

std::string to_string(HintFormat format);
HintFormat hint_format_from_string(const std::string &text);
std::string to_string(RewriteMode mode);
RewriteMode rewrite_mode_from_string(const std::string &text);

//! `/*+ Leading(a b c) */` or `/*+ Leading(((a b) c)) */`.
std::string emit_hint(const JoinGraph &graph, const LeadingExpression &expr, HintFormat format = HintFormat::linear);

//! Alias names (lower-cased) of a hint in either format. Throws MalformedHint,
//! or NonLeftDeepHint for right-nested brackets.
std::vector<std::string> parse_hint_names(std::string_view hint);
LeadingExpression parse_hint(const JoinGraph &graph, std::string_view hint);

//! Any accepted hint re-emitted in the linear format.
std::string linearize_hint(std::string_view hint);

//! hint_only prefixes the original statement with the hint; explicit_join
//! rebuilds the FROM clause as a left-nested JOIN chain in expr order.
//! Throws DisconnectedOrder when a step has no join predicate and cross joins
//! are not allowed.
std::string rewrite_sql(const JoinGraph &graph, const LeadingExpression &expr, RewriteMode mode,
                        HintFormat format = HintFormat::linear, bool allow_cross_join = false);

} // namespace joinsearch
