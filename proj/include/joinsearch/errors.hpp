#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace joinsearch {

class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

//===--------------------------------------------------------------------===//
// Input / workload errors (CLI exit code 2)
//===--------------------------------------------------------------------===//
class WorkloadError : public Error {
public:
	using Error::Error;
};

class ParseError : public WorkloadError {
public:
	ParseError(const std::string &message, std::size_t position = npos)
	    : WorkloadError(position == npos ? message : message + " (at offset " + std::to_string(position) + ")"),
	      position_(position) {
	}

	static constexpr std::size_t npos = static_cast<std::size_t>(-1);

	std::size_t position() const {
		return position_;
	}

private:
	std::size_t position_;
};

class DuplicateAliasError : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class UnknownAliasError : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class IoError : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class SchemaError : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class BadTopologyParams : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

//===--------------------------------------------------------------------===//
// Expression / search errors
//===--------------------------------------------------------------------===//
class InvalidExpression : public Error {
public:
	using Error::Error;
};

class IncompleteExpression : public InvalidExpression {
public:
	using InvalidExpression::InvalidExpression;
};

class MissingCatalogEntry : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class NoLegalAction : public Error {
public:
	using Error::Error;
};

class DegenerateGraph : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class NoEdges : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class TooManyRelations : public WorkloadError {
public:
	using WorkloadError::WorkloadError;
};

class TraceMissing : public Error {
public:
	using Error::Error;
};

class EmptyReport : public Error {
public:
	using Error::Error;
};

class MalformedHint : public Error {
public:
	using Error::Error;
};

class NonLeftDeepHint : public MalformedHint {
public:
	using MalformedHint::MalformedHint;
};

class DisconnectedOrder : public Error {
public:
	using Error::Error;
};

//===--------------------------------------------------------------------===//
// Oracle / DBMS errors (CLI exit code 3)
//===--------------------------------------------------------------------===//
class OracleError : public Error {
public:
	using Error::Error;
};

//! An evaluation failed; the search treats the expression as unevaluated.
class OracleUnavailable : public OracleError {
public:
	using OracleError::OracleError;
};

class ConnectError : public OracleError {
public:
	using OracleError::OracleError;
};

class TimeoutError : public OracleError {
public:
	using OracleError::OracleError;
};

class ExecutionTimeout : public TimeoutError {
public:
	using TimeoutError::TimeoutError;
};

class DbError : public OracleError {
public:
	using OracleError::OracleError;
};

class ExplainParseError : public OracleError {
public:
	using OracleError::OracleError;
};

class HintRejectedError : public OracleError {
public:
	HintRejectedError(std::vector<std::string> requested, std::vector<std::string> observed);

	const std::vector<std::string> &requested() const {
		return requested_;
	}
	const std::vector<std::string> &observed() const {
		return observed_;
	}

private:
	std::vector<std::string> requested_;
	std::vector<std::string> observed_;
};

} // namespace joinsearch
