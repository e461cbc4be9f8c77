#pragma once
// Error hierarchy shared by every module. All failures surface as exceptions
// derived from Error so callers can catch the whole family or one leaf.

#include <stdexcept>
#include <string>

namespace glassvqa {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration file or CLI-level misuse. CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Network or endpoint unavailable after the retry budget is spent.
class TransportError : public Error {
public:
    using Error::Error;
};

// Endpoint replied, but with something we cannot interpret.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Replay-only mode and the request key is not in the cache.
class CacheMissError : public Error {
public:
    using Error::Error;
};

// Cache directory unwritable or entry file corrupt.
class StorageError : public Error {
public:
    using Error::Error;
};

// Gold-annotation backend asked about an instance it does not know.
class UnknownInstanceError : public Error {
public:
    using Error::Error;
};

// Model output does not match the expected line grammar.
class ParseError : public Error {
public:
    using Error::Error;
};

// Proposal retrieval produced zero conditions after all rounds.
class EmptyProposalError : public Error {
public:
    using Error::Error;
};

// Clue generation produced nothing usable.
class NoCluesError : public Error {
public:
    using Error::Error;
};

class EmptyQuestionError : public Error {
public:
    using Error::Error;
};

// A domain value violates its declared invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Dataset line failed schema validation. Carries the 1-based line number.
class SchemaError : public Error {
public:
    SchemaError(int line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Instance lacks a gold field the requested evaluation mode needs.
class MissingGoldError : public Error {
public:
    using Error::Error;
};

// Fulfillments reference conditions or clues the graph has never seen.
class InconsistentInputError : public Error {
public:
    using Error::Error;
};

// Voting on a graph without answer nodes.
class NoAnswerError : public Error {
public:
    using Error::Error;
};

}  // namespace glassvqa
