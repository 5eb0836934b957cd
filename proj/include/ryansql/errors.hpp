#pragma once

#include <stdexcept>
#include <string>

namespace ryansql {

/// Error categories surfaced by the library. The CLI maps InputError-like
/// kinds to exit code 1 and everything else to 2.
enum class ErrorKind {
  MalformedDocument,    // unparseable input file, carries byte offset
  SchemaValidation,     // schema invariant violated, names db_id and field
  Lexical,              // bad token in SQL text, carries position
  Grammar,              // unexpected token, carries position
  UnresolvedIdentifier, // identifier not found in schema
  UnsupportedConstruct, // SQL outside the sketch grammar
  JoinSynthesis,        // FROM tables not connected by foreign keys
  NestingLimit,         // SPC depth exceeded
  IncompleteForm,       // non-nested form missing a referenced entry
  UnreachableEntry,     // non-nested form entry never referenced
  DisconnectedTables,   // join recovery cannot reach requested tables
  ValueParse,           // pointed token is not a usable value
  Divergence,           // non-finite training loss
  UnsupportedExample,   // gold statement outside sketch bounds
  NumericInstability,   // non-finite values during gradient checking
  InputContract,        // empty question / schema and similar misuse
  Alignment,            // prediction/gold files do not line up
  Io,                   // file could not be read or written
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ryansql
