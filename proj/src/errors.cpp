#include "ryansql/errors.hpp"

namespace ryansql {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedDocument: return "malformed-document";
    case ErrorKind::SchemaValidation: return "schema-validation";
    case ErrorKind::Lexical: return "lexical";
    case ErrorKind::Grammar: return "grammar";
    case ErrorKind::UnresolvedIdentifier: return "unresolved-identifier";
    case ErrorKind::UnsupportedConstruct: return "unsupported-construct";
    case ErrorKind::JoinSynthesis: return "join-synthesis";
    case ErrorKind::NestingLimit: return "nesting-limit";
    case ErrorKind::IncompleteForm: return "incomplete-form";
    case ErrorKind::UnreachableEntry: return "unreachable-entry";
    case ErrorKind::DisconnectedTables: return "disconnected-tables";
    case ErrorKind::ValueParse: return "value-parse";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::UnsupportedExample: return "unsupported-example";
    case ErrorKind::NumericInstability: return "numeric-instability";
    case ErrorKind::InputContract: return "input-contract";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace ryansql
