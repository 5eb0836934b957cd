#pragma once

#include <string>
#include <vector>

#include "ryansql/schema.hpp"
#include "ryansql/sql.hpp"

namespace ryansql {

/// Porter stem of a lowercase token. Tokens shorter than three letters or
/// containing characters outside [a-z] are returned unchanged.
std::string stem(const std::string& word);

/// Schema with per-column supplemented name tokens.
struct SupplementedSchema {
  DatabaseSchema base;
  /// Parallel to base.columns; entry 0 stays {"*"}.
  std::vector<std::vector<std::string>> scn_tokens;
};

/// Prepends each column's table-name tokens to its own, unless the stemmed
/// table tokens already occur contiguously inside the stemmed column tokens.
SupplementedSchema supplement_column_names(const DatabaseSchema& schema);

/// Drops FROM tables that contribute no referenced column to this statement,
/// provided at least two referenced tables remain. Training-data preparation;
/// recover_link_tables reinstates the dropped tables at synthesis time.
SelectStatement filter_link_tables(const SelectStatement& ast,
                                   const DatabaseSchema& schema);

/// Connectably ordered join sequence: every table after the first attaches to
/// an earlier one through foreign_keys[i-1].
struct JoinPlan {
  std::vector<int> tables;
  std::vector<int> foreign_keys;
};

/// Spans the given tables in the foreign-key graph, pulling in whatever link
/// tables the connecting paths require. Inputs are taken in ascending index
/// order; path ties resolve to the smallest table index.
JoinPlan recover_link_tables(const std::vector<int>& tables,
                             const DatabaseSchema& schema);

}  // namespace ryansql
