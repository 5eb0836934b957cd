#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ryansql/sql.hpp"

namespace ryansql {

/// One element of a statement position code.
enum class SpcElement { None, Union, Intersect, Except, Where, Having, Parallel };

std::string to_string(SpcElement element);
SpcElement spc_element_from_string(const std::string& text);

/// Where a non-nested statement sits inside the original nested query:
/// the root is [NONE]; a subquery extends its parent's code by the clause
/// it hangs off, plus one PARALLEL per earlier sibling in the same clause.
struct StatementPositionCode {
  std::vector<SpcElement> elements;

  bool operator==(const StatementPositionCode&) const = default;
};

inline constexpr int kDefaultMaxSpcDepth = 4;

/// Clause a subquery can be nested under.
enum class NestingSite { Where, Having, Union, Intersect, Except };

StatementPositionCode root_spc();

/// Code for the `ordinal`-th subquery hanging off `site` of a statement
/// positioned at `parent`. A sole NONE is replaced, not extended.
StatementPositionCode child_spc(const StatementPositionCode& parent,
                                NestingSite site, int ordinal,
                                int max_depth = kDefaultMaxSpcDepth);

std::vector<std::string> spc_to_strings(const StatementPositionCode& spc);
StatementPositionCode spc_from_strings(const std::vector<std::string>& parts);

/// Ordered (position, statement) pairs equivalent to one nested query;
/// nested statements are replaced by position-code placeholders.
struct NonNestedForm {
  std::vector<std::pair<StatementPositionCode, SelectStatement>> entries;
};

/// Flattens a nested statement into its non-nested form, enumerating
/// statements depth-first: each statement precedes its subqueries, WHERE
/// subqueries before HAVING ones before the set-operation child.
NonNestedForm decompose(const SelectStatement& ast,
                        int max_depth = kDefaultMaxSpcDepth);

/// Reassembles the original statement; exact inverse of decompose.
SelectStatement synthesize(const NonNestedForm& nnf);

std::string nnf_to_json(const NonNestedForm& nnf, int indent = -1);
NonNestedForm nnf_from_json(const std::string& json_text);

}  // namespace ryansql
