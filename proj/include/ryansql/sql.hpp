#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ryansql/schema.hpp"

namespace ryansql {

// Slot value enums of the SELECT-statement sketch.

enum class Aggregator { None, Max, Min, Count, Sum, Avg };
enum class Arithmetic { None, Minus, Plus, Times, Divide };
enum class CondOperator {
  Between, Eq, Gt, Lt, Ge, Le, Ne, In, Like, Is, Exists
};
enum class Conjunction { And, Or };
enum class OrderDirection { Asc, Desc };
enum class SetOperator { Intersect, Union, Except };

const char* to_string(Aggregator a);
const char* to_string(Arithmetic a);
const char* to_string(CondOperator op);
const char* to_string(Conjunction c);
const char* to_string(OrderDirection d);
const char* to_string(SetOperator op);

struct SelectStatement;
using StatementPtr = std::shared_ptr<SelectStatement>;

/// One (possibly aggregated) column reference.
struct ColumnUnit {
  bool distinct = false;
  Aggregator aggregator = Aggregator::None;
  int column = 0;  // index into schema columns; 0 is `*`

  bool operator==(const ColumnUnit&) const = default;
};

/// A column expression: either a single column unit or an arithmetic
/// combination of two.
struct ValueUnit {
  ColumnUnit left;
  Arithmetic arithmetic = Arithmetic::None;
  std::optional<ColumnUnit> right;  // present iff arithmetic != None

  bool operator==(const ValueUnit&) const = default;
};

/// Value operand of a WHERE/HAVING condition: a literal token, an inline
/// subquery, or (inside non-nested forms) a placeholder naming the child
/// statement's position code.
struct ConditionValue {
  enum class Kind { Literal, Subquery, Placeholder };

  Kind kind = Kind::Literal;
  std::string literal;                  // Kind::Literal
  StatementPtr subquery;                // Kind::Subquery
  std::vector<std::string> placeholder_spc;  // Kind::Placeholder

  static ConditionValue make_literal(std::string text);
  static ConditionValue make_subquery(StatementPtr stmt);
  static ConditionValue make_placeholder(std::vector<std::string> spc);

  bool operator==(const ConditionValue& other) const;
};

struct Condition {
  Conjunction conjunction = Conjunction::And;  // ignored on the first condition
  bool negated = false;
  CondOperator op = CondOperator::Eq;
  ValueUnit value_unit;
  ConditionValue value1;
  std::optional<ConditionValue> value2;  // present iff op == Between

  bool operator==(const Condition& other) const;
};

struct LimitSpec {
  bool is_top1 = false;
  long long number = 1;  // 1 when is_top1

  bool operator==(const LimitSpec&) const = default;
};

struct IuenClause {
  SetOperator op = SetOperator::Union;
  StatementPtr child;                        // inline form
  std::vector<std::string> placeholder_spc;  // non-nested form

  bool operator==(const IuenClause& other) const;
};

/// One non-nested SELECT statement shaped by the sketch. Nested statements
/// hang off condition values and the trailing set operation.
struct SelectStatement {
  std::vector<int> from_tables;  // table indices, connected join order
  bool select_distinct = false;
  std::vector<std::pair<Aggregator, ValueUnit>> select_conditions;
  std::vector<Condition> where_conditions;
  std::vector<int> groupby_columns;
  std::vector<Condition> having_conditions;
  std::vector<std::pair<ValueUnit, OrderDirection>> orderby;
  std::optional<LimitSpec> limit;
  std::optional<IuenClause> iuen;

  bool operator==(const SelectStatement& other) const;
};

StatementPtr clone(const SelectStatement& stmt);

/// Condition maxima of the sketch; the decoder cannot emit more.
struct SketchBounds {
  static constexpr int select_conditions = 6;  // N_s
  static constexpr int where_conditions = 4;   // N_w
  static constexpr int having_conditions = 2;  // N_h
  static constexpr int groupby_columns = 3;    // N_g
  static constexpr int orderby_items = 3;      // N_o
  static constexpr int from_tables = 6;        // N_t
};

/// Checks every structural invariant of the statement against the schema
/// (valid indices, value2 iff between, right iff arithmetic, `*` only with
/// count/none, non-empty SELECT and FROM). Throws SchemaValidation on
/// violation.
void validate_statement(const SelectStatement& stmt, const DatabaseSchema& schema);

/// Parses the restricted SQL dialect covered by the sketch. Identifiers are
/// resolved against the schema; table aliases (`AS t1`) are accepted and
/// discarded. JOIN ... ON conditions are validated and dropped: the AST
/// keeps only the FROM table order.
SelectStatement parse_sql(const std::string& text, const DatabaseSchema& schema);

/// Prints the AST back to SQL text. Multi-table FROM clauses get aliases
/// t1..tn in from_tables order and JOIN conditions synthesized from the
/// foreign keys; each table after the first must share a foreign key with
/// an earlier table or a join-synthesis error is raised.
std::string print_sql(const SelectStatement& stmt, const DatabaseSchema& schema);

/// Deterministic normal form used for comparison only: literals unquoted and
/// case-folded, numeric literals normalized, and the condition lists of
/// SELECT / WHERE / HAVING / GROUPBY / ORDERBY each sorted by a fixed total
/// order (multiset comparison semantics). Conjunctions are compared as a
/// multiset; their order after sorting is not meaningful.
SelectStatement canonicalize(const SelectStatement& stmt);

/// Case-folds, unquotes, and numerically normalizes one literal.
std::string canonical_literal(const std::string& raw);

// JSON serialization (field names match the type definitions).
std::string statement_to_json(const SelectStatement& stmt, int indent = -1);
SelectStatement statement_from_json(const std::string& json_text);

}  // namespace ryansql
