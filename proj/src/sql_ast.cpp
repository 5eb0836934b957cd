#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ryansql/sql.hpp"

namespace ryansql {

const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::None: return "none";
    case Aggregator::Max: return "max";
    case Aggregator::Min: return "min";
    case Aggregator::Count: return "count";
    case Aggregator::Sum: return "sum";
    case Aggregator::Avg: return "avg";
  }
  return "?";
}

const char* to_string(Arithmetic a) {
  switch (a) {
    case Arithmetic::None: return "none";
    case Arithmetic::Minus: return "-";
    case Arithmetic::Plus: return "+";
    case Arithmetic::Times: return "*";
    case Arithmetic::Divide: return "/";
  }
  return "?";
}

const char* to_string(CondOperator op) {
  switch (op) {
    case CondOperator::Between: return "between";
    case CondOperator::Eq: return "=";
    case CondOperator::Gt: return ">";
    case CondOperator::Lt: return "<";
    case CondOperator::Ge: return ">=";
    case CondOperator::Le: return "<=";
    case CondOperator::Ne: return "!=";
    case CondOperator::In: return "in";
    case CondOperator::Like: return "like";
    case CondOperator::Is: return "is";
    case CondOperator::Exists: return "exists";
  }
  return "?";
}

const char* to_string(Conjunction c) {
  return c == Conjunction::And ? "AND" : "OR";
}

const char* to_string(OrderDirection d) {
  return d == OrderDirection::Asc ? "ASC" : "DESC";
}

const char* to_string(SetOperator op) {
  switch (op) {
    case SetOperator::Intersect: return "INTERSECT";
    case SetOperator::Union: return "UNION";
    case SetOperator::Except: return "EXCEPT";
  }
  return "?";
}

ConditionValue ConditionValue::make_literal(std::string text) {
  ConditionValue v;
  v.kind = Kind::Literal;
  v.literal = std::move(text);
  return v;
}

ConditionValue ConditionValue::make_subquery(StatementPtr stmt) {
  ConditionValue v;
  v.kind = Kind::Subquery;
  v.subquery = std::move(stmt);
  return v;
}

ConditionValue ConditionValue::make_placeholder(std::vector<std::string> spc) {
  ConditionValue v;
  v.kind = Kind::Placeholder;
  v.placeholder_spc = std::move(spc);
  return v;
}

bool ConditionValue::operator==(const ConditionValue& other) const {
  if (kind != other.kind) return false;
  switch (kind) {
    case Kind::Literal: return literal == other.literal;
    case Kind::Placeholder: return placeholder_spc == other.placeholder_spc;
    case Kind::Subquery:
      if (!subquery || !other.subquery) return subquery == other.subquery;
      return *subquery == *other.subquery;
  }
  return false;
}

bool Condition::operator==(const Condition& other) const {
  return conjunction == other.conjunction && negated == other.negated &&
         op == other.op && value_unit == other.value_unit &&
         value1 == other.value1 && value2 == other.value2;
}

bool IuenClause::operator==(const IuenClause& other) const {
  if (op != other.op || placeholder_spc != other.placeholder_spc) return false;
  if (!child || !other.child) return child == other.child;
  return *child == *other.child;
}

bool SelectStatement::operator==(const SelectStatement& other) const {
  return from_tables == other.from_tables &&
         select_distinct == other.select_distinct &&
         select_conditions == other.select_conditions &&
         where_conditions == other.where_conditions &&
         groupby_columns == other.groupby_columns &&
         having_conditions == other.having_conditions &&
         orderby == other.orderby && limit == other.limit && iuen == other.iuen;
}

StatementPtr clone(const SelectStatement& stmt) {
  auto copy = std::make_shared<SelectStatement>(stmt);
  auto deep_value = [](ConditionValue& v) {
    if (v.kind == ConditionValue::Kind::Subquery && v.subquery) {
      v.subquery = clone(*v.subquery);
    }
  };
  for (Condition& c : copy->where_conditions) {
    deep_value(c.value1);
    if (c.value2) deep_value(*c.value2);
  }
  for (Condition& c : copy->having_conditions) {
    deep_value(c.value1);
    if (c.value2) deep_value(*c.value2);
  }
  if (copy->iuen && copy->iuen->child) {
    copy->iuen->child = clone(*copy->iuen->child);
  }
  return copy;
}

namespace {

void validate_column_unit(const ColumnUnit& cu, const DatabaseSchema& schema,
                          const char* where) {
  if (cu.column < 0 || cu.column >= static_cast<int>(schema.columns.size())) {
    fail(ErrorKind::SchemaValidation,
         std::string(where) + ": column index out of range");
  }
  if (cu.column == 0) {
    if (cu.aggregator != Aggregator::None && cu.aggregator != Aggregator::Count) {
      fail(ErrorKind::SchemaValidation,
           std::string(where) + ": `*` only valid with count or no aggregator");
    }
    if (cu.distinct) {
      fail(ErrorKind::SchemaValidation,
           std::string(where) + ": DISTINCT * is not in the sketch");
    }
  }
}

void validate_value_unit(const ValueUnit& vu, const DatabaseSchema& schema,
                         const char* where) {
  validate_column_unit(vu.left, schema, where);
  if ((vu.arithmetic == Arithmetic::None) == vu.right.has_value()) {
    fail(ErrorKind::SchemaValidation,
         std::string(where) + ": right operand present iff arithmetic set");
  }
  if (vu.right) validate_column_unit(*vu.right, schema, where);
}

void validate_conditions(const std::vector<Condition>& conds,
                         const DatabaseSchema& schema, const char* where) {
  for (const Condition& c : conds) {
    validate_value_unit(c.value_unit, schema, where);
    if ((c.op == CondOperator::Between) != c.value2.has_value()) {
      fail(ErrorKind::SchemaValidation,
           std::string(where) + ": value2 present iff operator is between");
    }
    if (c.negated && c.op != CondOperator::Between && c.op != CondOperator::In &&
        c.op != CondOperator::Like && c.op != CondOperator::Is &&
        c.op != CondOperator::Exists) {
      // SQL has no "NOT =" form; comparison operators carry their own
      // negation (!=).
      fail(ErrorKind::SchemaValidation,
           std::string(where) + ": NOT only combines with "
                                "BETWEEN/IN/LIKE/IS/EXISTS");
    }
    for (const ConditionValue* v : {&c.value1, c.value2 ? &*c.value2 : nullptr}) {
      if (v == nullptr) continue;
      if (v->kind == ConditionValue::Kind::Subquery && v->subquery) {
        validate_statement(*v->subquery, schema);
      }
    }
  }
}

}  // namespace

void validate_statement(const SelectStatement& stmt,
                        const DatabaseSchema& schema) {
  if (stmt.select_conditions.empty()) {
    fail(ErrorKind::SchemaValidation, "SELECT clause must be non-empty");
  }
  if (stmt.from_tables.empty()) {
    fail(ErrorKind::SchemaValidation, "FROM clause must be non-empty");
  }
  for (int t : stmt.from_tables) {
    if (t < 0 || t >= static_cast<int>(schema.tables.size())) {
      fail(ErrorKind::SchemaValidation, "FROM: table index out of range");
    }
  }
  for (const auto& [agg, vu] : stmt.select_conditions) {
    validate_value_unit(vu, schema, "SELECT");
    if (agg != Aggregator::None && agg != Aggregator::Count &&
        vu.arithmetic == Arithmetic::None && vu.left.column == 0) {
      fail(ErrorKind::SchemaValidation,
           "SELECT: `*` only valid with count or no aggregator");
    }
  }
  validate_conditions(stmt.where_conditions, schema, "WHERE");
  for (int c : stmt.groupby_columns) {
    if (c <= 0 || c >= static_cast<int>(schema.columns.size())) {
      fail(ErrorKind::SchemaValidation, "GROUPBY: column index out of range");
    }
  }
  validate_conditions(stmt.having_conditions, schema, "HAVING");
  for (const auto& [vu, dir] : stmt.orderby) {
    validate_value_unit(vu, schema, "ORDERBY");
  }
  if (stmt.limit) {
    if (stmt.limit->number <= 0) {
      fail(ErrorKind::SchemaValidation, "LIMIT: number must be positive");
    }
    if (stmt.limit->is_top1 && stmt.limit->number != 1) {
      fail(ErrorKind::SchemaValidation, "LIMIT: top-1 implies number 1");
    }
  }
  if (stmt.iuen && stmt.iuen->child) {
    validate_statement(*stmt.iuen->child, schema);
  }
}

std::string canonical_literal(const std::string& raw) {
  std::string s = raw;
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') &&
      s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  // Numeric literals compare by value: 5, 5.0 and 05 collapse to "5".
  if (!s.empty()) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size() && std::isfinite(v)) {
      if (v == std::floor(v) && std::abs(v) < 1e15) {
        s = std::to_string(static_cast<long long>(v));
      } else {
        std::ostringstream num;
        num << v;
        s = num.str();
      }
    }
  }
  return s;
}

namespace {

void sort_key_value_unit(std::ostream& os, const ValueUnit& vu);

void sort_key_column_unit(std::ostream& os, const ColumnUnit& cu) {
  os << cu.column << '|' << static_cast<int>(cu.aggregator) << '|'
     << cu.distinct;
}

void sort_key_value(std::ostream& os, const ConditionValue& v) {
  switch (v.kind) {
    case ConditionValue::Kind::Literal:
      os << "L:" << v.literal;
      break;
    case ConditionValue::Kind::Subquery:
      os << "S:";
      if (v.subquery) os << statement_to_json(*v.subquery);
      break;
    case ConditionValue::Kind::Placeholder:
      os << "P:";
      for (const std::string& e : v.placeholder_spc) os << e << ',';
      break;
  }
}

void sort_key_value_unit(std::ostream& os, const ValueUnit& vu) {
  sort_key_column_unit(os, vu.left);
  os << '|' << static_cast<int>(vu.arithmetic) << '|';
  if (vu.right) sort_key_column_unit(os, *vu.right);
}

std::string condition_sort_key(const Condition& c) {
  // The conjunction is deliberately excluded: it is compared as a separate
  // multiset attached to the clause.
  std::ostringstream os;
  os << static_cast<int>(c.op) << '|' << c.negated << '|';
  sort_key_value_unit(os, c.value_unit);
  os << '|';
  sort_key_value(os, c.value1);
  os << '|';
  if (c.value2) sort_key_value(os, *c.value2);
  return os.str();
}

void canonicalize_conditions(std::vector<Condition>& conds) {
  for (Condition& c : conds) {
    if (c.value1.kind == ConditionValue::Kind::Literal) {
      c.value1.literal = canonical_literal(c.value1.literal);
    } else if (c.value1.subquery) {
      *c.value1.subquery = canonicalize(*c.value1.subquery);
    }
    if (c.value2) {
      if (c.value2->kind == ConditionValue::Kind::Literal) {
        c.value2->literal = canonical_literal(c.value2->literal);
      } else if (c.value2->subquery) {
        *c.value2->subquery = canonicalize(*c.value2->subquery);
      }
    }
  }
  std::vector<Conjunction> conjs;
  for (size_t i = 1; i < conds.size(); ++i) conjs.push_back(conds[i].conjunction);
  std::sort(conjs.begin(), conjs.end());
  std::stable_sort(conds.begin(), conds.end(),
                   [](const Condition& a, const Condition& b) {
                     return condition_sort_key(a) < condition_sort_key(b);
                   });
  if (!conds.empty()) conds[0].conjunction = Conjunction::And;
  for (size_t i = 1; i < conds.size(); ++i) conds[i].conjunction = conjs[i - 1];
}

}  // namespace

SelectStatement canonicalize(const SelectStatement& stmt) {
  SelectStatement out = *clone(stmt);

  std::sort(out.from_tables.begin(), out.from_tables.end());

  std::stable_sort(out.select_conditions.begin(), out.select_conditions.end(),
                   [](const auto& a, const auto& b) {
                     std::ostringstream ka, kb;
                     ka << static_cast<int>(a.first) << '|';
                     sort_key_value_unit(ka, a.second);
                     kb << static_cast<int>(b.first) << '|';
                     sort_key_value_unit(kb, b.second);
                     return ka.str() < kb.str();
                   });

  canonicalize_conditions(out.where_conditions);
  canonicalize_conditions(out.having_conditions);

  std::sort(out.groupby_columns.begin(), out.groupby_columns.end());

  std::stable_sort(out.orderby.begin(), out.orderby.end(),
                   [](const auto& a, const auto& b) {
                     std::ostringstream ka, kb;
                     sort_key_value_unit(ka, a.first);
                     ka << '|' << static_cast<int>(a.second);
                     sort_key_value_unit(kb, b.first);
                     kb << '|' << static_cast<int>(b.second);
                     return ka.str() < kb.str();
                   });

  if (out.iuen && out.iuen->child) {
    *out.iuen->child = canonicalize(*out.iuen->child);
  }
  return out;
}

}  // namespace ryansql
