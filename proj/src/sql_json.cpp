#include <algorithm>

#include "json.hpp"
#include "ryansql/sql.hpp"

namespace ryansql {

using nlohmann::json;

namespace {

template <typename Enum>
Enum enum_from_string(const std::string& text, const char* what,
                      std::initializer_list<Enum> values) {
  for (Enum v : values) {
    if (text == to_string(v)) return v;
  }
  fail(ErrorKind::MalformedDocument,
       std::string("unknown ") + what + " '" + text + "'");
}

Aggregator aggregator_from_string(const std::string& s) {
  return enum_from_string<Aggregator>(
      s, "aggregator",
      {Aggregator::None, Aggregator::Max, Aggregator::Min, Aggregator::Count,
       Aggregator::Sum, Aggregator::Avg});
}

Arithmetic arithmetic_from_string(const std::string& s) {
  return enum_from_string<Arithmetic>(
      s, "arithmetic",
      {Arithmetic::None, Arithmetic::Minus, Arithmetic::Plus, Arithmetic::Times,
       Arithmetic::Divide});
}

CondOperator operator_from_string(const std::string& s) {
  return enum_from_string<CondOperator>(
      s, "operator",
      {CondOperator::Between, CondOperator::Eq, CondOperator::Gt,
       CondOperator::Lt, CondOperator::Ge, CondOperator::Le, CondOperator::Ne,
       CondOperator::In, CondOperator::Like, CondOperator::Is,
       CondOperator::Exists});
}

json column_unit_to_json(const ColumnUnit& cu) {
  return json{{"distinct", cu.distinct},
              {"aggregator", to_string(cu.aggregator)},
              {"column", cu.column}};
}

ColumnUnit column_unit_from_json(const json& j) {
  ColumnUnit cu;
  cu.distinct = j.at("distinct").get<bool>();
  cu.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
  cu.column = j.at("column").get<int>();
  return cu;
}

json value_unit_to_json(const ValueUnit& vu) {
  json j{{"left", column_unit_to_json(vu.left)},
         {"arithmetic", to_string(vu.arithmetic)}};
  j["right"] = vu.right ? column_unit_to_json(*vu.right) : json(nullptr);
  return j;
}

ValueUnit value_unit_from_json(const json& j) {
  ValueUnit vu;
  vu.left = column_unit_from_json(j.at("left"));
  vu.arithmetic = arithmetic_from_string(j.at("arithmetic").get<std::string>());
  if (j.contains("right") && !j.at("right").is_null()) {
    vu.right = column_unit_from_json(j.at("right"));
  }
  return vu;
}

json statement_to_json_obj(const SelectStatement& stmt);
SelectStatement statement_from_json_obj(const json& j);

json value_to_json(const ConditionValue& v) {
  switch (v.kind) {
    case ConditionValue::Kind::Literal:
      return json{{"literal", v.literal}};
    case ConditionValue::Kind::Subquery:
      return json{{"subquery", statement_to_json_obj(*v.subquery)}};
    case ConditionValue::Kind::Placeholder:
      return json{{"subquery_spc", v.placeholder_spc}};
  }
  return json(nullptr);
}

ConditionValue value_from_json(const json& j) {
  if (j.contains("literal")) {
    return ConditionValue::make_literal(j.at("literal").get<std::string>());
  }
  if (j.contains("subquery")) {
    return ConditionValue::make_subquery(std::make_shared<SelectStatement>(
        statement_from_json_obj(j.at("subquery"))));
  }
  if (j.contains("subquery_spc")) {
    return ConditionValue::make_placeholder(
        j.at("subquery_spc").get<std::vector<std::string>>());
  }
  fail(ErrorKind::MalformedDocument,
       "condition value needs literal, subquery or subquery_spc");
}

json condition_to_json(const Condition& c) {
  json j{{"conjunction", to_string(c.conjunction)},
         {"negated", c.negated},
         {"operator", to_string(c.op)},
         {"value_unit", value_unit_to_json(c.value_unit)},
         {"value1", value_to_json(c.value1)}};
  j["value2"] = c.value2 ? value_to_json(*c.value2) : json(nullptr);
  return j;
}

Condition condition_from_json(const json& j) {
  Condition c;
  c.conjunction = j.at("conjunction").get<std::string>() == "OR"
                      ? Conjunction::Or
                      : Conjunction::And;
  c.negated = j.at("negated").get<bool>();
  c.op = operator_from_string(j.at("operator").get<std::string>());
  c.value_unit = value_unit_from_json(j.at("value_unit"));
  c.value1 = value_from_json(j.at("value1"));
  if (j.contains("value2") && !j.at("value2").is_null()) {
    c.value2 = value_from_json(j.at("value2"));
  }
  return c;
}

json statement_to_json_obj(const SelectStatement& stmt) {
  json j;
  j["from_tables"] = stmt.from_tables;
  j["select_distinct"] = stmt.select_distinct;
  json items = json::array();
  for (const auto& [agg, vu] : stmt.select_conditions) {
    items.push_back(json::array({to_string(agg), value_unit_to_json(vu)}));
  }
  j["select_conditions"] = items;
  json wheres = json::array();
  for (const Condition& c : stmt.where_conditions) {
    wheres.push_back(condition_to_json(c));
  }
  j["where_conditions"] = wheres;
  j["groupby_columns"] = stmt.groupby_columns;
  json havings = json::array();
  for (const Condition& c : stmt.having_conditions) {
    havings.push_back(condition_to_json(c));
  }
  j["having_conditions"] = havings;
  json orders = json::array();
  for (const auto& [vu, dir] : stmt.orderby) {
    orders.push_back(json::array({value_unit_to_json(vu), to_string(dir)}));
  }
  j["orderby"] = orders;
  j["limit"] = stmt.limit ? json{{"is_top1", stmt.limit->is_top1},
                                 {"number", stmt.limit->number}}
                          : json(nullptr);
  if (stmt.iuen) {
    json iuen{{"op", to_string(stmt.iuen->op)}};
    if (stmt.iuen->child) {
      iuen["statement"] = statement_to_json_obj(*stmt.iuen->child);
    } else {
      iuen["subquery_spc"] = stmt.iuen->placeholder_spc;
    }
    j["iuen"] = iuen;
  } else {
    j["iuen"] = json(nullptr);
  }
  return j;
}

SelectStatement statement_from_json_obj(const json& j) {
  SelectStatement stmt;
  stmt.from_tables = j.at("from_tables").get<std::vector<int>>();
  stmt.select_distinct = j.at("select_distinct").get<bool>();
  for (const auto& item : j.at("select_conditions")) {
    stmt.select_conditions.emplace_back(
        aggregator_from_string(item.at(0).get<std::string>()),
        value_unit_from_json(item.at(1)));
  }
  for (const auto& c : j.at("where_conditions")) {
    stmt.where_conditions.push_back(condition_from_json(c));
  }
  stmt.groupby_columns = j.at("groupby_columns").get<std::vector<int>>();
  for (const auto& c : j.at("having_conditions")) {
    stmt.having_conditions.push_back(condition_from_json(c));
  }
  for (const auto& o : j.at("orderby")) {
    stmt.orderby.emplace_back(
        value_unit_from_json(o.at(0)),
        o.at(1).get<std::string>() == "DESC" ? OrderDirection::Desc
                                             : OrderDirection::Asc);
  }
  if (j.contains("limit") && !j.at("limit").is_null()) {
    stmt.limit = LimitSpec{j.at("limit").at("is_top1").get<bool>(),
                           j.at("limit").at("number").get<long long>()};
  }
  if (j.contains("iuen") && !j.at("iuen").is_null()) {
    IuenClause iuen;
    const json& ji = j.at("iuen");
    std::string op = ji.at("op").get<std::string>();
    iuen.op = op == "INTERSECT" ? SetOperator::Intersect
              : op == "EXCEPT"  ? SetOperator::Except
                                : SetOperator::Union;
    if (ji.contains("statement")) {
      iuen.child = std::make_shared<SelectStatement>(
          statement_from_json_obj(ji.at("statement")));
    } else {
      iuen.placeholder_spc =
          ji.at("subquery_spc").get<std::vector<std::string>>();
    }
    stmt.iuen = std::move(iuen);
  }
  return stmt;
}

}  // namespace

std::string statement_to_json(const SelectStatement& stmt, int indent) {
  return statement_to_json_obj(stmt).dump(indent);
}

SelectStatement statement_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::MalformedDocument,
         "statement JSON: " + std::string(e.what()));
  }
  try {
    return statement_from_json_obj(j);
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedDocument,
         "statement JSON: " + std::string(e.what()));
  }
}

}  // namespace ryansql
