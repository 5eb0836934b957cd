#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "fixtures.hpp"
#include "ryansql/sql.hpp"

using namespace ryansql;
using fixtures::thrown_kind;

namespace {

const char* kNestedUnion =
    "SELECT AirportName FROM Airports WHERE AirportCode NOT IN "
    "(SELECT SourceAirport FROM Flights UNION SELECT DestAirport FROM Flights)";

ValueUnit vu(int column, bool distinct = false, Aggregator agg = Aggregator::None) {
  return ValueUnit{ColumnUnit{distinct, agg, column}, Arithmetic::None, std::nullopt};
}

}  // namespace

TEST_CASE("parsing a nested union query recovers the full structure") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(kNestedUnion, s);

  CHECK(ast.from_tables == std::vector<int>{0});
  REQUIRE(ast.select_conditions.size() == 1);
  CHECK(ast.select_conditions[0].first == Aggregator::None);
  CHECK(ast.select_conditions[0].second.left.column == 2);
  REQUIRE(ast.where_conditions.size() == 1);
  const Condition& cond = ast.where_conditions[0];
  CHECK(cond.op == CondOperator::In);
  CHECK(cond.negated);
  CHECK(cond.value_unit.left.column == 1);
  REQUIRE(cond.value1.kind == ConditionValue::Kind::Subquery);

  const SelectStatement& sub = *cond.value1.subquery;
  CHECK(sub.from_tables == std::vector<int>{1});
  CHECK(sub.select_conditions[0].second.left.column == 5);
  REQUIRE(sub.iuen.has_value());
  CHECK(sub.iuen->op == SetOperator::Union);
  REQUIRE(sub.iuen->child != nullptr);
  CHECK(sub.iuen->child->select_conditions[0].second.left.column == 6);
}

TEST_CASE("printing reproduces the nested union query") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(kNestedUnion, s);
  CHECK(print_sql(ast, s) == kNestedUnion);
}

TEST_CASE("parse and print round-trip structurally") {
  DatabaseSchema flights = fixtures::flights_schema();
  DatabaseSchema scholar = fixtures::scholar_schema();
  struct Case {
    const DatabaseSchema* schema;
    const char* sql;
  };
  std::vector<Case> cases = {
      {&flights, "SELECT City FROM Airports"},
      {&flights, "SELECT DISTINCT City FROM Airports"},
      {&flights, "SELECT count(*) FROM Flights"},
      {&flights, "SELECT count(DISTINCT City) FROM Airports"},
      {&flights, "SELECT max(FlightNo) - min(FlightNo) FROM Flights"},
      {&flights, "SELECT City FROM Airports WHERE AirportCode = 'AKO'"},
      {&flights, "SELECT City FROM Airports WHERE City != 'Aberdeen' OR AirportName = 'Dulles'"},
      {&flights, "SELECT FlightNo FROM Flights WHERE FlightNo BETWEEN 1 AND 100"},
      {&flights, "SELECT City FROM Airports WHERE City IS NOT null"},
      {&flights, "SELECT City FROM Airports WHERE AirportName LIKE '%intl%'"},
      {&flights, "SELECT City, count(*) FROM Airports GROUP BY City HAVING count(*) > 2"},
      {&flights, "SELECT City FROM Airports ORDER BY AirportName ASC"},
      {&flights, "SELECT City FROM Airports ORDER BY AirportName DESC, City ASC LIMIT 5"},
      {&flights,
       "SELECT t1.City FROM Airports AS t1 JOIN Flights AS t2 ON "
       "t2.SourceAirport = t1.AirportCode"},
      {&flights,
       "SELECT SourceAirport FROM Flights INTERSECT SELECT DestAirport FROM Flights"},
      {&flights,
       "SELECT City FROM Airports WHERE EXISTS "
       "(SELECT * FROM Flights WHERE DestAirport = 'AKO')"},
      {&scholar,
       "SELECT DISTINCT t2.paperId FROM author AS t1 JOIN writes AS t2 ON "
       "t2.authorId = t1.authorId WHERE t1.authorName = 'Liwen Xiong'"},
      {&scholar, "SELECT title FROM paper WHERE year = 2015 EXCEPT "
                 "SELECT title FROM paper WHERE year = 2014"},
  };
  for (const Case& c : cases) {
    CAPTURE(c.sql);
    SelectStatement ast = parse_sql(c.sql, *c.schema);
    std::string printed = print_sql(ast, *c.schema);
    SelectStatement again = parse_sql(printed, *c.schema);
    CHECK(again == ast);
    CHECK(print_sql(again, *c.schema) == printed);
  }
}

TEST_CASE("printing synthesizes join conditions from foreign keys") {
  DatabaseSchema s = fixtures::scholar_schema();
  SelectStatement ast;
  ast.from_tables = {0, 2};
  ast.select_conditions.emplace_back(Aggregator::Count, vu(0));
  CHECK(print_sql(ast, s) ==
        "SELECT count(*) FROM author AS t1 JOIN writes AS t2 ON "
        "t2.authorId = t1.authorId");
}

TEST_CASE("printing fails when from tables share no foreign key") {
  DatabaseSchema s = fixtures::scholar_schema();
  SelectStatement ast;
  ast.from_tables = {0, 1};
  ast.select_conditions.emplace_back(Aggregator::Count, vu(0));
  CHECK(thrown_kind([&] { print_sql(ast, s); }) == ErrorKind::JoinSynthesis);
}

TEST_CASE("join conditions in the input are validated then discarded") {
  DatabaseSchema s = fixtures::scholar_schema();
  SelectStatement ast = parse_sql(
      "SELECT count(*) FROM author AS t1 JOIN writes AS t2 ON "
      "t1.authorId = t2.authorId", s);
  CHECK(ast.from_tables == std::vector<int>{0, 2});
  CHECK(ast.where_conditions.empty());
  CHECK(thrown_kind([&] {
          parse_sql("SELECT count(*) FROM author AS t1 JOIN writes AS t2 ON "
                    "t1.authorId = t2.paperId", s);
        }) == ErrorKind::UnsupportedConstruct);
}

TEST_CASE("unsupported constructs are reported as such") {
  DatabaseSchema s = fixtures::flights_schema();
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Airports, Flights", s); }) ==
        ErrorKind::UnsupportedConstruct);
  CHECK(thrown_kind([&] {
          parse_sql("SELECT City FROM Airports WHERE City IN ('a', 'b')", s);
        }) == ErrorKind::UnsupportedConstruct);
  CHECK(thrown_kind([&] { parse_sql("SELECT sum(count(*)) FROM Flights", s); }) ==
        ErrorKind::UnsupportedConstruct);
  CHECK(thrown_kind([&] {
          parse_sql("SELECT FlightNo + FlightNo + FlightNo FROM Flights", s);
        }) == ErrorKind::UnsupportedConstruct);
  CHECK(thrown_kind([&] {
          parse_sql("SELECT City FROM (SELECT City FROM Airports)", s);
        }) == ErrorKind::UnsupportedConstruct);
}

TEST_CASE("identifier resolution failures name the offender") {
  DatabaseSchema s = fixtures::flights_schema();
  CHECK(thrown_kind([&] { parse_sql("SELECT Nope FROM Airports", s); }) ==
        ErrorKind::UnresolvedIdentifier);
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Nowhere", s); }) ==
        ErrorKind::UnresolvedIdentifier);
  CHECK(thrown_kind([&] { parse_sql("SELECT Flights.City FROM Flights", s); }) ==
        ErrorKind::UnresolvedIdentifier);
  CHECK(thrown_kind([&] { parse_sql("SELECT SourceAirport FROM Airports", s); }) ==
        ErrorKind::UnresolvedIdentifier);
}

TEST_CASE("grammar and lexical failures") {
  DatabaseSchema s = fixtures::flights_schema();
  CHECK(thrown_kind([&] { parse_sql("SELECT FROM Airports", s); }) ==
        ErrorKind::Grammar);
  CHECK(thrown_kind([&] { parse_sql("City FROM Airports", s); }) ==
        ErrorKind::Grammar);
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Airports WHERE", s); }) ==
        ErrorKind::Grammar);
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Airports LIMIT 0", s); }) ==
        ErrorKind::Grammar);
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Airports # tail", s); }) ==
        ErrorKind::Lexical);
  CHECK(thrown_kind([&] { parse_sql("SELECT City FROM Airports WHERE City = 'open", s); }) ==
        ErrorKind::Lexical);
}

TEST_CASE("statement validation enforces sketch rules") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement base;
  base.from_tables = {0};
  base.select_conditions.emplace_back(Aggregator::None, vu(2));

  SUBCASE("valid base passes") { validate_statement(base, s); }
  SUBCASE("empty select is rejected") {
    base.select_conditions.clear();
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
  SUBCASE("star cannot be averaged") {
    base.select_conditions[0] = {Aggregator::Avg, vu(0)};
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
  SUBCASE("star cannot be distinct") {
    base.select_conditions[0] = {Aggregator::Count, vu(0, true)};
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
  SUBCASE("negation needs a range-like operator") {
    Condition c;
    c.op = CondOperator::Eq;
    c.negated = true;
    c.value_unit = vu(2);
    c.value1 = ConditionValue::make_literal("3");
    base.where_conditions.push_back(c);
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
  SUBCASE("between needs a second value") {
    Condition c;
    c.op = CondOperator::Between;
    c.value_unit = vu(2);
    c.value1 = ConditionValue::make_literal("3");
    base.where_conditions.push_back(c);
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
  SUBCASE("limit must be positive") {
    base.limit = LimitSpec{false, 0};
    CHECK(thrown_kind([&] { validate_statement(base, s); }) == ErrorKind::SchemaValidation);
  }
}

TEST_CASE("canonicalization ignores condition order under a single conjunction") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement a = parse_sql(
      "SELECT City FROM Airports WHERE City = 'x' AND AirportName = 'y'", s);
  SelectStatement b = parse_sql(
      "SELECT City FROM Airports WHERE AirportName = 'y' AND City = 'x'", s);
  CHECK(canonicalize(a) == canonicalize(b));

  SelectStatement c = parse_sql(
      "SELECT City FROM Airports WHERE AirportName = 'y' OR City = 'x'", s);
  CHECK_FALSE(canonicalize(a) == canonicalize(c));
}

TEST_CASE("canonicalization normalizes literals") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement a = parse_sql("SELECT City FROM Airports WHERE City = 'NYC'", s);
  SelectStatement b = parse_sql("SELECT City FROM Airports WHERE City = \"nyc\"", s);
  CHECK(canonicalize(a) == canonicalize(b));

  SelectStatement c = parse_sql("SELECT SourceAirport FROM Flights WHERE FlightNo = 3.0", s);
  SelectStatement d = parse_sql("SELECT SourceAirport FROM Flights WHERE FlightNo = 3", s);
  CHECK(canonicalize(c) == canonicalize(d));
}

TEST_CASE("canonicalization orders select items, tables and group keys") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement a = parse_sql("SELECT City, AirportName FROM Airports", s);
  SelectStatement b = parse_sql("SELECT AirportName, City FROM Airports", s);
  CHECK(canonicalize(a) == canonicalize(b));

  SelectStatement c = parse_sql(
      "SELECT t1.City FROM Airports AS t1 JOIN Flights AS t2 ON "
      "t2.SourceAirport = t1.AirportCode", s);
  SelectStatement d = parse_sql(
      "SELECT t2.City FROM Flights AS t1 JOIN Airports AS t2 ON "
      "t1.SourceAirport = t2.AirportCode", s);
  CHECK(canonicalize(c) == canonicalize(d));
}

TEST_CASE("canonicalization reaches nested statements") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement a = parse_sql(
      "SELECT City FROM Airports WHERE AirportCode IN "
      "(SELECT SourceAirport FROM Flights WHERE FlightNo = 1 AND DestAirport = 'x')",
      s);
  SelectStatement b = parse_sql(
      "SELECT City FROM Airports WHERE AirportCode IN "
      "(SELECT SourceAirport FROM Flights WHERE DestAirport = 'X' AND FlightNo = 1.0)",
      s);
  CHECK(canonicalize(a) == canonicalize(b));
}

TEST_CASE("statements survive a JSON round-trip") {
  DatabaseSchema flights = fixtures::flights_schema();
  for (const char* sql : {kNestedUnion,
                          "SELECT count(DISTINCT City) FROM Airports",
                          "SELECT FlightNo FROM Flights WHERE FlightNo BETWEEN 1 AND 2",
                          "SELECT City FROM Airports ORDER BY City DESC LIMIT 3"}) {
    CAPTURE(sql);
    SelectStatement ast = parse_sql(sql, flights);
    SelectStatement back = statement_from_json(statement_to_json(ast));
    CHECK(back == ast);
  }
  CHECK(thrown_kind([&] { statement_from_json("{"); }) == ErrorKind::MalformedDocument);
  CHECK(thrown_kind([&] { statement_from_json(R"({"from_tables":[0]})"); }) ==
        ErrorKind::MalformedDocument);
}

TEST_CASE("cloning is deep") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(kNestedUnion, s);
  StatementPtr copy = clone(ast);
  CHECK(*copy == ast);
  copy->where_conditions[0].value1.subquery->select_conditions[0].second.left.column = 4;
  CHECK_FALSE(*copy == ast);
  CHECK(ast.where_conditions[0].value1.subquery->select_conditions[0].second.left.column == 5);
}

TEST_CASE("placeholders cannot be printed") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast;
  ast.from_tables = {0};
  ast.select_conditions.emplace_back(Aggregator::None, vu(2));
  Condition c;
  c.op = CondOperator::In;
  c.value_unit = vu(1);
  c.value1 = ConditionValue::make_placeholder({"WHERE"});
  ast.where_conditions.push_back(c);
  CHECK(thrown_kind([&] { print_sql(ast, s); }) == ErrorKind::InputContract);
}
