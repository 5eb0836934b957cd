#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "ryansql/sketch.hpp"
#include "ryansql/sql.hpp"

using namespace ryansql;
using fixtures::thrown_kind;

namespace {

const char* kNestedUnion =
    "SELECT AirportName FROM Airports WHERE AirportCode NOT IN "
    "(SELECT SourceAirport FROM Flights UNION SELECT DestAirport FROM Flights)";

StatementPositionCode spc(std::initializer_list<SpcElement> elements) {
  return StatementPositionCode{std::vector<SpcElement>(elements)};
}

}  // namespace

TEST_CASE("child position codes replace a sole NONE and append elsewhere") {
  CHECK(child_spc(root_spc(), NestingSite::Where, 0) == spc({SpcElement::Where}));
  CHECK(child_spc(spc({SpcElement::Where}), NestingSite::Union, 0) ==
        spc({SpcElement::Where, SpcElement::Union}));
  CHECK(child_spc(root_spc(), NestingSite::Where, 1) ==
        spc({SpcElement::Where, SpcElement::Parallel}));
  CHECK(child_spc(spc({SpcElement::Having}), NestingSite::Where, 2) ==
        spc({SpcElement::Having, SpcElement::Where, SpcElement::Parallel,
             SpcElement::Parallel}));
  CHECK(thrown_kind([&] {
          child_spc(spc({SpcElement::Where, SpcElement::Union,
                         SpcElement::Union, SpcElement::Union}),
                    NestingSite::Where, 0);
        }) == ErrorKind::NestingLimit);
}

TEST_CASE("position codes round-trip through their string form") {
  StatementPositionCode code =
      spc({SpcElement::Where, SpcElement::Parallel, SpcElement::Having});
  CHECK(spc_to_strings(code) ==
        std::vector<std::string>{"WHERE", "PARALLEL", "HAVING"});
  CHECK(spc_from_strings(spc_to_strings(code)) == code);
  CHECK(thrown_kind([&] { spc_from_strings({"WAT"}); }) ==
        ErrorKind::MalformedDocument);
}

TEST_CASE("decomposing the nested union query yields the three-entry form") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(kNestedUnion, s);
  NonNestedForm nnf = decompose(ast);

  REQUIRE(nnf.entries.size() == 3);
  CHECK(nnf.entries[0].first == root_spc());
  CHECK(nnf.entries[1].first == spc({SpcElement::Where}));
  CHECK(nnf.entries[2].first == spc({SpcElement::Where, SpcElement::Union}));

  const SelectStatement& s1 = nnf.entries[0].second;
  REQUIRE(s1.where_conditions.size() == 1);
  CHECK(s1.where_conditions[0].value1.kind == ConditionValue::Kind::Placeholder);
  CHECK(s1.where_conditions[0].value1.placeholder_spc ==
        std::vector<std::string>{"WHERE"});

  const SelectStatement& s2 = nnf.entries[1].second;
  CHECK(s2.from_tables == std::vector<int>{1});
  REQUIRE(s2.iuen.has_value());
  CHECK(s2.iuen->child == nullptr);
  CHECK(s2.iuen->placeholder_spc == std::vector<std::string>{"WHERE", "UNION"});

  const SelectStatement& s3 = nnf.entries[2].second;
  CHECK(s3.select_conditions[0].second.left.column == 6);
  CHECK_FALSE(s3.iuen.has_value());
}

TEST_CASE("a flat statement decomposes to a single entry") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql("SELECT City FROM Airports", s);
  NonNestedForm nnf = decompose(ast);
  REQUIRE(nnf.entries.size() == 1);
  CHECK(nnf.entries[0].first == root_spc());
  CHECK(nnf.entries[0].second == ast);
}

TEST_CASE("parallel subqueries in one clause get distinct codes") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(
      "SELECT City FROM Airports WHERE AirportCode IN "
      "(SELECT SourceAirport FROM Flights) AND AirportCode IN "
      "(SELECT DestAirport FROM Flights)", s);
  NonNestedForm nnf = decompose(ast);
  REQUIRE(nnf.entries.size() == 3);
  CHECK(nnf.entries[1].first == spc({SpcElement::Where}));
  CHECK(nnf.entries[2].first == spc({SpcElement::Where, SpcElement::Parallel}));
  CHECK(synthesize(nnf) == ast);
}

TEST_CASE("where and having subqueries are enumerated before the set child") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(
      "SELECT City, count(*) FROM Airports "
      "WHERE AirportCode IN (SELECT SourceAirport FROM Flights) "
      "GROUP BY City HAVING count(*) > "
      "(SELECT count(*) FROM Flights WHERE DestAirport = 'AKO') "
      "UNION SELECT City, FlightNo FROM Airports AS t1 JOIN Flights AS t2 ON "
      "t2.SourceAirport = t1.AirportCode", s);
  NonNestedForm nnf = decompose(ast);
  REQUIRE(nnf.entries.size() == 4);
  CHECK(nnf.entries[1].first == spc({SpcElement::Where}));
  CHECK(nnf.entries[2].first == spc({SpcElement::Having}));
  CHECK(nnf.entries[3].first == spc({SpcElement::Union}));
  CHECK(synthesize(nnf) == ast);
}

TEST_CASE("synthesis restores the nested union query exactly") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(kNestedUnion, s);
  SelectStatement back = synthesize(decompose(ast));
  CHECK(back == ast);
  CHECK(print_sql(back, s) == kNestedUnion);
}

TEST_CASE("deep nesting respects and enforces the depth limit") {
  DatabaseSchema s = fixtures::flights_schema();
  SelectStatement ast = parse_sql(
      "SELECT City FROM Airports WHERE AirportCode IN "
      "(SELECT SourceAirport FROM Flights WHERE DestAirport IN "
      "(SELECT AirportCode FROM Airports WHERE City IN "
      "(SELECT DestAirport FROM Flights)))", s);
  NonNestedForm nnf = decompose(ast);
  CHECK(nnf.entries.size() == 4);
  CHECK(nnf.entries[3].first ==
        spc({SpcElement::Where, SpcElement::Where, SpcElement::Where}));
  CHECK(synthesize(nnf) == ast);
  CHECK(thrown_kind([&] { decompose(ast, 2); }) == ErrorKind::NestingLimit);
}

TEST_CASE("incomplete forms are rejected") {
  DatabaseSchema s = fixtures::flights_schema();
  NonNestedForm nnf = decompose(parse_sql(kNestedUnion, s));
  nnf.entries.pop_back();
  CHECK(thrown_kind([&] { synthesize(nnf); }) == ErrorKind::IncompleteForm);
  CHECK(thrown_kind([&] { synthesize(NonNestedForm{}); }) ==
        ErrorKind::IncompleteForm);
}

TEST_CASE("orphan entries are rejected") {
  DatabaseSchema s = fixtures::flights_schema();
  NonNestedForm nnf = decompose(parse_sql("SELECT City FROM Airports", s));
  nnf.entries.emplace_back(
      StatementPositionCode{{SpcElement::Having}},
      parse_sql("SELECT count(*) FROM Flights", s));
  CHECK(thrown_kind([&] { synthesize(nnf); }) == ErrorKind::UnreachableEntry);
}

TEST_CASE("entry count equals one plus the number of subquery slots") {
  DatabaseSchema s = fixtures::flights_schema();
  struct Case {
    const char* sql;
    size_t entries;
  };
  for (const Case& c : std::vector<Case>{
           {"SELECT City FROM Airports", 1},
           {kNestedUnion, 3},
           {"SELECT City FROM Airports WHERE AirportCode IN "
            "(SELECT SourceAirport FROM Flights)", 2}}) {
    CAPTURE(c.sql);
    CHECK(decompose(parse_sql(c.sql, s)).entries.size() == c.entries);
  }
}

TEST_CASE("non-nested forms round-trip through JSON") {
  DatabaseSchema s = fixtures::flights_schema();
  NonNestedForm nnf = decompose(parse_sql(kNestedUnion, s));
  NonNestedForm back = nnf_from_json(nnf_to_json(nnf));
  REQUIRE(back.entries.size() == nnf.entries.size());
  for (size_t i = 0; i < nnf.entries.size(); ++i) {
    CHECK(back.entries[i].first == nnf.entries[i].first);
    CHECK(back.entries[i].second == nnf.entries[i].second);
  }
  CHECK(synthesize(back) == parse_sql(kNestedUnion, s));
  CHECK(thrown_kind([&] { nnf_from_json("{}"); }) == ErrorKind::MalformedDocument);
  CHECK(thrown_kind([&] { nnf_from_json("[{\"spc\":[\"NONE\"]}]"); }) ==
        ErrorKind::MalformedDocument);
}
