#pragma once

#include <optional>
#include <string>

#include "ryansql/errors.hpp"
#include "ryansql/schema.hpp"

namespace fixtures {

/// Airports/Flights pair used by the nested-query walkthrough.
inline const char* kFlightsJson = R"([
  {
    "db_id": "flights",
    "table_names_original": ["Airports", "Flights"],
    "table_names": ["airports", "flights"],
    "column_names_original": [
      [-1, "*"],
      [0, "AirportCode"],
      [0, "AirportName"],
      [0, "City"],
      [1, "FlightNo"],
      [1, "SourceAirport"],
      [1, "DestAirport"]
    ],
    "column_names": [
      [-1, "*"],
      [0, "airport code"],
      [0, "airport name"],
      [0, "city"],
      [1, "flight number"],
      [1, "source airport"],
      [1, "dest airport"]
    ],
    "column_types": ["text", "text", "text", "text", "number", "text", "text"],
    "primary_keys": [1, 4],
    "foreign_keys": [[5, 1], [6, 1]]
  }
])";

/// author/paper joined through the link table writes.
inline const char* kScholarJson = R"([
  {
    "db_id": "scholar",
    "table_names_original": ["author", "paper", "writes"],
    "column_names_original": [
      [-1, "*"],
      [0, "authorId"],
      [0, "authorName"],
      [1, "paperId"],
      [1, "title"],
      [1, "year"],
      [2, "authorId"],
      [2, "paperId"]
    ],
    "primary_keys": [1, 3],
    "foreign_keys": [[6, 1], [7, 3]]
  }
])";

/// Table names that are / are not already contained in their column names.
inline const char* kTvJson = R"([
  {
    "db_id": "tvshow",
    "table_names_original": ["TV_Channel", "TV_series", "Cartoon"],
    "column_names_original": [
      [-1, "*"],
      [0, "id"],
      [0, "series_name"],
      [1, "id"],
      [1, "Episode"],
      [2, "id"],
      [2, "Title"]
    ],
    "primary_keys": [1, 3, 5],
    "foreign_keys": [[3, 1], [5, 1]]
  }
])";

inline ryansql::DatabaseSchema flights_schema() {
  return ryansql::parse_schemas(kFlightsJson).at(0);
}

inline ryansql::DatabaseSchema scholar_schema() {
  return ryansql::parse_schemas(kScholarJson).at(0);
}

inline ryansql::DatabaseSchema tv_schema() {
  return ryansql::parse_schemas(kTvJson).at(0);
}

/// Runs fn and reports the kind of the domain error it throws, if any.
template <typename Fn>
std::optional<ryansql::ErrorKind> thrown_kind(Fn&& fn) {
  try {
    fn();
  } catch (const ryansql::Error& e) {
    return e.kind();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace fixtures
