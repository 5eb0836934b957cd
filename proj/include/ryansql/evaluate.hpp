#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ryansql/schema.hpp"
#include "ryansql/sql.hpp"

namespace ryansql {

struct MatchOptions {
  /// When false, any two condition literals compare equal (Spider's
  /// value-insensitive mode). Default is the stricter value-sensitive match.
  bool compare_values = true;
};

/// Exact-match equivalence: both statements are canonicalized (clause lists
/// become sorted multisets, literals case-folded and numerically normalized)
/// and compared component-wise, recursing into subqueries and set-operation
/// children.
bool exact_match(const SelectStatement& pred, const SelectStatement& gold,
                 const MatchOptions& options = {});

/// Difficulty proxy. The exact benchmark rules live in external tooling, so
/// reports label this column "hardness (proxy)". Rules, in order:
///   - any subquery or set operation anywhere  -> Extra
///   - otherwise score one point each for: WHERE, GROUPBY, HAVING,
///     ORDERBY-or-LIMIT, >1 select column, any aggregator, >1 FROM table,
///     any OR conjunction, any column arithmetic
///   - score <=1 Easy, ==2 Medium, 3..4 Hard, >=5 Extra
enum class Hardness { Easy, Medium, Hard, Extra };

const char* to_string(Hardness level);

Hardness hardness_proxy(const SelectStatement& stmt);

struct HardnessBucket {
  int correct = 0;
  int total = 0;
};

struct CorpusMetrics {
  int n = 0;
  int correct = 0;
  double overall = 0.0;                         // correct / n, 0 on empty
  std::array<HardnessBucket, 4> by_hardness{};  // indexed by gold Hardness
};

/// Scores predictions[i] against gold[i]; buckets by the gold statement's
/// hardness. Throws an alignment error when the two lists differ in length.
CorpusMetrics evaluate_corpus(const std::vector<SelectStatement>& predictions,
                              const std::vector<SelectStatement>& gold,
                              const MatchOptions& options = {});

std::string metrics_to_json(const CorpusMetrics& metrics, int indent = -1);
std::string metrics_table(const CorpusMetrics& metrics);

/// Seed-deterministic random statement over the schema, within the sketch
/// bounds and the printable dialect: multi-table FROM clauses follow the
/// foreign-key graph, nesting stays within `max_depth` position-code steps.
/// A few hundred draws exercise every condition operator, aggregator,
/// arithmetic, set operator, and nesting site the sketch admits.
SelectStatement fuzz_generate(const DatabaseSchema& schema, std::uint64_t seed,
                              int max_depth = 3);

}  // namespace ryansql
