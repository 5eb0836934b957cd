#include "ryansql/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <random>
#include <sstream>

#include "ryansql/errors.hpp"
#include "ryansql/preprocess.hpp"
#include "ryansql/sketch.hpp"
#include "ryansql/tensor.hpp"

#include "json.hpp"

namespace ryansql {

namespace {

void blank_literals(SelectStatement& stmt);

void blank_value(ConditionValue& value) {
  if (value.kind == ConditionValue::Kind::Literal) {
    value.literal = "?";
  } else if (value.subquery) {
    blank_literals(*value.subquery);
  }
}

void blank_literals(SelectStatement& stmt) {
  for (auto* conds : {&stmt.where_conditions, &stmt.having_conditions}) {
    for (Condition& c : *conds) {
      blank_value(c.value1);
      if (c.value2) blank_value(*c.value2);
    }
  }
  if (stmt.iuen && stmt.iuen->child) blank_literals(*stmt.iuen->child);
}

bool value_is_nested(const ConditionValue& v) {
  return v.kind != ConditionValue::Kind::Literal;
}

bool has_nesting(const SelectStatement& stmt) {
  if (stmt.iuen) return true;
  for (const auto* conds : {&stmt.where_conditions, &stmt.having_conditions}) {
    for (const Condition& c : *conds) {
      if (value_is_nested(c.value1)) return true;
      if (c.value2 && value_is_nested(*c.value2)) return true;
    }
  }
  return false;
}

bool unit_has_aggregator(const ValueUnit& vu) {
  if (vu.left.aggregator != Aggregator::None) return true;
  return vu.right && vu.right->aggregator != Aggregator::None;
}

bool uses_aggregator(const SelectStatement& stmt) {
  for (const auto& [agg, vu] : stmt.select_conditions) {
    if (agg != Aggregator::None || unit_has_aggregator(vu)) return true;
  }
  for (const auto* conds : {&stmt.where_conditions, &stmt.having_conditions}) {
    for (const Condition& c : *conds) {
      if (unit_has_aggregator(c.value_unit)) return true;
    }
  }
  for (const auto& [vu, dir] : stmt.orderby) {
    if (unit_has_aggregator(vu)) return true;
  }
  return false;
}

bool uses_arithmetic(const SelectStatement& stmt) {
  for (const auto& [agg, vu] : stmt.select_conditions) {
    if (vu.arithmetic != Arithmetic::None) return true;
  }
  for (const auto* conds : {&stmt.where_conditions, &stmt.having_conditions}) {
    for (const Condition& c : *conds) {
      if (c.value_unit.arithmetic != Arithmetic::None) return true;
    }
  }
  for (const auto& [vu, dir] : stmt.orderby) {
    if (vu.arithmetic != Arithmetic::None) return true;
  }
  return false;
}

bool uses_or(const SelectStatement& stmt) {
  for (const auto* conds : {&stmt.where_conditions, &stmt.having_conditions}) {
    for (size_t i = 1; i < conds->size(); ++i) {
      if ((*conds)[i].conjunction == Conjunction::Or) return true;
    }
  }
  return false;
}

}  // namespace

bool exact_match(const SelectStatement& pred, const SelectStatement& gold,
                 const MatchOptions& options) {
  SelectStatement a = *clone(pred);
  SelectStatement b = *clone(gold);
  if (!options.compare_values) {
    // Blank before canonicalizing so the sort keys agree too.
    blank_literals(a);
    blank_literals(b);
  }
  return statement_to_json(canonicalize(a)) == statement_to_json(canonicalize(b));
}

const char* to_string(Hardness level) {
  switch (level) {
    case Hardness::Easy: return "easy";
    case Hardness::Medium: return "medium";
    case Hardness::Hard: return "hard";
    case Hardness::Extra: return "extra";
  }
  return "?";
}

Hardness hardness_proxy(const SelectStatement& stmt) {
  if (has_nesting(stmt)) return Hardness::Extra;
  int score = 0;
  if (!stmt.where_conditions.empty()) ++score;
  if (!stmt.groupby_columns.empty()) ++score;
  if (!stmt.having_conditions.empty()) ++score;
  if (!stmt.orderby.empty() || stmt.limit) ++score;
  if (stmt.select_conditions.size() > 1) ++score;
  if (uses_aggregator(stmt)) ++score;
  if (stmt.from_tables.size() > 1) ++score;
  if (uses_or(stmt)) ++score;
  if (uses_arithmetic(stmt)) ++score;
  if (score <= 1) return Hardness::Easy;
  if (score == 2) return Hardness::Medium;
  if (score <= 4) return Hardness::Hard;
  return Hardness::Extra;
}

CorpusMetrics evaluate_corpus(const std::vector<SelectStatement>& predictions,
                              const std::vector<SelectStatement>& gold,
                              const MatchOptions& options) {
  if (predictions.size() != gold.size()) {
    fail(ErrorKind::Alignment,
         "prediction/gold mismatch: " + std::to_string(predictions.size()) +
             " predictions vs " + std::to_string(gold.size()) + " gold queries");
  }
  CorpusMetrics m;
  m.n = static_cast<int>(gold.size());
  for (size_t i = 0; i < gold.size(); ++i) {
    HardnessBucket& bucket =
        m.by_hardness[static_cast<int>(hardness_proxy(gold[i]))];
    ++bucket.total;
    if (exact_match(predictions[i], gold[i], options)) {
      ++bucket.correct;
      ++m.correct;
    }
  }
  m.overall = m.n ? static_cast<double>(m.correct) / m.n : 0.0;
  return m;
}

std::string metrics_to_json(const CorpusMetrics& metrics, int indent) {
  nlohmann::json by;
  for (int i = 0; i < 4; ++i) {
    const HardnessBucket& b = metrics.by_hardness[i];
    by[to_string(static_cast<Hardness>(i))] = {
        {"correct", b.correct},
        {"total", b.total},
        {"accuracy", b.total ? static_cast<double>(b.correct) / b.total : 0.0},
    };
  }
  nlohmann::json j = {
      {"n", metrics.n},
      {"correct", metrics.correct},
      {"overall", metrics.overall},
      {"by_hardness", by},
  };
  return j.dump(indent);
}

std::string metrics_table(const CorpusMetrics& metrics) {
  std::ostringstream os;
  auto row = [&os](const char* name, int correct, int total) {
    char acc[16] = "     -";
    if (total) {
      std::snprintf(acc, sizeof acc, "%5.1f%%", 100.0 * correct / total);
    }
    char line[80];
    std::snprintf(line, sizeof line, "%-18s %8d %8d %8s\n", name, correct,
                  total, acc);
    os << line;
  };
  os << "hardness (proxy)    correct    total accuracy\n";
  for (int i = 0; i < 4; ++i) {
    const HardnessBucket& b = metrics.by_hardness[i];
    row(to_string(static_cast<Hardness>(i)), b.correct, b.total);
  }
  row("overall", metrics.correct, metrics.n);
  return os.str();
}

namespace {

constexpr CondOperator kAllOps[] = {
    CondOperator::Between, CondOperator::Eq, CondOperator::Gt,
    CondOperator::Lt,      CondOperator::Ge, CondOperator::Le,
    CondOperator::Ne,      CondOperator::In, CondOperator::Like,
    CondOperator::Is,      CondOperator::Exists};

constexpr const char* kLiterals[] = {"'paris'", "'new york'", "'amber'",
                                     "'x1'",    "7",          "42",
                                     "3.5",     "0",          "null"};

bool fuzz_negatable(CondOperator op) {
  switch (op) {
    case CondOperator::Between:
    case CondOperator::In:
    case CondOperator::Like:
    case CondOperator::Is:
    case CondOperator::Exists:
      return true;
    default:
      return false;
  }
}

bool subquery_friendly(CondOperator op) {
  switch (op) {
    case CondOperator::Eq:
    case CondOperator::Gt:
    case CondOperator::Lt:
    case CondOperator::Ge:
    case CondOperator::Le:
    case CondOperator::Ne:
    case CondOperator::In:
      return true;
    default:
      return false;
  }
}

class Fuzzer {
 public:
  Fuzzer(const DatabaseSchema& schema, std::uint64_t seed, int max_depth)
      : schema_(schema),
        rng_(mix_seed(seed, "fuzz")),
        max_depth_(max_depth) {}

  SelectStatement statement(const StatementPositionCode& spc) {
    SelectStatement stmt;
    stmt.from_tables = pick_from_tables();
    std::vector<int> cols = columns_of(stmt.from_tables);

    stmt.select_distinct = chance(0.15);
    int n_select = 1 + pick(3);
    for (int i = 0; i < n_select; ++i) {
      stmt.select_conditions.push_back(
          select_item(cols, i == 0, stmt.select_distinct));
    }

    if (chance(0.75)) {
      int ordinal = 0;
      int n = 1 + pick(3);
      for (int i = 0; i < n; ++i) {
        stmt.where_conditions.push_back(
            condition(cols, spc, NestingSite::Where, ordinal, false));
        if (i) stmt.where_conditions[i].conjunction =
            chance(0.3) ? Conjunction::Or : Conjunction::And;
      }
    }
    if (chance(0.35)) {
      int n = 1 + pick(2);
      for (int i = 0; i < n; ++i) {
        int c = cols[pick(cols.size())];
        if (!contains(stmt.groupby_columns, c)) stmt.groupby_columns.push_back(c);
      }
      std::sort(stmt.groupby_columns.begin(), stmt.groupby_columns.end());
    }
    if (chance(0.25)) {
      int ordinal = 0;
      int n = 1 + pick(2);
      for (int i = 0; i < n; ++i) {
        stmt.having_conditions.push_back(
            condition(cols, spc, NestingSite::Having, ordinal, true));
        if (i) stmt.having_conditions[i].conjunction =
            chance(0.3) ? Conjunction::Or : Conjunction::And;
      }
    }
    if (chance(0.35)) {
      int n = 1 + pick(2);
      for (int i = 0; i < n; ++i) {
        stmt.orderby.emplace_back(
            order_unit(cols), chance(0.5) ? OrderDirection::Asc
                                          : OrderDirection::Desc);
      }
    }
    if (chance(0.25)) {
      stmt.limit = chance(0.6) ? LimitSpec{true, 1}
                               : LimitSpec{false, 2 + pick(8)};
    }
    if (chance(0.18)) {
      static constexpr NestingSite kIuenSite[] = {
          NestingSite::Intersect, NestingSite::Union, NestingSite::Except};
      static constexpr SetOperator kIuenOp[] = {
          SetOperator::Intersect, SetOperator::Union, SetOperator::Except};
      int k = pick(3);
      if (StatementPtr child = try_child(spc, kIuenSite[k], 0)) {
        stmt.iuen = IuenClause{kIuenOp[k], child, {}};
      }
    }
    return stmt;
  }

 private:
  double u() { return uniform01(rng_); }
  bool chance(double p) { return u() < p; }
  int pick(size_t n) {
    return static_cast<int>(u() * static_cast<double>(n)) %
           static_cast<int>(n);
  }
  static bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  }

  std::vector<int> pick_from_tables() {
    int t = static_cast<int>(schema_.tables.size());
    if (t == 1 || chance(0.55)) return {pick(t)};
    int want = (t > 2 && chance(0.3)) ? 3 : 2;
    std::vector<int> chosen = {pick(t)};
    for (int tries = 0; static_cast<int>(chosen.size()) < want && tries < 8;
         ++tries) {
      std::vector<int> frontier;
      for (const ForeignKey& fk : schema_.foreign_keys) {
        int a = schema_.column(fk.from_column).table_index;
        int b = schema_.column(fk.to_column).table_index;
        bool ha = contains(chosen, a), hb = contains(chosen, b);
        if (ha != hb) frontier.push_back(ha ? b : a);
      }
      if (frontier.empty()) break;
      chosen.push_back(frontier[pick(frontier.size())]);
    }
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    try {
      JoinPlan plan = recover_link_tables(chosen, schema_);
      if (plan.tables.size() <= SketchBounds::from_tables) return plan.tables;
    } catch (const Error&) {
    }
    return {chosen[0]};
  }

  std::vector<int> columns_of(const std::vector<int>& tables) {
    std::vector<int> cols;
    for (int t : tables) {
      for (int c : schema_.table(t).column_indices) cols.push_back(c);
    }
    return cols;
  }

  // Real column, no star.
  ColumnUnit plain_unit(const std::vector<int>& cols, bool allow_distinct) {
    return {allow_distinct && chance(0.12), Aggregator::None,
            cols[pick(cols.size())]};
  }

  std::pair<Aggregator, ValueUnit> select_item(const std::vector<int>& cols,
                                               bool first,
                                               bool select_distinct) {
    std::pair<Aggregator, ValueUnit> item;
    double r = u();
    if (r < 0.12) {  // count(*) / bare *
      bool counted = chance(0.6);
      item.first = counted ? Aggregator::Count : Aggregator::None;
      item.second.left = ColumnUnit{false, Aggregator::None, 0};
    } else if (r < 0.45) {  // agg(col), distinct allowed inside
      item.first = static_cast<Aggregator>(1 + pick(5));
      item.second.left = plain_unit(cols, true);
    } else if (r < 0.65) {  // arithmetic, inner aggregators allowed
      item.second.left = plain_unit(cols, false);
      item.second.arithmetic = static_cast<Arithmetic>(1 + pick(4));
      item.second.right = plain_unit(cols, false);
      if (chance(0.5)) item.second.left.aggregator =
          static_cast<Aggregator>(1 + pick(5));
      if (chance(0.3)) item.second.right->aggregator =
          static_cast<Aggregator>(1 + pick(5));
    } else {  // plain column
      item.second.left = plain_unit(cols, true);
    }
    // A DISTINCT opening the first item would re-parse as the statement-level
    // flag unless that flag already consumed one.
    if (first && !select_distinct && item.first == Aggregator::None &&
        item.second.left.aggregator == Aggregator::None) {
      item.second.left.distinct = false;
    }
    return item;
  }

  ValueUnit condition_unit(const std::vector<int>& cols, bool having) {
    ValueUnit vu;
    if (having && chance(0.5)) {  // the classic count(*)
      vu.left = ColumnUnit{false, Aggregator::Count, 0};
      return vu;
    }
    vu.left = plain_unit(cols, false);
    if (chance(having ? 0.5 : 0.15)) {
      vu.left.aggregator = static_cast<Aggregator>(1 + pick(5));
    }
    if (chance(0.1)) {
      vu.arithmetic = static_cast<Arithmetic>(1 + pick(4));
      vu.right = plain_unit(cols, false);
    }
    return vu;
  }

  ValueUnit order_unit(const std::vector<int>& cols) {
    ValueUnit vu;
    double r = u();
    if (r < 0.25) {
      vu.left = ColumnUnit{false, Aggregator::Count, 0};
    } else if (r < 0.5) {
      vu.left = plain_unit(cols, false);
      vu.left.aggregator = static_cast<Aggregator>(1 + pick(5));
    } else {
      vu.left = plain_unit(cols, true);
    }
    return vu;
  }

  ConditionValue literal_value() {
    return ConditionValue::make_literal(
        kLiterals[pick(std::size(kLiterals))]);
  }

  StatementPtr try_child(const StatementPositionCode& spc, NestingSite site,
                         int ordinal) {
    StatementPositionCode code;
    try {
      code = child_spc(spc, site, ordinal, max_depth_);
    } catch (const Error&) {
      return nullptr;
    }
    return std::make_shared<SelectStatement>(statement(code));
  }

  Condition condition(const std::vector<int>& cols,
                      const StatementPositionCode& spc, NestingSite site,
                      int& ordinal, bool having) {
    Condition c;
    c.op = kAllOps[pick(std::size(kAllOps))];
    if (c.op == CondOperator::Exists) {
      if (StatementPtr child = try_child(spc, site, ordinal)) {
        ++ordinal;
        c.value_unit = ValueUnit{};  // parser pins EXISTS units to `*`
        c.value1 = ConditionValue::make_subquery(child);
        c.negated = chance(0.3);
        return c;
      }
      while (c.op == CondOperator::Exists)
        c.op = kAllOps[pick(std::size(kAllOps))];
    }
    c.value_unit = condition_unit(cols, having);
    c.negated = fuzz_negatable(c.op) && chance(0.25);
    if (c.op == CondOperator::Between) {
      c.value1 = literal_value();
      c.value2 = literal_value();
      return c;
    }
    if (subquery_friendly(c.op) && chance(0.18)) {
      if (StatementPtr child = try_child(spc, site, ordinal)) {
        ++ordinal;
        c.value1 = ConditionValue::make_subquery(child);
        return c;
      }
    }
    c.value1 = literal_value();
    return c;
  }

  const DatabaseSchema& schema_;
  std::mt19937_64 rng_;
  int max_depth_;
};

}  // namespace

SelectStatement fuzz_generate(const DatabaseSchema& schema, std::uint64_t seed,
                              int max_depth) {
  if (schema.tables.empty()) {
    fail(ErrorKind::InputContract, "cannot fuzz an empty schema");
  }
  Fuzzer fuzzer(schema, seed, max_depth);
  SelectStatement stmt = fuzzer.statement(root_spc());
  validate_statement(stmt, schema);
  return stmt;
}

}  // namespace ryansql
