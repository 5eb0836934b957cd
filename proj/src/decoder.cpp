#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "ryansql/decoder.hpp"

namespace ryansql {

const char* to_string(IuenChoice choice) {
  switch (choice) {
    case IuenChoice::None: return "NONE";
    case IuenChoice::Intersect: return "INTERSECT";
    case IuenChoice::Union: return "UNION";
    case IuenChoice::Except: return "EXCEPT";
  }
  return "?";
}

int clause_capacity(ConditionClause clause) {
  switch (clause) {
    case ConditionClause::Select: return SketchBounds::select_conditions;
    case ConditionClause::Where: return SketchBounds::where_conditions;
    case ConditionClause::GroupBy: return SketchBounds::groupby_columns;
    case ConditionClause::Having: return SketchBounds::having_conditions;
    case ConditionClause::OrderBy: return SketchBounds::orderby_items;
  }
  return 0;
}

const char* clause_tag(ConditionClause clause) {
  switch (clause) {
    case ConditionClause::Select: return "sel";
    case ConditionClause::Where: return "wh";
    case ConditionClause::GroupBy: return "gb";
    case ConditionClause::Having: return "hv";
    case ConditionClause::OrderBy: return "ob";
  }
  return "?";
}

namespace {

const char* clause_word(ConditionClause clause) {
  switch (clause) {
    case ConditionClause::Select: return "SELECT";
    case ConditionClause::Where: return "WHERE";
    case ConditionClause::GroupBy: return "GROUPBY";
    case ConditionClause::Having: return "HAVING";
    case ConditionClause::OrderBy: return "ORDERBY";
  }
  return "?";
}

Var fc1(const Var& x, ParamStore& p, const std::string& prefix, int out) {
  return add(matmul(x, p.get(prefix + ".weight", x->value.cols, out)),
             p.get_const(prefix + ".bias", 1, out, 0.0));
}

// Two fully-connected layers with a tanh hidden layer of width `hidden`.
Var full2(const Var& x, ParamStore& p, const std::string& prefix, int hidden,
          int out) {
  return fc1(tanh(fc1(x, p, prefix + ".hidden", hidden)), p, prefix + ".out",
             out);
}

// One row of match logits over the columns per query row.
Var pick_columns(const Var& queries, const Var& v_c, ParamStore& p,
                 const std::string& prefix, int d) {
  Var w4 = p.get(prefix + ".w4", d, d);
  Var w5 = p.get(prefix + ".w5", d, d);
  Var w6 = p.get(prefix + ".w6", d, 1);
  Var keys = matmul(v_c, w5);
  std::vector<Var> rows;
  for (int i = 0; i < queries->value.rows; ++i) {
    Var q = matmul(gather_rows(queries, {i}), w4);
    rows.push_back(transpose(matmul(tanh(add(keys, q)), w6)));
  }
  return concat_rows(rows);
}

// Per-state token scores over the question; one row per state row.
Var pointer_scores(const Var& v_q, const Var& states, ParamStore& p,
                   const std::string& prefix, int d) {
  Var wq = p.get(prefix + ".wq", d, d);
  Var wu = p.get(prefix + ".wu", d, d);
  Var w = p.get(prefix + ".w", d, 1);
  Var base = matmul(v_q, wq);
  std::vector<Var> rows;
  for (int i = 0; i < states->value.rows; ++i) {
    Var u = matmul(gather_rows(states, {i}), wu);
    rows.push_back(transpose(matmul(tanh(add(base, u)), w)));
  }
  return concat_rows(rows);
}

int argmax_row(const Tensor& t, int row,
               const std::vector<char>* allowed = nullptr) {
  int best = -1;
  for (int j = 0; j < t.cols; ++j) {
    if (allowed && !(*allowed)[j]) continue;
    if (best < 0 || t.at(row, j) > t.at(row, best)) best = j;
  }
  return best;
}

bool flag_at(const Var& v, int row) { return v->value.at(row, 0) > 0.0; }

bool negatable(CondOperator op) {
  return op == CondOperator::Between || op == CondOperator::In ||
         op == CondOperator::Like || op == CondOperator::Is ||
         op == CondOperator::Exists;
}

NestingSite set_site(SetOperator op) {
  switch (op) {
    case SetOperator::Intersect: return NestingSite::Intersect;
    case SetOperator::Union: return NestingSite::Union;
    case SetOperator::Except: return NestingSite::Except;
  }
  return NestingSite::Union;
}

bool numeric_token(const std::string& t) {
  if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) {
    return false;
  }
  int dots = 0;
  for (char ch : t) {
    if (ch == '.') {
      if (++dots > 1) return false;
    } else if (!std::isdigit(static_cast<unsigned char>(ch))) {
      return false;
    }
  }
  return true;
}

// Value text for a question span: numbers stay bare, anything else is quoted
// so the result always re-lexes as one literal.
std::string span_literal(const std::vector<std::string>& question, int start,
                         int end) {
  std::string text;
  for (int i = start; i <= end; ++i) {
    if (!text.empty()) text += ' ';
    text += question[i];
  }
  if (start == end && numeric_token(text)) return text;
  std::string cleaned;
  for (char ch : text) {
    if (ch != '\'' && ch != '"') cleaned += ch;
  }
  if (cleaned.empty()) return "null";
  return "'" + cleaned + "'";
}

}  // namespace

Decoder::Decoder(Encoder encoder) : encoder_(std::move(encoder)) {}

Var Decoder::statement_vector(const EncoderOutputs& enc,
                              ParamStore& params) const {
  const EncoderConfig& c = encoder_.config();
  Var joint = concat_cols({hc(enc.question, enc.schema), enc.spc});
  return matmul(joint,
                params.get("dec.statement.weight", 4 * c.d + c.d_p, c.d));
}

BaseStructureLogits Decoder::classify_base_structure(const Var& v_s,
                                                     ParamStore& params) const {
  const int d = encoder_.config().d;
  BaseStructureLogits out;
  out.flags = concat_cols({full2(v_s, params, "dec.base.groupby", d, 1),
                           full2(v_s, params, "dec.base.orderby", d, 1),
                           full2(v_s, params, "dec.base.limit", d, 1),
                           full2(v_s, params, "dec.base.where", d, 1),
                           full2(v_s, params, "dec.base.having", d, 1)});
  out.n_groupby =
      full2(v_s, params, "dec.base.n_groupby", d, SketchBounds::groupby_columns);
  out.n_orderby =
      full2(v_s, params, "dec.base.n_orderby", d, SketchBounds::orderby_items);
  out.n_select =
      full2(v_s, params, "dec.base.n_select", d, SketchBounds::select_conditions);
  out.n_where =
      full2(v_s, params, "dec.base.n_where", d, SketchBounds::where_conditions);
  out.n_having =
      full2(v_s, params, "dec.base.n_having", d, SketchBounds::having_conditions);
  out.iuen = full2(v_s, params, "dec.base.iuen", d, 4);
  return out;
}

BaseStructure Decoder::read_base_structure(const BaseStructureLogits& logits) {
  const Tensor& f = logits.flags->value;
  BaseStructure b;
  b.has_groupby = f.at(0, 0) > 0.0;
  b.has_orderby = f.at(0, 1) > 0.0;
  b.has_limit = f.at(0, 2) > 0.0;
  b.has_where = f.at(0, 3) > 0.0;
  b.has_having = f.at(0, 4) > 0.0;
  b.n_groupby = argmax_row(logits.n_groupby->value, 0) + 1;
  b.n_orderby = argmax_row(logits.n_orderby->value, 0) + 1;
  b.n_select = argmax_row(logits.n_select->value, 0) + 1;
  b.n_where = argmax_row(logits.n_where->value, 0) + 1;
  b.n_having = argmax_row(logits.n_having->value, 0) + 1;
  b.iuen = static_cast<IuenChoice>(argmax_row(logits.iuen->value, 0));
  return b;
}

FromLogits Decoder::predict_from(const EncoderOutputs& enc,
                                 ParamStore& params) const {
  const EncoderConfig& c = encoder_.config();
  const int t = enc.tables->value.rows;
  Var ctx = concat_cols({enc.tables, tile_rows(enc.question, t),
                         tile_rows(enc.schema, t), tile_rows(enc.spc, t)});
  Var hidden = tanh(
      matmul(ctx, params.get("dec.from.score.w1", 3 * c.d + c.d_p, c.d)));
  FromLogits out;
  out.table_scores =
      transpose(matmul(hidden, params.get("dec.from.score.w2", c.d, 1)));
  Var pooled = matmul(softmax_rows(out.table_scores), enc.tables);
  out.count =
      full2(pooled, params, "dec.from.count", c.d, SketchBounds::from_tables);
  return out;
}

std::vector<int> Decoder::read_from_tables(const FromLogits& logits) {
  const Tensor& s = logits.table_scores->value;
  int picked = argmax_row(logits.count->value, 0) + 1;
  picked = std::clamp(picked, 1, s.cols);
  std::vector<int> order(s.cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s.at(0, a) > s.at(0, b); });
  order.resize(picked);
  std::sort(order.begin(), order.end());
  return order;
}

Var Decoder::condition_attention(const EncoderOutputs& enc,
                                 ConditionClause clause,
                                 ParamStore& params) const {
  const EncoderConfig& c = encoder_.config();
  const std::string base = std::string("dec.") + clause_tag(clause) + ".att";
  Var inner =
      tanh(add(matmul(enc.question_words, params.get(base + ".w1", c.d, c.d)),
               matmul(enc.spc, params.get(base + ".w2", c.d_p, c.d))));
  Var a = transpose(
      matmul(inner, params.get(base + ".w3", c.d, clause_capacity(clause))));
  return matmul(softmax_rows(a), enc.question_words);
}

ClauseLogits Decoder::predict_condition_slots(const Var& attended,
                                              const EncoderOutputs& enc,
                                              ConditionClause clause,
                                              ParamStore& params) const {
  const EncoderConfig& c = encoder_.config();
  const std::string base = std::string("dec.") + clause_tag(clause);
  ClauseLogits out;
  out.attended = attended;
  out.col1 = pick_columns(attended, enc.columns, params, base + ".col", c.d);
  if (clause == ConditionClause::GroupBy) return out;  // only the column is read

  Var w7 = params.get(base + ".update.w7", 4 * c.d, c.d);
  Var picked1 = matmul(softmax_rows(out.col1), enc.columns);
  out.summary1 = matmul(hc(attended, picked1), w7);
  out.dist1 = fc1(out.summary1, params, base + ".dist1", 1);
  out.agg1 = fc1(out.summary1, params, base + ".agg1", 6);
  out.ari = fc1(out.summary1, params, base + ".ari", 5);

  // The column matcher is reused with the updated state as the query.
  out.col2 = pick_columns(out.summary1, enc.columns, params, base + ".col", c.d);
  Var picked2 = matmul(softmax_rows(out.col2), enc.columns);
  out.summary2 = matmul(hc(out.summary1, picked2), w7);
  out.dist2 = fc1(out.summary2, params, base + ".dist2", 1);
  out.agg2 = fc1(out.summary2, params, base + ".agg2", 6);

  switch (clause) {
    case ConditionClause::Select:
      out.outer_agg = fc1(out.summary1, params, base + ".agg", 6);
      out.clause_distinct =
          fc1(statement_vector(enc, params), params, base + ".dist", 1);
      break;
    case ConditionClause::OrderBy:
      out.order_desc = fc1(out.summary1, params, base + ".dir", 1);
      break;
    case ConditionClause::Where:
    case ConditionClause::Having:
      out.conjunction = fc1(out.summary1, params, base + ".conj", 2);
      out.negated = fc1(out.summary1, params, base + ".not", 1);
      out.cond_op = fc1(out.summary1, params, base + ".op", 11);
      out.val1_nested = fc1(out.summary1, params, base + ".val1.nested", 1);
      out.val1_start = pointer_scores(enc.question_words, out.summary1, params,
                                      base + ".val1.start", c.d);
      out.val1_end = pointer_scores(enc.question_words, out.summary1, params,
                                    base + ".val1.end", c.d);
      out.val2_nested = fc1(out.summary2, params, base + ".val2.nested", 1);
      out.val2_start = pointer_scores(enc.question_words, out.summary2, params,
                                      base + ".val2.start", c.d);
      out.val2_end = pointer_scores(enc.question_words, out.summary2, params,
                                    base + ".val2.end", c.d);
      break;
    default:
      break;
  }
  return out;
}

LimitLogits Decoder::predict_limit(const EncoderOutputs& enc, const Var& v_s,
                                   ParamStore& params) const {
  const EncoderConfig& c = encoder_.config();
  LimitLogits out;
  out.top1 = fc1(v_s, params, "dec.limit.top1", 1);
  Var inner =
      tanh(add(matmul(enc.question_words, params.get("dec.limit.ptr.w1", c.d, c.d)),
               matmul(enc.spc, params.get("dec.limit.ptr.w2", c.d_p, c.d))));
  out.pointer = transpose(matmul(inner, params.get("dec.limit.ptr.w3", c.d, 1)));
  return out;
}

LimitSpec Decoder::read_limit(const LimitLogits& logits,
                              const std::vector<std::string>& question) {
  if (logits.top1->value.at(0, 0) > 0.0) return LimitSpec{true, 1};
  int pick = argmax_row(logits.pointer->value, 0);
  const std::string& token = question.at(pick);
  bool digits = !token.empty() &&
                std::all_of(token.begin(), token.end(), [](unsigned char ch) {
                  return std::isdigit(ch) != 0;
                });
  long long n = digits ? std::strtoll(token.c_str(), nullptr, 10) : 0;
  if (n <= 0) {
    fail(ErrorKind::ValueParse,
         "pointed token '" + token + "' is not a positive integer");
  }
  return LimitSpec{n == 1, n};
}

// ---- label extraction ----

namespace {

std::vector<std::string> literal_pieces(const std::string& raw) {
  std::istringstream in(canonical_literal(raw));
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// First occurrence of the literal as a contiguous question span, compared
// through canonical_literal on both sides.
std::pair<int, int> find_span(const std::string& raw,
                              const std::vector<std::string>& question) {
  std::vector<std::string> target = literal_pieces(raw);
  if (target.empty()) return {-1, -1};
  std::vector<std::string> canon(question.size());
  for (size_t i = 0; i < question.size(); ++i) {
    canon[i] = canonical_literal(question[i]);
  }
  for (size_t i = 0; i + target.size() <= canon.size(); ++i) {
    bool all = true;
    for (size_t k = 0; k < target.size() && all; ++k) {
      all = canon[i + k] == target[k];
    }
    if (all) return {static_cast<int>(i), static_cast<int>(i + target.size()) - 1};
  }
  return {-1, -1};
}

void fill_value_labels(ConditionLabels& row, const ConditionValue& v,
                       bool second, const std::vector<std::string>& question) {
  bool nested = v.kind != ConditionValue::Kind::Literal;
  auto [s, e] = nested ? std::pair<int, int>{-1, -1} : find_span(v.literal, question);
  if (second) {
    row.has_val2 = true;
    row.val2_nested = nested;
    row.val2_start = s;
    row.val2_end = e;
  } else {
    row.val1_nested = nested;
    row.val1_start = s;
    row.val1_end = e;
  }
}

ConditionLabels value_unit_labels(const ValueUnit& vu) {
  ConditionLabels row;
  row.col1 = vu.left.column;
  row.dist1 = vu.left.distinct;
  row.agg1 = static_cast<int>(vu.left.aggregator);
  row.ari = static_cast<int>(vu.arithmetic);
  if (vu.right) {
    row.has_col2 = true;
    row.col2 = vu.right->column;
    row.dist2 = vu.right->distinct;
    row.agg2 = static_cast<int>(vu.right->aggregator);
  }
  return row;
}

}  // namespace

GoldLabels Decoder::extract_labels(const SelectStatement& stmt,
                                   const DatabaseSchema& schema,
                                   const std::vector<std::string>& question) const {
  auto check = [](size_t n, int cap, const char* what) {
    if (static_cast<int>(n) > cap) {
      fail(ErrorKind::UnsupportedExample,
           std::string(what) + " has " + std::to_string(n) +
               " entries; the sketch allows " + std::to_string(cap));
    }
  };
  check(stmt.select_conditions.size(), SketchBounds::select_conditions, "SELECT");
  check(stmt.where_conditions.size(), SketchBounds::where_conditions, "WHERE");
  check(stmt.groupby_columns.size(), SketchBounds::groupby_columns, "GROUP BY");
  check(stmt.having_conditions.size(), SketchBounds::having_conditions, "HAVING");
  check(stmt.orderby.size(), SketchBounds::orderby_items, "ORDER BY");
  if (stmt.select_conditions.empty() || stmt.from_tables.empty()) {
    fail(ErrorKind::InputContract, "gold statement lacks SELECT or FROM");
  }

  GoldLabels out;
  out.from_tables.assign(schema.tables.size(), 0);
  for (int t : stmt.from_tables) {
    if (t < 0 || t >= static_cast<int>(schema.tables.size())) {
      fail(ErrorKind::InputContract, "gold FROM table index out of range");
    }
    out.from_tables[t] = 1;
  }
  out.from_count = static_cast<int>(
      std::count(out.from_tables.begin(), out.from_tables.end(), 1));
  check(out.from_count, SketchBounds::from_tables, "FROM");

  BaseStructure& b = out.base;
  b.has_groupby = !stmt.groupby_columns.empty();
  b.has_orderby = !stmt.orderby.empty();
  b.has_limit = stmt.limit.has_value();
  b.has_where = !stmt.where_conditions.empty();
  b.has_having = !stmt.having_conditions.empty();
  b.n_select = static_cast<int>(stmt.select_conditions.size());
  if (b.has_groupby) b.n_groupby = static_cast<int>(stmt.groupby_columns.size());
  if (b.has_orderby) b.n_orderby = static_cast<int>(stmt.orderby.size());
  if (b.has_where) b.n_where = static_cast<int>(stmt.where_conditions.size());
  if (b.has_having) b.n_having = static_cast<int>(stmt.having_conditions.size());
  b.iuen = stmt.iuen
               ? static_cast<IuenChoice>(static_cast<int>(stmt.iuen->op) + 1)
               : IuenChoice::None;

  out.select_distinct = stmt.select_distinct;
  for (const auto& [agg, vu] : stmt.select_conditions) {
    ConditionLabels row = value_unit_labels(vu);
    row.outer_agg = static_cast<int>(agg);
    out.select.push_back(row);
  }
  auto conditions = [&](const std::vector<Condition>& conds,
                        std::vector<ConditionLabels>& rows) {
    for (size_t i = 0; i < conds.size(); ++i) {
      const Condition& c = conds[i];
      ConditionLabels row = value_unit_labels(c.value_unit);
      if (i) row.conjunction = static_cast<int>(c.conjunction);
      row.negated = c.negated;
      row.cond_op = static_cast<int>(c.op);
      fill_value_labels(row, c.value1, false, question);
      if (c.value2) fill_value_labels(row, *c.value2, true, question);
      rows.push_back(row);
    }
  };
  conditions(stmt.where_conditions, out.where);
  conditions(stmt.having_conditions, out.having);
  for (int col : stmt.groupby_columns) {
    ConditionLabels row;
    row.col1 = col;
    out.groupby.push_back(row);
  }
  for (const auto& [vu, dir] : stmt.orderby) {
    ConditionLabels row = value_unit_labels(vu);
    row.order_desc = dir == OrderDirection::Desc;
    out.orderby.push_back(row);
  }
  if (stmt.limit) {
    out.limit_top1 = stmt.limit->is_top1;
    if (!out.limit_top1) {
      out.limit_token = find_span(std::to_string(stmt.limit->number), question).first;
    }
  }
  return out;
}

// ---- statement assembly ----

namespace {

// Walks the heads once per statement and reads them under the legality masks
// that keep the result printable and schema-valid; recursion is one instance
// per nesting level sharing the warning sink.
class Generator {
 public:
  Generator(const Decoder& decoder, const std::vector<std::string>& question,
            const SupplementedSchema& schema, ParamStore& params, int max_depth,
            std::vector<std::string>* warnings)
      : decoder_(decoder),
        question_(question),
        schema_(schema),
        params_(params),
        max_depth_(max_depth),
        warnings_(warnings) {}

  SelectStatement run(const StatementPositionCode& spc,
                      const BaseStructure* forced) {
    EncoderOutputs enc =
        decoder_.encoder().encode_inputs(question_, schema_, spc, params_);
    Var v_s = decoder_.statement_vector(enc, params_);
    BaseStructure bs = forced ? *forced
                              : Decoder::read_base_structure(
                                    decoder_.classify_base_structure(v_s, params_));

    SelectStatement stmt;

    // FROM first: the table choice scopes every column decision.
    FromLogits from = decoder_.predict_from(enc, params_);
    std::vector<int> content = Decoder::read_from_tables(from);
    JoinPlan plan;
    try {
      plan = recover_link_tables(content, schema_.base);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DisconnectedTables) throw;
      int best = argmax_row(from.table_scores->value, 0);
      warn("predicted FROM tables cannot be joined; kept '" +
           schema_.base.table(best).orig_name + "'");
      plan.tables = {best};
    }
    stmt.from_tables = plan.tables;

    std::vector<char> allowed(schema_.base.columns.size(), 0);
    allowed[0] = 1;
    for (size_t j = 1; j < allowed.size(); ++j) {
      int owner = schema_.base.table_of_column(static_cast<int>(j));
      allowed[j] = std::find(plan.tables.begin(), plan.tables.end(), owner) !=
                   plan.tables.end();
    }

    ClauseLogits sel = slots(enc, ConditionClause::Select);
    stmt.select_distinct = sel.clause_distinct->value.at(0, 0) > 0.0;
    for (int i = 0; i < bs.n_select; ++i) {
      stmt.select_conditions.push_back(
          read_select_item(sel, i, allowed, stmt.select_distinct));
    }

    if (bs.has_where) {
      ClauseLogits wh = slots(enc, ConditionClause::Where);
      int ordinal = 0;
      for (int i = 0; i < bs.n_where; ++i) {
        stmt.where_conditions.push_back(
            read_condition(wh, i, allowed, spc, NestingSite::Where, ordinal));
      }
    }

    if (bs.has_groupby) {
      ClauseLogits gb = slots(enc, ConditionClause::GroupBy);
      std::vector<char> real = allowed;
      real[0] = 0;  // `*` cannot be grouped
      if (std::find(real.begin(), real.end(), char(1)) == real.end()) {
        warn("FROM tables expose no groupable column; GROUP BY dropped");
      } else {
        for (int i = 0; i < bs.n_groupby; ++i) {
          stmt.groupby_columns.push_back(argmax_row(gb.col1->value, i, &real));
        }
      }
    }

    if (bs.has_having) {
      ClauseLogits hv = slots(enc, ConditionClause::Having);
      int ordinal = 0;
      for (int i = 0; i < bs.n_having; ++i) {
        stmt.having_conditions.push_back(
            read_condition(hv, i, allowed, spc, NestingSite::Having, ordinal));
      }
    }

    if (bs.has_orderby) {
      ClauseLogits ob = slots(enc, ConditionClause::OrderBy);
      for (int i = 0; i < bs.n_orderby; ++i) {
        ValueUnit vu = read_value_unit(ob, i, allowed);
        OrderDirection dir =
            flag_at(ob.order_desc, i) ? OrderDirection::Desc : OrderDirection::Asc;
        stmt.orderby.emplace_back(vu, dir);
      }
    }

    if (bs.has_limit) {
      try {
        stmt.limit =
            Decoder::read_limit(decoder_.predict_limit(enc, v_s, params_), question_);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ValueParse) throw;
        warn(std::string(e.what()) + "; LIMIT defaulted to 1");
        stmt.limit = LimitSpec{true, 1};
      }
    }

    if (bs.iuen != IuenChoice::None) {
      auto op = static_cast<SetOperator>(static_cast<int>(bs.iuen) - 1);
      try {
        StatementPositionCode sub = child_spc(spc, set_site(op), 0, max_depth_);
        IuenClause clause;
        clause.op = op;
        clause.child = std::make_shared<SelectStatement>(run(sub, nullptr));
        stmt.iuen = std::move(clause);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NestingLimit) throw;
        warn("set-operation child would exceed the nesting limit; dropped");
      }
    }

    validate_statement(stmt, schema_.base);
    return stmt;
  }

 private:
  void warn(const std::string& message) {
    if (warnings_) warnings_->push_back(message);
  }

  ClauseLogits slots(const EncoderOutputs& enc, ConditionClause clause) {
    return decoder_.predict_condition_slots(
        decoder_.condition_attention(enc, clause, params_), enc, clause, params_);
  }

  // `*` only combines with count/no aggregator and never with DISTINCT.
  ColumnUnit read_column_unit(const ClauseLogits& cl, int i, bool second,
                              const std::vector<char>& allowed, bool allow_agg) {
    const Var& col = second ? cl.col2 : cl.col1;
    const Var& dist = second ? cl.dist2 : cl.dist1;
    const Var& agg = second ? cl.agg2 : cl.agg1;
    ColumnUnit cu;
    cu.column = argmax_row(col->value, i, &allowed);
    if (allow_agg) {
      int a = argmax_row(agg->value, i);
      if (cu.column == 0 && a != static_cast<int>(Aggregator::None) &&
          a != static_cast<int>(Aggregator::Count)) {
        a = better_class(agg->value, i, static_cast<int>(Aggregator::None),
                         static_cast<int>(Aggregator::Count));
      }
      cu.aggregator = static_cast<Aggregator>(a);
    }
    cu.distinct = cu.column != 0 && flag_at(dist, i);
    return cu;
  }

  static int better_class(const Tensor& t, int row, int a, int b) {
    return t.at(row, b) > t.at(row, a) ? b : a;
  }

  ValueUnit read_value_unit(const ClauseLogits& cl, int i,
                            const std::vector<char>& allowed) {
    ValueUnit vu;
    int ari = argmax_row(cl.ari->value, i);
    vu.left = read_column_unit(cl, i, false, allowed, true);
    vu.arithmetic = static_cast<Arithmetic>(ari);
    if (ari != 0) vu.right = read_column_unit(cl, i, true, allowed, true);
    return vu;
  }

  // A SELECT item puts its sole aggregator in the outer slot; inner
  // aggregators appear only beside arithmetic (a nested aggregate would not
  // re-parse).
  std::pair<Aggregator, ValueUnit> read_select_item(
      const ClauseLogits& cl, int i, const std::vector<char>& allowed,
      bool select_distinct) {
    int ari = argmax_row(cl.ari->value, i);
    int outer = argmax_row(cl.outer_agg->value, i);
    bool inner_agg_ok = ari != 0 && outer == 0;
    ValueUnit vu;
    vu.left = read_column_unit(cl, i, false, allowed, inner_agg_ok);
    vu.arithmetic = static_cast<Arithmetic>(ari);
    if (ari != 0) vu.right = read_column_unit(cl, i, true, allowed, inner_agg_ok);
    if (ari == 0 && vu.left.column == 0 &&
        outer != static_cast<int>(Aggregator::None) &&
        outer != static_cast<int>(Aggregator::Count)) {
      outer = better_class(cl.outer_agg->value, i,
                           static_cast<int>(Aggregator::None),
                           static_cast<int>(Aggregator::Count));
    }
    // A DISTINCT opening the first item would re-parse as the statement-level
    // flag unless that flag already consumed one.
    if (i == 0 && !select_distinct && outer == 0 &&
        vu.left.aggregator == Aggregator::None) {
      vu.left.distinct = false;
    }
    return {static_cast<Aggregator>(outer), vu};
  }

  Condition read_condition(const ClauseLogits& cl, int i,
                           const std::vector<char>& allowed,
                           const StatementPositionCode& spc, NestingSite site,
                           int& ordinal) {
    Condition c;
    if (i > 0) {
      c.conjunction =
          static_cast<Conjunction>(argmax_row(cl.conjunction->value, i));
    }
    int op = argmax_row(cl.cond_op->value, i);

    if (op == static_cast<int>(CondOperator::Exists)) {
      // EXISTS only prints with a nested SELECT and a bare-star left side.
      try {
        StatementPositionCode sub = child_spc(spc, site, ordinal, max_depth_);
        ++ordinal;
        c.op = CondOperator::Exists;
        c.value_unit = ValueUnit{};
        c.negated = flag_at(cl.negated, i);
        c.value1 = ConditionValue::make_subquery(
            std::make_shared<SelectStatement>(run(sub, nullptr)));
        return c;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NestingLimit) throw;
        warn("EXISTS would exceed the nesting limit; operator re-picked");
        std::vector<char> ops(11, 1);
        ops[static_cast<int>(CondOperator::Exists)] = 0;
        op = argmax_row(cl.cond_op->value, i, &ops);
      }
    }
    c.op = static_cast<CondOperator>(op);
    c.value_unit = read_value_unit(cl, i, allowed);
    c.negated = flag_at(cl.negated, i) && negatable(c.op);
    c.value1 = read_value(cl, i, false, spc, site, ordinal);
    if (c.op == CondOperator::Between) {
      c.value2 = read_value(cl, i, true, spc, site, ordinal);
    }
    return c;
  }

  ConditionValue read_value(const ClauseLogits& cl, int i, bool second,
                            const StatementPositionCode& spc, NestingSite site,
                            int& ordinal) {
    bool nested = flag_at(second ? cl.val2_nested : cl.val1_nested, i);
    if (nested) {
      try {
        StatementPositionCode sub = child_spc(spc, site, ordinal, max_depth_);
        ++ordinal;
        return ConditionValue::make_subquery(
            std::make_shared<SelectStatement>(run(sub, nullptr)));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NestingLimit) throw;
        warn("nested value would exceed the nesting limit; null emitted");
        return ConditionValue::make_literal("null");
      }
    }
    const Tensor& sv = (second ? cl.val2_start : cl.val1_start)->value;
    const Tensor& ev = (second ? cl.val2_end : cl.val1_end)->value;
    int s = argmax_row(sv, i);
    int e = argmax_row(ev, i);
    if (e < s) {
      warn("value span end precedes start; repaired to the start token");
      e = s;
    }
    return ConditionValue::make_literal(span_literal(question_, s, e));
  }

  const Decoder& decoder_;
  const std::vector<std::string>& question_;
  const SupplementedSchema& schema_;
  ParamStore& params_;
  int max_depth_;
  std::vector<std::string>* warnings_;
};

}  // namespace

SelectStatement Decoder::generate_statement(
    const std::vector<std::string>& question, const SupplementedSchema& schema,
    const StatementPositionCode& spc, ParamStore& params, int max_depth,
    std::vector<std::string>* warnings, const BaseStructure* forced) const {
  if (spc.elements.empty()) {
    fail(ErrorKind::InputContract, "empty position code");
  }
  if (static_cast<int>(spc.elements.size()) > max_depth) {
    fail(ErrorKind::NestingLimit,
         "position code already exceeds the depth limit");
  }
  Generator generator(*this, question, schema, params, max_depth, warnings);
  return generator.run(spc, forced);
}

// ---- training ----

namespace {

Tensor row_targets(const std::vector<double>& values) {
  Tensor t(1, static_cast<int>(values.size()));
  for (size_t i = 0; i < values.size(); ++i) t.data[i] = values[i];
  return t;
}

Tensor column_targets(const std::vector<double>& values) {
  Tensor t(static_cast<int>(values.size()), 1);
  for (size_t i = 0; i < values.size(); ++i) t.data[i] = values[i];
  return t;
}

void clause_losses(const Decoder& dec,
                   std::vector<std::pair<std::string, Var>>& out,
                   const EncoderOutputs& enc, ConditionClause clause,
                   const std::vector<ConditionLabels>& rows,
                   bool select_distinct, ParamStore& params) {
  Var attended = dec.condition_attention(enc, clause, params);
  ClauseLogits cl = dec.predict_condition_slots(attended, enc, clause, params);
  const std::string word = clause_word(clause);
  const int n = static_cast<int>(rows.size());
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  std::vector<int> col1;
  for (const ConditionLabels& r : rows) col1.push_back(r.col1);
  out.emplace_back(word + " column",
                   cross_entropy_with_logits(gather_rows(cl.col1, all), col1));
  if (clause == ConditionClause::GroupBy) return;

  std::vector<double> dist1;
  std::vector<int> agg1, ari;
  for (const ConditionLabels& r : rows) {
    dist1.push_back(r.dist1 ? 1.0 : 0.0);
    agg1.push_back(r.agg1);
    ari.push_back(r.ari);
  }
  out.emplace_back(word + " column distinct",
                   binary_cross_entropy_with_logits(gather_rows(cl.dist1, all),
                                                    column_targets(dist1)));
  out.emplace_back(word + " column aggregator",
                   cross_entropy_with_logits(gather_rows(cl.agg1, all), agg1));
  out.emplace_back(word + " arithmetic",
                   cross_entropy_with_logits(gather_rows(cl.ari, all), ari));

  std::vector<int> second_rows, col2, agg2;
  std::vector<double> dist2;
  for (int i = 0; i < n; ++i) {
    if (!rows[i].has_col2) continue;
    second_rows.push_back(i);
    col2.push_back(rows[i].col2);
    dist2.push_back(rows[i].dist2 ? 1.0 : 0.0);
    agg2.push_back(rows[i].agg2);
  }
  if (!second_rows.empty()) {
    out.emplace_back(word + " second column",
                     cross_entropy_with_logits(gather_rows(cl.col2, second_rows), col2));
    out.emplace_back(word + " second distinct",
                     binary_cross_entropy_with_logits(
                         gather_rows(cl.dist2, second_rows), column_targets(dist2)));
    out.emplace_back(word + " second aggregator",
                     cross_entropy_with_logits(gather_rows(cl.agg2, second_rows), agg2));
  }

  if (clause == ConditionClause::Select) {
    std::vector<int> outer;
    for (const ConditionLabels& r : rows) outer.push_back(r.outer_agg);
    out.emplace_back("SELECT aggregator",
                     cross_entropy_with_logits(gather_rows(cl.outer_agg, all), outer));
    out.emplace_back("SELECT distinct",
                     binary_cross_entropy_with_logits(
                         cl.clause_distinct,
                         row_targets({select_distinct ? 1.0 : 0.0})));
  }
  if (clause == ConditionClause::OrderBy) {
    std::vector<double> dir;
    for (const ConditionLabels& r : rows) dir.push_back(r.order_desc ? 1.0 : 0.0);
    out.emplace_back("ORDERBY direction",
                     binary_cross_entropy_with_logits(gather_rows(cl.order_desc, all),
                                                      column_targets(dir)));
  }
  if (clause != ConditionClause::Where && clause != ConditionClause::Having) {
    return;
  }

  if (n > 1) {
    std::vector<int> tail(all.begin() + 1, all.end());
    std::vector<int> conj;
    for (int i = 1; i < n; ++i) conj.push_back(rows[i].conjunction);
    out.emplace_back(word + " conjunction",
                     cross_entropy_with_logits(gather_rows(cl.conjunction, tail), conj));
  }
  std::vector<double> negated, val1_nested;
  std::vector<int> ops;
  for (const ConditionLabels& r : rows) {
    negated.push_back(r.negated ? 1.0 : 0.0);
    ops.push_back(r.cond_op);
    val1_nested.push_back(r.val1_nested ? 1.0 : 0.0);
  }
  out.emplace_back(word + " negation",
                   binary_cross_entropy_with_logits(gather_rows(cl.negated, all),
                                                    column_targets(negated)));
  out.emplace_back(word + " operator",
                   cross_entropy_with_logits(gather_rows(cl.cond_op, all), ops));
  out.emplace_back(word + " value nesting",
                   binary_cross_entropy_with_logits(gather_rows(cl.val1_nested, all),
                                                    column_targets(val1_nested)));

  std::vector<int> span_rows, starts, ends;
  for (int i = 0; i < n; ++i) {
    if (rows[i].val1_nested || rows[i].val1_start < 0) continue;
    span_rows.push_back(i);
    starts.push_back(rows[i].val1_start);
    ends.push_back(rows[i].val1_end);
  }
  if (!span_rows.empty()) {
    out.emplace_back(word + " value start",
                     cross_entropy_with_logits(gather_rows(cl.val1_start, span_rows), starts));
    out.emplace_back(word + " value end",
                     cross_entropy_with_logits(gather_rows(cl.val1_end, span_rows), ends));
  }

  std::vector<int> second_vals;
  std::vector<double> val2_nested;
  for (int i = 0; i < n; ++i) {
    if (!rows[i].has_val2) continue;
    second_vals.push_back(i);
    val2_nested.push_back(rows[i].val2_nested ? 1.0 : 0.0);
  }
  if (!second_vals.empty()) {
    out.emplace_back(word + " second value nesting",
                     binary_cross_entropy_with_logits(
                         gather_rows(cl.val2_nested, second_vals),
                         column_targets(val2_nested)));
    std::vector<int> rows2, starts2, ends2;
    for (int i : second_vals) {
      if (rows[i].val2_nested || rows[i].val2_start < 0) continue;
      rows2.push_back(i);
      starts2.push_back(rows[i].val2_start);
      ends2.push_back(rows[i].val2_end);
    }
    if (!rows2.empty()) {
      out.emplace_back(word + " second value start",
                       cross_entropy_with_logits(gather_rows(cl.val2_start, rows2), starts2));
      out.emplace_back(word + " second value end",
                       cross_entropy_with_logits(gather_rows(cl.val2_end, rows2), ends2));
    }
  }
}

}  // namespace

std::vector<std::pair<std::string, Var>> Decoder::head_losses(
    const TrainingExample& example, const SupplementedSchema& schema,
    ParamStore& params, bool training, std::mt19937_64& rng) const {
  EncoderOutputs enc =
      training
          ? encoder_.encode_inputs(example.question, schema, example.spc,
                                   params, true, rng)
          : encoder_.encode_inputs(example.question, schema, example.spc, params);
  GoldLabels gold = extract_labels(example.statement, schema.base, example.question);
  std::vector<std::pair<std::string, Var>> out;

  Var v_s = statement_vector(enc, params);
  BaseStructureLogits bl = classify_base_structure(v_s, params);
  out.emplace_back(
      "structure flags",
      binary_cross_entropy_with_logits(
          bl.flags, row_targets({gold.base.has_groupby ? 1.0 : 0.0,
                                 gold.base.has_orderby ? 1.0 : 0.0,
                                 gold.base.has_limit ? 1.0 : 0.0,
                                 gold.base.has_where ? 1.0 : 0.0,
                                 gold.base.has_having ? 1.0 : 0.0})));
  out.emplace_back("structure select count",
                   cross_entropy_with_logits(bl.n_select, {gold.base.n_select - 1}));
  if (gold.base.has_groupby) {
    out.emplace_back("structure groupby count",
                     cross_entropy_with_logits(bl.n_groupby, {gold.base.n_groupby - 1}));
  }
  if (gold.base.has_orderby) {
    out.emplace_back("structure orderby count",
                     cross_entropy_with_logits(bl.n_orderby, {gold.base.n_orderby - 1}));
  }
  if (gold.base.has_where) {
    out.emplace_back("structure where count",
                     cross_entropy_with_logits(bl.n_where, {gold.base.n_where - 1}));
  }
  if (gold.base.has_having) {
    out.emplace_back("structure having count",
                     cross_entropy_with_logits(bl.n_having, {gold.base.n_having - 1}));
  }
  out.emplace_back("structure set operation",
                   cross_entropy_with_logits(bl.iuen, {static_cast<int>(gold.base.iuen)}));

  FromLogits from = predict_from(enc, params);
  std::vector<double> membership(gold.from_tables.begin(), gold.from_tables.end());
  out.emplace_back("from table scores",
                   binary_cross_entropy_with_logits(from.table_scores,
                                                    row_targets(membership)));
  out.emplace_back("from table count",
                   cross_entropy_with_logits(from.count, {gold.from_count - 1}));

  clause_losses(*this, out, enc, ConditionClause::Select, gold.select,
                gold.select_distinct, params);
  if (gold.base.has_where) {
    clause_losses(*this, out, enc, ConditionClause::Where, gold.where, false, params);
  }
  if (gold.base.has_groupby) {
    clause_losses(*this, out, enc, ConditionClause::GroupBy, gold.groupby, false, params);
  }
  if (gold.base.has_having) {
    clause_losses(*this, out, enc, ConditionClause::Having, gold.having, false, params);
  }
  if (gold.base.has_orderby) {
    clause_losses(*this, out, enc, ConditionClause::OrderBy, gold.orderby, false, params);
  }

  if (gold.base.has_limit) {
    LimitLogits limit = predict_limit(enc, v_s, params);
    out.emplace_back("limit top1",
                     binary_cross_entropy_with_logits(
                         limit.top1, row_targets({gold.limit_top1 ? 1.0 : 0.0})));
    if (!gold.limit_top1 && gold.limit_token >= 0) {
      out.emplace_back("limit pointer",
                       cross_entropy_with_logits(limit.pointer, {gold.limit_token}));
    }
  }
  return out;
}

Var Decoder::example_loss(const TrainingExample& example,
                          const SupplementedSchema& schema, ParamStore& params,
                          bool training, std::mt19937_64& rng) const {
  auto heads = head_losses(example, schema, params, training, rng);
  Var total;
  for (auto& [name, loss] : heads) {
    if (!std::isfinite(loss->value.at(0, 0))) {
      fail(ErrorKind::Divergence, "non-finite loss from head '" + name + "'");
    }
    total = total ? add(total, loss) : loss;
  }
  return total;
}

double Decoder::training_step(const std::vector<TrainingExample>& batch,
                              const std::vector<SupplementedSchema>& schemas,
                              ParamStore& params, OptimizerState& opt,
                              const TrainOptions& options, double learning_rate,
                              std::mt19937_64& rng) const {
  if (batch.empty()) fail(ErrorKind::InputContract, "empty training batch");
  params.zero_grad();
  double total = 0.0;
  for (const TrainingExample& example : batch) {
    if (example.schema_index < 0 ||
        example.schema_index >= static_cast<int>(schemas.size())) {
      fail(ErrorKind::InputContract, "training example names a missing schema");
    }
    Var loss = example_loss(example, schemas[example.schema_index], params,
                            true, rng);
    total += loss->value.at(0, 0);
    run_backward(scale(loss, 1.0 / static_cast<double>(batch.size())));
  }
  if (options.optimizer == OptimizerKind::Adam) {
    adam_step(params, opt, learning_rate);
  } else {
    params.sgd_step(learning_rate);
  }
  return total / static_cast<double>(batch.size());
}

TrainReport Decoder::train(const std::vector<TrainingExample>& examples,
                           const std::vector<SupplementedSchema>& schemas,
                           ParamStore& params, const TrainOptions& options) const {
  if (examples.empty()) fail(ErrorKind::InputContract, "no training examples");
  if (options.batch_size < 1 || options.max_epochs < 1 ||
      options.learning_rate <= 0.0) {
    fail(ErrorKind::InputContract, "invalid training options");
  }
  std::mt19937_64 rng(options.seed);
  OptimizerState opt;
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainReport report;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    // Fisher-Yates on the engine directly keeps the order portable.
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform01(rng) * double(i));
      if (j >= i) j = i - 1;
      std::swap(order[i - 1], order[j]);
    }
    double lr = options.learning_rate *
                std::pow(options.lr_decay, epoch / options.decay_interval);
    double sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += options.batch_size) {
      std::vector<TrainingExample> batch;
      for (size_t i = start;
           i < order.size() && i < start + options.batch_size; ++i) {
        batch.push_back(examples[order[i]]);
      }
      sum += training_step(batch, schemas, params, opt, options, lr, rng);
      ++batches;
    }
    double epoch_loss = sum / batches;
    report.epoch_losses.push_back(epoch_loss);
    if (epoch_loss < best) {
      best = epoch_loss;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  report.epochs = static_cast<int>(report.epoch_losses.size());
  report.best_loss = best;
  return report;
}

void Decoder::ensure_params(const std::vector<std::string>& question,
                            const SupplementedSchema& schema,
                            ParamStore& params) const {
  BaseStructure everything;
  everything.has_groupby = everything.has_orderby = everything.has_limit =
      everything.has_where = everything.has_having = true;
  everything.iuen = IuenChoice::Union;
  std::vector<std::string> warnings;
  generate_statement(question, schema, root_spc(), params, kDefaultMaxSpcDepth,
                     &warnings, &everything);
}

}  // namespace ryansql
