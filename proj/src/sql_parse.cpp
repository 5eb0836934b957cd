#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "ryansql/sql.hpp"

namespace ryansql {

namespace {

enum class TokenKind { Word, Number, String, Symbol, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;   // lowercased for words, verbatim otherwise
  std::string raw;    // as written
  size_t pos = 0;     // byte offset in the input
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { next(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    next();
    return t;
  }

 private:
  void next() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    current_ = Token{};
    current_.pos = pos_;
    if (pos_ >= text_.size()) {
      current_.kind = TokenKind::End;
      current_.text = "<end>";
      return;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        ++pos_;
      }
      current_.kind = TokenKind::Word;
      current_.raw = text_.substr(start, pos_ - start);
      current_.text = current_.raw;
      std::transform(current_.text.begin(), current_.text.end(),
                     current_.text.begin(), [](unsigned char ch) {
                       return static_cast<char>(std::tolower(ch));
                     });
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '.')) {
        ++pos_;
      }
      current_.kind = TokenKind::Number;
      current_.raw = text_.substr(start, pos_ - start);
      current_.text = current_.raw;
      return;
    }
    if (c == '\'' || c == '"') {
      size_t start = pos_;
      char quote = c;
      ++pos_;
      while (pos_ < text_.size() && text_[pos_] != quote) ++pos_;
      if (pos_ >= text_.size()) {
        fail(ErrorKind::Lexical,
             "unterminated string literal at position " + std::to_string(start));
      }
      ++pos_;
      current_.kind = TokenKind::String;
      current_.raw = text_.substr(start, pos_ - start);
      current_.text = current_.raw;
      return;
    }
    // Multi-character comparison operators.
    for (const char* sym : {">=", "<=", "!=", "<>"}) {
      if (text_.compare(pos_, 2, sym) == 0) {
        current_.kind = TokenKind::Symbol;
        current_.raw = sym;
        current_.text = sym == std::string("<>") ? "!=" : sym;
        pos_ += 2;
        return;
      }
    }
    static const std::string kSingles = "(),.;=<>+-*/";
    if (kSingles.find(c) != std::string::npos) {
      current_.kind = TokenKind::Symbol;
      current_.raw = std::string(1, c);
      current_.text = current_.raw;
      ++pos_;
      return;
    }
    fail(ErrorKind::Lexical, "unexpected character '" + std::string(1, c) +
                                 "' at position " + std::to_string(pos_));
  }

  const std::string& text_;
  size_t pos_ = 0;
  Token current_;
};

const std::map<std::string, Aggregator> kAggregators = {
    {"max", Aggregator::Max},   {"min", Aggregator::Min},
    {"count", Aggregator::Count}, {"sum", Aggregator::Sum},
    {"avg", Aggregator::Avg},
};

bool is_keyword(const std::string& word) {
  static const std::vector<std::string> kKeywords = {
      "select", "from", "where", "group", "by", "having", "order", "limit",
      "distinct", "and", "or", "not", "in", "like", "is", "exists", "between",
      "join", "on", "as", "asc", "desc", "union", "intersect", "except",
      "max", "min", "count", "sum", "avg"};
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

class Parser {
 public:
  Parser(const std::string& text, const DatabaseSchema& schema)
      : lexer_(text), schema_(schema) {}

  SelectStatement parse() {
    SelectStatement stmt = parse_select();
    if (accept_symbol(";")) {
    }
    expect_end();
    return stmt;
  }

 private:
  [[noreturn]] void grammar_error(const std::string& what) {
    fail(ErrorKind::Grammar, what + " at position " +
                                 std::to_string(lexer_.peek().pos) + " (near '" +
                                 lexer_.peek().text + "')");
  }

  bool peek_word(const std::string& word) {
    return lexer_.peek().kind == TokenKind::Word && lexer_.peek().text == word;
  }

  bool accept_word(const std::string& word) {
    if (peek_word(word)) {
      lexer_.take();
      return true;
    }
    return false;
  }

  void expect_word(const std::string& word) {
    if (!accept_word(word)) grammar_error("expected '" + word + "'");
  }

  bool peek_symbol(const std::string& sym) {
    return lexer_.peek().kind == TokenKind::Symbol && lexer_.peek().text == sym;
  }

  bool accept_symbol(const std::string& sym) {
    if (peek_symbol(sym)) {
      lexer_.take();
      return true;
    }
    return false;
  }

  void expect_symbol(const std::string& sym) {
    if (!accept_symbol(sym)) grammar_error("expected '" + sym + "'");
  }

  void expect_end() {
    if (lexer_.peek().kind != TokenKind::End) {
      grammar_error("trailing input after statement");
    }
  }

  // FROM scope: tables in clause order plus alias -> position bindings.
  struct Scope {
    std::vector<int> tables;
    std::map<std::string, int> aliases;  // lowercased alias -> table index
  };

  SelectStatement parse_select() {
    expect_word("select");
    SelectStatement stmt;
    stmt.select_distinct = accept_word("distinct");

    // SELECT items are parsed before FROM is known, so identifier
    // resolution is deferred until the scope exists.
    std::vector<std::pair<Aggregator, RawValueUnit>> raw_items;
    raw_items.push_back(parse_select_item());
    while (accept_symbol(",")) raw_items.push_back(parse_select_item());

    expect_word("from");
    Scope scope = parse_from();
    stmt.from_tables = scope.tables;

    for (auto& [agg, raw] : raw_items) {
      stmt.select_conditions.emplace_back(agg, resolve_value_unit(raw, scope));
    }

    if (accept_word("where")) {
      stmt.where_conditions = parse_conditions(scope);
    }
    if (accept_word("group")) {
      expect_word("by");
      stmt.groupby_columns.push_back(parse_column_ref(scope));
      while (accept_symbol(",")) {
        stmt.groupby_columns.push_back(parse_column_ref(scope));
      }
    }
    if (accept_word("having")) {
      stmt.having_conditions = parse_conditions(scope);
    }
    if (accept_word("order")) {
      expect_word("by");
      do {
        ValueUnit vu = resolve_value_unit(parse_value_unit(), scope);
        OrderDirection dir = OrderDirection::Asc;
        if (accept_word("desc")) {
          dir = OrderDirection::Desc;
        } else {
          accept_word("asc");
        }
        stmt.orderby.emplace_back(vu, dir);
      } while (accept_symbol(","));
    }
    if (accept_word("limit")) {
      if (lexer_.peek().kind != TokenKind::Number) {
        grammar_error("expected LIMIT number");
      }
      Token t = lexer_.take();
      long long n = std::strtoll(t.text.c_str(), nullptr, 10);
      if (n <= 0) {
        fail(ErrorKind::Grammar, "LIMIT must be a positive integer, got '" +
                                     t.text + "' at position " +
                                     std::to_string(t.pos));
      }
      stmt.limit = LimitSpec{n == 1, n};
    }
    for (SetOperator op : {SetOperator::Intersect, SetOperator::Union,
                           SetOperator::Except}) {
      std::string word = to_string(op);
      std::transform(word.begin(), word.end(), word.begin(), ::tolower);
      if (accept_word(word)) {
        IuenClause iuen;
        iuen.op = op;
        iuen.child = std::make_shared<SelectStatement>(parse_select());
        stmt.iuen = std::move(iuen);
        break;
      }
    }
    return stmt;
  }

  // Column references keep their written form until the FROM scope exists.
  struct RawColumnRef {
    std::string qualifier;  // alias or table name, may be empty
    std::string name;       // column name or "*"
    size_t pos = 0;
  };
  struct RawColumnUnit {
    bool distinct = false;
    Aggregator aggregator = Aggregator::None;
    RawColumnRef column;
  };
  struct RawValueUnit {
    RawColumnUnit left;
    Arithmetic arithmetic = Arithmetic::None;
    std::optional<RawColumnUnit> right;
  };

  RawColumnRef parse_raw_column_ref() {
    RawColumnRef ref;
    ref.pos = lexer_.peek().pos;
    if (accept_symbol("*")) {
      ref.name = "*";
      return ref;
    }
    if (lexer_.peek().kind != TokenKind::Word) {
      grammar_error("expected column reference");
    }
    Token first = lexer_.take();
    if (is_keyword(first.text)) {
      fail(ErrorKind::Grammar, "keyword '" + first.text +
                                   "' cannot name a column, at position " +
                                   std::to_string(first.pos));
    }
    if (accept_symbol(".")) {
      ref.qualifier = first.text;
      if (accept_symbol("*")) {
        ref.name = "*";
        return ref;
      }
      if (lexer_.peek().kind != TokenKind::Word) {
        grammar_error("expected column name after '.'");
      }
      ref.name = lexer_.take().text;
    } else {
      ref.name = first.text;
    }
    return ref;
  }

  RawColumnUnit parse_raw_column_unit() {
    RawColumnUnit unit;
    if (lexer_.peek().kind == TokenKind::Word &&
        kAggregators.count(lexer_.peek().text)) {
      unit.aggregator = kAggregators.at(lexer_.take().text);
      expect_symbol("(");
      unit.distinct = accept_word("distinct");
      unit.column = parse_raw_column_ref();
      expect_symbol(")");
      return unit;
    }
    unit.distinct = accept_word("distinct");
    unit.column = parse_raw_column_ref();
    return unit;
  }

  RawValueUnit parse_value_unit() {
    RawValueUnit vu;
    vu.left = parse_raw_column_unit();
    for (auto [sym, ari] : std::initializer_list<std::pair<const char*, Arithmetic>>{
             {"-", Arithmetic::Minus},
             {"+", Arithmetic::Plus},
             {"*", Arithmetic::Times},
             {"/", Arithmetic::Divide}}) {
      if (peek_symbol(sym)) {
        lexer_.take();
        vu.arithmetic = ari;
        vu.right = parse_raw_column_unit();
        reject_chained_arithmetic();
        return vu;
      }
    }
    return vu;
  }

  void reject_chained_arithmetic() {
    for (const char* sym : {"-", "+", "*", "/"}) {
      if (peek_symbol(sym)) {
        fail(ErrorKind::UnsupportedConstruct,
             "chained arithmetic is outside the sketch, at position " +
                 std::to_string(lexer_.peek().pos));
      }
    }
  }

  // SELECT item: an optional outer aggregator wrapping a value unit.
  // "count(a)" binds count to the outer slot; "max(a) - min(b)" is a plain
  // value unit whose column units carry the aggregators.
  std::pair<Aggregator, RawValueUnit> parse_select_item() {
    if (lexer_.peek().kind == TokenKind::Word &&
        kAggregators.count(lexer_.peek().text)) {
      Aggregator agg = kAggregators.at(lexer_.take().text);
      expect_symbol("(");
      RawValueUnit inner;
      bool leading_distinct = accept_word("distinct");
      inner.left.distinct = leading_distinct;
      if (lexer_.peek().kind == TokenKind::Word &&
          kAggregators.count(lexer_.peek().text)) {
        fail(ErrorKind::UnsupportedConstruct,
             "nested aggregates are outside the sketch, at position " +
                 std::to_string(lexer_.peek().pos));
      }
      inner.left.column = parse_raw_column_ref();
      for (auto [sym, ari] :
           std::initializer_list<std::pair<const char*, Arithmetic>>{
               {"-", Arithmetic::Minus},
               {"+", Arithmetic::Plus},
               {"*", Arithmetic::Times},
               {"/", Arithmetic::Divide}}) {
        if (peek_symbol(sym)) {
          lexer_.take();
          inner.arithmetic = ari;
          inner.right = parse_raw_column_unit();
          break;
        }
      }
      expect_symbol(")");
      // Arithmetic after the closing paren reads the aggregate as the left
      // column unit instead: max(a) - min(b).
      for (auto [sym, ari] :
           std::initializer_list<std::pair<const char*, Arithmetic>>{
               {"-", Arithmetic::Minus},
               {"+", Arithmetic::Plus},
               {"*", Arithmetic::Times},
               {"/", Arithmetic::Divide}}) {
        if (peek_symbol(sym)) {
          if (inner.arithmetic != Arithmetic::None) {
            fail(ErrorKind::UnsupportedConstruct,
                 "chained arithmetic is outside the sketch, at position " +
                     std::to_string(lexer_.peek().pos));
          }
          lexer_.take();
          RawValueUnit vu;
          vu.left = RawColumnUnit{leading_distinct, agg, inner.left.column};
          vu.arithmetic = ari;
          vu.right = parse_raw_column_unit();
          reject_chained_arithmetic();
          return {Aggregator::None, vu};
        }
      }
      return {agg, inner};
    }
    return {Aggregator::None, parse_value_unit()};
  }

  Scope parse_from() {
    Scope scope;
    parse_from_table(scope);
    if (peek_symbol(",")) {
      fail(ErrorKind::UnsupportedConstruct,
           "comma joins are outside the sketch, use JOIN, at position " +
               std::to_string(lexer_.peek().pos));
    }
    while (accept_word("join")) {
      parse_from_table(scope);
      if (accept_word("on")) {
        parse_join_condition(scope);
        while (accept_word("and")) parse_join_condition(scope);
      }
    }
    return scope;
  }

  void parse_from_table(Scope& scope) {
    if (peek_symbol("(")) {
      fail(ErrorKind::UnsupportedConstruct,
           "subqueries in FROM are outside the sketch, at position " +
               std::to_string(lexer_.peek().pos));
    }
    if (lexer_.peek().kind != TokenKind::Word) {
      grammar_error("expected table name");
    }
    Token t = lexer_.take();
    int table = schema_.find_table(t.text);
    if (table < 0) {
      fail(ErrorKind::UnresolvedIdentifier,
           "unknown table '" + t.raw + "' at position " + std::to_string(t.pos));
    }
    scope.tables.push_back(table);
    if (accept_word("as")) {
      if (lexer_.peek().kind != TokenKind::Word) {
        grammar_error("expected alias after AS");
      }
      scope.aliases[lexer_.take().text] = table;
    } else if (lexer_.peek().kind == TokenKind::Word &&
               !is_keyword(lexer_.peek().text)) {
      scope.aliases[lexer_.take().text] = table;
    }
  }

  // JOIN ... ON t_a.x = t_b.y -- validated against the scope, then dropped;
  // the printer re-synthesizes join conditions from foreign keys.
  // ON conditions are checked, then dropped: they are re-synthesized from
  // foreign keys when printing, so anything else would silently change the
  // query.
  void parse_join_condition(Scope& scope) {
    int pos = lexer_.peek().pos;
    RawColumnRef a = parse_raw_column_ref();
    expect_symbol("=");
    RawColumnRef b = parse_raw_column_ref();
    int col_a = resolve_column(a, scope);
    int col_b = resolve_column(b, scope);
    for (const ForeignKey& fk : schema_.foreign_keys) {
      if ((fk.from_column == col_a && fk.to_column == col_b) ||
          (fk.from_column == col_b && fk.to_column == col_a)) {
        return;
      }
    }
    fail(ErrorKind::UnsupportedConstruct,
         "join condition does not match a declared foreign key, at position " +
             std::to_string(pos));
  }

  int resolve_column(const RawColumnRef& ref, const Scope& scope) {
    if (ref.name == "*") {
      return 0;
    }
    if (!ref.qualifier.empty()) {
      auto alias = scope.aliases.find(ref.qualifier);
      int table = alias != scope.aliases.end()
                      ? alias->second
                      : schema_.find_table(ref.qualifier);
      if (table < 0) {
        fail(ErrorKind::UnresolvedIdentifier,
             "unknown table or alias '" + ref.qualifier + "' at position " +
                 std::to_string(ref.pos));
      }
      int col = schema_.find_column(table, ref.name);
      if (col < 0) {
        fail(ErrorKind::UnresolvedIdentifier,
             "table '" + schema_.table(table).orig_name + "' has no column '" +
                 ref.name + "' at position " + std::to_string(ref.pos));
      }
      return col;
    }
    // Bare column: resolved against the FROM tables in clause order.
    for (int table : scope.tables) {
      int col = schema_.find_column(table, ref.name);
      if (col >= 0) return col;
    }
    fail(ErrorKind::UnresolvedIdentifier,
         "no FROM table has a column '" + ref.name + "' at position " +
             std::to_string(ref.pos));
  }

  int parse_column_ref(const Scope& scope) {
    return resolve_column(parse_raw_column_ref(), scope);
  }

  ColumnUnit resolve_column_unit(const RawColumnUnit& raw, const Scope& scope) {
    ColumnUnit cu;
    cu.distinct = raw.distinct;
    cu.aggregator = raw.aggregator;
    cu.column = resolve_column(raw.column, scope);
    return cu;
  }

  ValueUnit resolve_value_unit(const RawValueUnit& raw, const Scope& scope) {
    ValueUnit vu;
    vu.left = resolve_column_unit(raw.left, scope);
    vu.arithmetic = raw.arithmetic;
    if (raw.right) vu.right = resolve_column_unit(*raw.right, scope);
    return vu;
  }

  ConditionValue parse_condition_value(const Scope&) {
    if (accept_symbol("(")) {
      if (!peek_word("select")) {
        fail(ErrorKind::UnsupportedConstruct,
             "parenthesized value lists are outside the sketch; only nested "
             "SELECTs may follow '(', at position " +
                 std::to_string(lexer_.peek().pos));
      }
      SelectStatement sub = parse_select();
      expect_symbol(")");
      return ConditionValue::make_subquery(
          std::make_shared<SelectStatement>(std::move(sub)));
    }
    const Token& t = lexer_.peek();
    if (t.kind == TokenKind::Number || t.kind == TokenKind::String) {
      return ConditionValue::make_literal(lexer_.take().raw);
    }
    if (t.kind == TokenKind::Word && t.text == "null") {
      lexer_.take();
      return ConditionValue::make_literal("null");
    }
    if (t.kind == TokenKind::Word && !is_keyword(t.text)) {
      // Bare-word literal (Spider's unquoted values).
      return ConditionValue::make_literal(lexer_.take().raw);
    }
    if (accept_symbol("-")) {
      if (lexer_.peek().kind != TokenKind::Number) {
        grammar_error("expected number after '-'");
      }
      return ConditionValue::make_literal("-" + lexer_.take().raw);
    }
    grammar_error("expected condition value");
  }

  std::vector<Condition> parse_conditions(const Scope& scope) {
    std::vector<Condition> out;
    Conjunction conj = Conjunction::And;
    while (true) {
      Condition cond;
      cond.conjunction = conj;

      if (peek_word("exists") || (peek_word("not") && peek_second_is_exists())) {
        // EXISTS has no left column; the sketch's value unit degrades to `*`.
        cond.negated = accept_word("not");
        expect_word("exists");
        cond.op = CondOperator::Exists;
        cond.value_unit.left.column = 0;
        cond.value1 = parse_condition_value(scope);
        if (cond.value1.kind != ConditionValue::Kind::Subquery) {
          grammar_error("EXISTS requires a nested SELECT");
        }
      } else {
        cond.value_unit = resolve_value_unit(parse_value_unit(), scope);
        cond.negated = accept_word("not");
        if (accept_word("between")) {
          cond.op = CondOperator::Between;
          cond.value1 = parse_condition_value(scope);
          expect_word("and");
          cond.value2 = parse_condition_value(scope);
        } else if (accept_word("in")) {
          cond.op = CondOperator::In;
          cond.value1 = parse_condition_value(scope);
        } else if (accept_word("like")) {
          cond.op = CondOperator::Like;
          cond.value1 = parse_condition_value(scope);
        } else if (accept_word("is")) {
          cond.op = CondOperator::Is;
          cond.negated = cond.negated || accept_word("not");
          cond.value1 = parse_condition_value(scope);
        } else if (!cond.negated) {
          static const std::pair<const char*, CondOperator> kCompares[] = {
              {"=", CondOperator::Eq},  {">", CondOperator::Gt},
              {"<", CondOperator::Lt},  {">=", CondOperator::Ge},
              {"<=", CondOperator::Le}, {"!=", CondOperator::Ne},
          };
          bool matched = false;
          for (auto [sym, op] : kCompares) {
            if (accept_symbol(sym)) {
              cond.op = op;
              cond.value1 = parse_condition_value(scope);
              matched = true;
              break;
            }
          }
          if (!matched) grammar_error("expected condition operator");
        } else {
          grammar_error("expected BETWEEN, IN, LIKE or IS after NOT");
        }
      }
      out.push_back(std::move(cond));

      if (accept_word("and")) {
        conj = Conjunction::And;
      } else if (accept_word("or")) {
        conj = Conjunction::Or;
      } else {
        break;
      }
    }
    return out;
  }

  bool peek_second_is_exists() {
    // One-token lookahead for "NOT EXISTS"; a saved lexer copy keeps the
    // grammar LL(1) everywhere else.
    Lexer saved = lexer_;
    saved.take();
    return saved.peek().kind == TokenKind::Word && saved.peek().text == "exists";
  }

  Lexer lexer_;
  const DatabaseSchema& schema_;
};

}  // namespace

SelectStatement parse_sql(const std::string& text, const DatabaseSchema& schema) {
  Parser parser(text, schema);
  SelectStatement stmt = parser.parse();
  validate_statement(stmt, schema);
  return stmt;
}

}  // namespace ryansql
