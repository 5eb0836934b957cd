#include <algorithm>
#include <sstream>

#include "ryansql/sql.hpp"

namespace ryansql {

namespace {

class Printer {
 public:
  Printer(const DatabaseSchema& schema) : schema_(schema) {}

  std::string print(const SelectStatement& stmt) {
    std::ostringstream os;
    print_statement(os, stmt);
    return os.str();
  }

 private:
  void print_statement(std::ostream& os, const SelectStatement& stmt) {
    os << "SELECT ";
    if (stmt.select_distinct) os << "DISTINCT ";
    for (size_t i = 0; i < stmt.select_conditions.size(); ++i) {
      if (i) os << ", ";
      print_select_item(os, stmt, stmt.select_conditions[i]);
    }
    print_from(os, stmt);
    if (!stmt.where_conditions.empty()) {
      os << " WHERE ";
      print_conditions(os, stmt, stmt.where_conditions);
    }
    if (!stmt.groupby_columns.empty()) {
      os << " GROUP BY ";
      for (size_t i = 0; i < stmt.groupby_columns.size(); ++i) {
        if (i) os << ", ";
        print_column(os, stmt, stmt.groupby_columns[i]);
      }
    }
    if (!stmt.having_conditions.empty()) {
      os << " HAVING ";
      print_conditions(os, stmt, stmt.having_conditions);
    }
    if (!stmt.orderby.empty()) {
      os << " ORDER BY ";
      for (size_t i = 0; i < stmt.orderby.size(); ++i) {
        if (i) os << ", ";
        print_value_unit(os, stmt, stmt.orderby[i].first);
        os << ' ' << to_string(stmt.orderby[i].second);
      }
    }
    if (stmt.limit) os << " LIMIT " << stmt.limit->number;
    if (stmt.iuen) {
      if (!stmt.iuen->child) {
        fail(ErrorKind::InputContract,
             "cannot print a placeholder child; synthesize the statement first");
      }
      os << ' ' << to_string(stmt.iuen->op) << ' ';
      print_statement(os, *stmt.iuen->child);
    }
  }

  void print_from(std::ostream& os, const SelectStatement& stmt) {
    const std::vector<int>& tables = stmt.from_tables;
    os << " FROM " << schema_.table(tables.at(0)).orig_name;
    if (tables.size() == 1) return;
    os << " AS t1";
    for (size_t i = 1; i < tables.size(); ++i) {
      os << " JOIN " << schema_.table(tables[i]).orig_name << " AS t" << (i + 1);
      print_join_on(os, tables, i);
    }
  }

  // Pick one foreign key between tables[i] and an earlier FROM entry:
  // earliest partner first, then the smallest foreign-key index.
  void print_join_on(std::ostream& os, const std::vector<int>& tables, size_t i) {
    for (size_t j = 0; j < i; ++j) {
      int best_fk = -1;
      for (size_t k = 0; k < schema_.foreign_keys.size(); ++k) {
        const ForeignKey& fk = schema_.foreign_keys[k];
        int ta = schema_.table_of_column(fk.from_column);
        int tb = schema_.table_of_column(fk.to_column);
        bool connects = (ta == tables[i] && tb == tables[j]) ||
                        (tb == tables[i] && ta == tables[j]);
        if (connects) {
          best_fk = static_cast<int>(k);
          break;
        }
      }
      if (best_fk >= 0) {
        const ForeignKey& fk = schema_.foreign_keys[best_fk];
        os << " ON " << alias_column(tables, fk.from_column) << " = "
           << alias_column(tables, fk.to_column);
        return;
      }
    }
    std::string names;
    for (size_t j = 0; j <= i; ++j) {
      if (j) names += ", ";
      names += schema_.table(tables[j]).orig_name;
    }
    fail(ErrorKind::JoinSynthesis,
         "table '" + schema_.table(tables[i]).orig_name +
             "' shares no foreign key with the tables before it in FROM (" +
             names + ")");
  }

  std::string alias_column(const std::vector<int>& tables, int column) const {
    int owner = schema_.table_of_column(column);
    for (size_t i = 0; i < tables.size(); ++i) {
      if (tables[i] == owner) {
        return "t" + std::to_string(i + 1) + "." +
               schema_.column(column).orig_name;
      }
    }
    return schema_.table(owner).orig_name + "." + schema_.column(column).orig_name;
  }

  void print_column(std::ostream& os, const SelectStatement& stmt, int column) {
    if (column == 0) {
      os << '*';
      return;
    }
    if (stmt.from_tables.size() > 1) {
      os << alias_column(stmt.from_tables, column);
    } else {
      int owner = schema_.table_of_column(column);
      if (owner != stmt.from_tables.at(0)) {
        os << schema_.table(owner).orig_name << '.';
      }
      os << schema_.column(column).orig_name;
    }
  }

  void print_column_unit(std::ostream& os, const SelectStatement& stmt,
                         const ColumnUnit& cu) {
    if (cu.aggregator != Aggregator::None) {
      os << to_string(cu.aggregator) << '(';
      if (cu.distinct) os << "DISTINCT ";
      print_column(os, stmt, cu.column);
      os << ')';
      return;
    }
    if (cu.distinct) os << "DISTINCT ";
    print_column(os, stmt, cu.column);
  }

  void print_value_unit(std::ostream& os, const SelectStatement& stmt,
                        const ValueUnit& vu) {
    print_column_unit(os, stmt, vu.left);
    if (vu.arithmetic != Arithmetic::None) {
      os << ' ' << to_string(vu.arithmetic) << ' ';
      print_column_unit(os, stmt, *vu.right);
    }
  }

  void print_select_item(std::ostream& os, const SelectStatement& stmt,
                         const std::pair<Aggregator, ValueUnit>& item) {
    const auto& [agg, vu] = item;
    if (agg == Aggregator::None) {
      print_value_unit(os, stmt, vu);
      return;
    }
    os << to_string(agg) << '(';
    if (vu.arithmetic == Arithmetic::None && vu.left.aggregator == Aggregator::None) {
      if (vu.left.distinct) os << "DISTINCT ";
      print_column(os, stmt, vu.left.column);
    } else {
      print_value_unit(os, stmt, vu);
    }
    os << ')';
  }

  void print_value(std::ostream& os, const SelectStatement&,
                   const ConditionValue& value) {
    switch (value.kind) {
      case ConditionValue::Kind::Literal:
        os << value.literal;
        return;
      case ConditionValue::Kind::Subquery:
        os << '(';
        print_statement(os, *value.subquery);
        os << ')';
        return;
      case ConditionValue::Kind::Placeholder:
        fail(ErrorKind::InputContract,
             "cannot print a placeholder value; synthesize the statement first");
    }
  }

  void print_conditions(std::ostream& os, const SelectStatement& stmt,
                        const std::vector<Condition>& conds) {
    for (size_t i = 0; i < conds.size(); ++i) {
      const Condition& c = conds[i];
      if (i) os << ' ' << to_string(c.conjunction) << ' ';
      switch (c.op) {
        case CondOperator::Exists:
          if (c.negated) os << "NOT ";
          os << "EXISTS ";
          print_value(os, stmt, c.value1);
          break;
        case CondOperator::Between:
          print_value_unit(os, stmt, c.value_unit);
          os << (c.negated ? " NOT BETWEEN " : " BETWEEN ");
          print_value(os, stmt, c.value1);
          os << " AND ";
          print_value(os, stmt, *c.value2);
          break;
        case CondOperator::In:
        case CondOperator::Like:
          print_value_unit(os, stmt, c.value_unit);
          os << (c.negated ? " NOT " : " ");
          os << (c.op == CondOperator::In ? "IN " : "LIKE ");
          print_value(os, stmt, c.value1);
          break;
        case CondOperator::Is:
          print_value_unit(os, stmt, c.value_unit);
          os << (c.negated ? " IS NOT " : " IS ");
          print_value(os, stmt, c.value1);
          break;
        default:
          print_value_unit(os, stmt, c.value_unit);
          os << ' ' << to_string(c.op) << ' ';
          print_value(os, stmt, c.value1);
          break;
      }
    }
  }

  const DatabaseSchema& schema_;
};

}  // namespace

std::string print_sql(const SelectStatement& stmt, const DatabaseSchema& schema) {
  validate_statement(stmt, schema);
  return Printer(schema).print(stmt);
}

}  // namespace ryansql
