#include "ryansql/preprocess.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "ryansql/errors.hpp"

namespace ryansql {

namespace {

std::vector<std::string> stem_all(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(stem(t));
  return out;
}

bool contains_contiguous(const std::vector<std::string>& haystack,
                         const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (size_t at = 0; at + needle.size() <= haystack.size(); ++at) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + at)) {
      return true;
    }
  }
  return false;
}

}  // namespace

SupplementedSchema supplement_column_names(const DatabaseSchema& schema) {
  SupplementedSchema out;
  out.base = schema;
  out.scn_tokens.resize(schema.columns.size());
  out.scn_tokens[0] = {"*"};
  for (size_t c = 1; c < schema.columns.size(); ++c) {
    const Column& col = schema.columns[c];
    const Table& table = schema.tables[col.table_index];
    if (contains_contiguous(stem_all(col.name_tokens),
                            stem_all(table.name_tokens))) {
      out.scn_tokens[c] = col.name_tokens;
    } else {
      out.scn_tokens[c] = table.name_tokens;
      out.scn_tokens[c].insert(out.scn_tokens[c].end(), col.name_tokens.begin(),
                               col.name_tokens.end());
    }
  }
  return out;
}

namespace {

void mark_value_unit(const ValueUnit& vu, std::vector<char>& used,
                     const DatabaseSchema& schema) {
  for (const ColumnUnit* cu : {&vu.left, vu.right ? &*vu.right : nullptr}) {
    if (cu == nullptr || cu->column <= 0) continue;
    used.at(schema.table_of_column(cu->column)) = 1;
  }
}

}  // namespace

SelectStatement filter_link_tables(const SelectStatement& ast,
                                   const DatabaseSchema& schema) {
  std::vector<char> used(schema.tables.size(), 0);
  for (const auto& [agg, vu] : ast.select_conditions) {
    mark_value_unit(vu, used, schema);
  }
  for (const std::vector<Condition>* conds :
       {&ast.where_conditions, &ast.having_conditions}) {
    for (const Condition& c : *conds) mark_value_unit(c.value_unit, used, schema);
  }
  for (int c : ast.groupby_columns) {
    if (c > 0) used.at(schema.table_of_column(c)) = 1;
  }
  for (const auto& [vu, dir] : ast.orderby) mark_value_unit(vu, used, schema);

  int referenced = 0;
  for (int t : ast.from_tables) referenced += used.at(t);
  if (referenced < 2) return *clone(ast);

  SelectStatement out = *clone(ast);
  out.from_tables.clear();
  for (int t : ast.from_tables) {
    if (used.at(t)) out.from_tables.push_back(t);
  }
  return out;
}

JoinPlan recover_link_tables(const std::vector<int>& tables,
                             const DatabaseSchema& schema) {
  std::set<int> inputs(tables.begin(), tables.end());
  if (inputs.empty()) {
    fail(ErrorKind::InputContract, "table set must be non-empty");
  }
  int table_count = static_cast<int>(schema.tables.size());
  for (int t : inputs) {
    if (t < 0 || t >= table_count) {
      fail(ErrorKind::InputContract, "table index out of range");
    }
  }

  JoinGraph graph = foreign_key_graph(schema);
  JoinPlan plan;
  std::vector<char> in_plan(table_count, 0);
  plan.tables.push_back(*inputs.begin());
  in_plan[*inputs.begin()] = 1;

  auto report_disconnected = [&] {
    // Reachability from the seed table determines who is stranded.
    std::set<int> component{plan.tables[0]};
    std::deque<int> queue{plan.tables[0]};
    while (!queue.empty()) {
      int at = queue.front();
      queue.pop_front();
      for (int e : graph.edges_at(at)) {
        const JoinGraph::Edge& edge = graph.edge(e);
        int other = edge.table_a == at ? edge.table_b : edge.table_a;
        if (component.insert(other).second) queue.push_back(other);
      }
    }
    std::ostringstream msg;
    msg << "no foreign-key path connects";
    for (int t : inputs) {
      if (!component.count(t)) msg << " '" << schema.table(t).orig_name << "'";
    }
    msg << " to '" << schema.table(plan.tables[0]).orig_name << "'";
    fail(ErrorKind::DisconnectedTables, msg.str());
  };

  for (int target : inputs) {
    if (in_plan[target]) continue;
    // Multi-source BFS from the current plan; sources enter the queue in
    // ascending table index so equally long paths favor the smallest index.
    std::vector<int> via_edge(table_count, -1);
    std::vector<int> parent(table_count, -1);
    std::vector<char> seen(table_count, 0);
    std::deque<int> queue;
    std::vector<int> sources = plan.tables;
    std::sort(sources.begin(), sources.end());
    for (int s : sources) {
      seen[s] = 1;
      queue.push_back(s);
    }
    while (!queue.empty() && !seen[target]) {
      int at = queue.front();
      queue.pop_front();
      for (int e : graph.edges_at(at)) {
        const JoinGraph::Edge& edge = graph.edge(e);
        int other = edge.table_a == at ? edge.table_b : edge.table_a;
        if (!seen[other]) {
          seen[other] = 1;
          via_edge[other] = e;
          parent[other] = at;
          queue.push_back(other);
        }
      }
    }
    if (!seen[target]) report_disconnected();

    std::vector<std::pair<int, int>> hops;  // (table, edge) walking back to the plan
    for (int at = target; !in_plan[at]; at = parent[at]) {
      hops.emplace_back(at, via_edge[at]);
    }
    std::reverse(hops.begin(), hops.end());
    for (auto [t, e] : hops) {
      plan.tables.push_back(t);
      plan.foreign_keys.push_back(graph.edge(e).foreign_key);
      in_plan[t] = 1;
    }
  }
  return plan;
}

}  // namespace ryansql
