#pragma once

#include <string>
#include <vector>

#include "ryansql/errors.hpp"

namespace ryansql {

/// One column of a database table. Column 0 of every schema is the `*`
/// sentinel, owned by no table (table_index == -1).
struct Column {
  int table_index = -1;
  std::string orig_name;                 // as written in the schema file
  std::vector<std::string> name_tokens;  // lowercased, split on space/underscore
  bool is_primary_key = false;
};

struct Table {
  std::string orig_name;
  std::vector<std::string> name_tokens;
  std::vector<int> column_indices;  // indices into DatabaseSchema::columns
};

/// Directed as stored (from references to), treated as undirected by the
/// join graph.
struct ForeignKey {
  int from_column = 0;
  int to_column = 0;
};

struct DatabaseSchema {
  std::string db_id;
  std::vector<Table> tables;
  std::vector<Column> columns;
  std::vector<ForeignKey> foreign_keys;

  const Column& column(int index) const { return columns.at(index); }
  const Table& table(int index) const { return tables.at(index); }
  int table_of_column(int column_index) const {
    return columns.at(column_index).table_index;
  }

  /// Case-insensitive lookup against original names; -1 when absent.
  int find_table(const std::string& name) const;
  /// Looks up `name` among the columns of `table_index`, or across the whole
  /// schema when table_index is -1. Returns -1 when absent.
  int find_column(int table_index, const std::string& name) const;
};

/// Lowercases and splits an identifier into word tokens on whitespace and
/// underscores.
std::vector<std::string> tokenize_name(const std::string& name);

/// Loads every schema from a Spider-format `tables.json` document and
/// validates the schema invariants.
std::vector<DatabaseSchema> load_schemas(const std::string& path);
std::vector<DatabaseSchema> parse_schemas(const std::string& json_text);

/// Serializes schemas back into the interchange format (round-trip safe).
std::string serialize_schemas(const std::vector<DatabaseSchema>& schemas);

const DatabaseSchema& find_schema(const std::vector<DatabaseSchema>& schemas,
                                  const std::string& db_id);

/// Undirected multigraph over table indices; one edge per foreign key.
class JoinGraph {
 public:
  struct Edge {
    int table_a = 0;
    int table_b = 0;
    int foreign_key = 0;  // index into schema.foreign_keys
  };

  JoinGraph(int table_count, std::vector<Edge> edges);

  int table_count() const { return table_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int index) const { return edges_.at(index); }
  const std::vector<int>& edges_at(int table) const {
    return adjacency_.at(table);
  }

  /// Shortest path between two tables as a list of edge indices; empty when
  /// from == to, nullopt-like empty+false when unreachable.
  bool shortest_path(int from, int to, std::vector<int>* out_edges) const;

 private:
  int table_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;  // table -> edge indices
};

JoinGraph foreign_key_graph(const DatabaseSchema& schema);

}  // namespace ryansql
