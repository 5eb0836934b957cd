#include "ryansql/schema.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace ryansql {

using nlohmann::json;

std::vector<std::string> tokenize_name(const std::string& name) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : name) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (c == '_' || std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

void validate(const DatabaseSchema& schema) {
  auto die = [&](const std::string& field, const std::string& what) {
    fail(ErrorKind::SchemaValidation,
         "db '" + schema.db_id + "', field '" + field + "': " + what);
  };
  if (schema.db_id.empty()) die("db_id", "empty");
  if (schema.columns.empty() || schema.columns[0].orig_name != "*" ||
      schema.columns[0].table_index != -1) {
    die("column_names_original", "column 0 must be the [-1, \"*\"] sentinel");
  }
  if (schema.tables.empty()) die("table_names_original", "no tables");

  std::vector<int> owner(schema.columns.size(), -1);
  for (size_t t = 0; t < schema.tables.size(); ++t) {
    const Table& table = schema.tables[t];
    if (table.name_tokens.empty()) die("table_names_original", "empty name");
    if (table.column_indices.empty()) {
      die("table_names_original", "table '" + table.orig_name + "' has no columns");
    }
    for (int c : table.column_indices) {
      if (c <= 0 || c >= static_cast<int>(schema.columns.size())) {
        die("column_names_original", "column index out of range");
      }
      if (owner[c] != -1) die("column_names_original", "column owned twice");
      owner[c] = static_cast<int>(t);
    }
  }
  for (size_t c = 1; c < schema.columns.size(); ++c) {
    const Column& col = schema.columns[c];
    if (col.name_tokens.empty()) die("column_names_original", "empty name");
    if (col.table_index < 0 ||
        col.table_index >= static_cast<int>(schema.tables.size())) {
      die("column_names_original", "owning table index out of range");
    }
    if (owner[c] != col.table_index) {
      die("column_names_original",
          "column '" + col.orig_name + "' not listed under its table");
    }
  }
  for (const ForeignKey& fk : schema.foreign_keys) {
    int n = static_cast<int>(schema.columns.size());
    if (fk.from_column <= 0 || fk.from_column >= n || fk.to_column <= 0 ||
        fk.to_column >= n) {
      die("foreign_keys", "column index out of range");
    }
    if (schema.columns[fk.from_column].table_index ==
        schema.columns[fk.to_column].table_index) {
      die("foreign_keys", "foreign key must connect two different tables");
    }
  }
}

DatabaseSchema schema_from_json(const json& j) {
  DatabaseSchema schema;
  schema.db_id = j.at("db_id").get<std::string>();

  for (const auto& name : j.at("table_names_original")) {
    Table table;
    table.orig_name = name.get<std::string>();
    table.name_tokens = tokenize_name(table.orig_name);
    schema.tables.push_back(std::move(table));
  }
  int index = 0;
  for (const auto& entry : j.at("column_names_original")) {
    Column col;
    col.table_index = entry.at(0).get<int>();
    col.orig_name = entry.at(1).get<std::string>();
    col.name_tokens = tokenize_name(col.orig_name);
    if (index > 0 && col.table_index >= 0 &&
        col.table_index < static_cast<int>(schema.tables.size())) {
      schema.tables[col.table_index].column_indices.push_back(index);
    }
    schema.columns.push_back(std::move(col));
    ++index;
  }
  if (j.contains("primary_keys")) {
    for (const auto& pk : j.at("primary_keys")) {
      int c = pk.get<int>();
      if (c >= 0 && c < static_cast<int>(schema.columns.size())) {
        schema.columns[c].is_primary_key = true;
      }
    }
  }
  if (j.contains("foreign_keys")) {
    for (const auto& fk : j.at("foreign_keys")) {
      schema.foreign_keys.push_back(
          ForeignKey{fk.at(0).get<int>(), fk.at(1).get<int>()});
    }
  }
  return schema;
}

}  // namespace

int DatabaseSchema::find_table(const std::string& name) const {
  std::string needle = lower(name);
  for (size_t i = 0; i < tables.size(); ++i) {
    if (lower(tables[i].orig_name) == needle) return static_cast<int>(i);
  }
  return -1;
}

int DatabaseSchema::find_column(int table_index, const std::string& name) const {
  std::string needle = lower(name);
  if (needle == "*") return 0;
  if (table_index >= 0) {
    for (int c : tables.at(table_index).column_indices) {
      if (lower(columns[c].orig_name) == needle) return c;
    }
    return -1;
  }
  for (size_t c = 1; c < columns.size(); ++c) {
    if (lower(columns[c].orig_name) == needle) return static_cast<int>(c);
  }
  return -1;
}

std::vector<DatabaseSchema> parse_schemas(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::MalformedDocument,
         "schema document: " + std::string(e.what()) + " (byte offset " +
             std::to_string(e.byte) + ")");
  }
  if (!doc.is_array()) {
    fail(ErrorKind::MalformedDocument, "schema document: top level must be an array");
  }
  std::vector<DatabaseSchema> schemas;
  std::unordered_set<std::string> seen;
  for (const auto& j : doc) {
    DatabaseSchema schema;
    try {
      schema = schema_from_json(j);
    } catch (const json::exception& e) {
      fail(ErrorKind::MalformedDocument,
           "schema document: " + std::string(e.what()));
    }
    if (!seen.insert(schema.db_id).second) {
      fail(ErrorKind::SchemaValidation,
           "db '" + schema.db_id + "', field 'db_id': duplicate within document");
    }
    validate(schema);
    schemas.push_back(std::move(schema));
  }
  return schemas;
}

std::vector<DatabaseSchema> load_schemas(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schemas(buf.str());
}

std::string serialize_schemas(const std::vector<DatabaseSchema>& schemas) {
  json doc = json::array();
  for (const DatabaseSchema& schema : schemas) {
    json j;
    j["db_id"] = schema.db_id;
    json tables = json::array();
    for (const Table& t : schema.tables) tables.push_back(t.orig_name);
    j["table_names_original"] = tables;
    json cols = json::array();
    json pks = json::array();
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      const Column& col = schema.columns[c];
      cols.push_back(json::array({col.table_index, col.orig_name}));
      if (col.is_primary_key) pks.push_back(static_cast<int>(c));
    }
    j["column_names_original"] = cols;
    j["primary_keys"] = pks;
    json fks = json::array();
    for (const ForeignKey& fk : schema.foreign_keys) {
      fks.push_back(json::array({fk.from_column, fk.to_column}));
    }
    j["foreign_keys"] = fks;
    doc.push_back(std::move(j));
  }
  return doc.dump(2);
}

const DatabaseSchema& find_schema(const std::vector<DatabaseSchema>& schemas,
                                  const std::string& db_id) {
  for (const DatabaseSchema& s : schemas) {
    if (s.db_id == db_id) return s;
  }
  fail(ErrorKind::InputContract, "no schema with db_id '" + db_id + "'");
}

JoinGraph::JoinGraph(int table_count, std::vector<Edge> edges)
    : table_count_(table_count),
      edges_(std::move(edges)),
      adjacency_(table_count) {
  for (size_t i = 0; i < edges_.size(); ++i) {
    adjacency_.at(edges_[i].table_a).push_back(static_cast<int>(i));
    adjacency_.at(edges_[i].table_b).push_back(static_cast<int>(i));
  }
}

bool JoinGraph::shortest_path(int from, int to,
                              std::vector<int>* out_edges) const {
  out_edges->clear();
  if (from == to) return true;
  // BFS; neighbors visited in adjacency order so ties resolve to the
  // smallest foreign-key index.
  std::vector<int> via_edge(table_count_, -1);
  std::vector<int> parent(table_count_, -1);
  std::vector<bool> seen(table_count_, false);
  std::deque<int> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    int at = queue.front();
    queue.pop_front();
    if (at == to) break;
    for (int e : adjacency_[at]) {
      int other = edges_[e].table_a == at ? edges_[e].table_b : edges_[e].table_a;
      if (!seen[other]) {
        seen[other] = true;
        via_edge[other] = e;
        parent[other] = at;
        queue.push_back(other);
      }
    }
  }
  if (!seen[to]) return false;
  for (int at = to; at != from; at = parent[at]) {
    out_edges->push_back(via_edge[at]);
  }
  std::reverse(out_edges->begin(), out_edges->end());
  return true;
}

JoinGraph foreign_key_graph(const DatabaseSchema& schema) {
  std::vector<JoinGraph::Edge> edges;
  for (size_t i = 0; i < schema.foreign_keys.size(); ++i) {
    const ForeignKey& fk = schema.foreign_keys[i];
    edges.push_back(JoinGraph::Edge{schema.table_of_column(fk.from_column),
                                    schema.table_of_column(fk.to_column),
                                    static_cast<int>(i)});
  }
  return JoinGraph(static_cast<int>(schema.tables.size()), std::move(edges));
}

}  // namespace ryansql
