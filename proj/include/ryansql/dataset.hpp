#pragma once

#include <string>
#include <vector>

#include "ryansql/schema.hpp"

namespace ryansql {

/// One question/query pair; the shared fields of the Spider example files,
/// so real train/dev files load unmodified.
struct DatasetExample {
  std::string db_id;
  std::string question;
  std::string query;
};

std::vector<DatasetExample> parse_dataset(const std::string& json_text);
std::vector<DatasetExample> load_dataset(const std::string& path);
std::string serialize_dataset(const std::vector<DatasetExample>& examples,
                              int indent = 2);

/// Lowercases and splits into [a-z0-9]+ runs; a '.' flanked by digits stays
/// inside its token so decimals survive ("costs 3.5?" -> costs, 3.5).
std::vector<std::string> tokenize_question(const std::string& text);

/// Deterministic 64-pair training corpus over two small schemas. Questions
/// are template-generated with one wording per sketch slot, and every
/// condition literal appears verbatim as a question token.
struct ToyCorpus {
  std::vector<DatabaseSchema> schemas;
  std::vector<DatasetExample> examples;
};

ToyCorpus toy_corpus();

}  // namespace ryansql
