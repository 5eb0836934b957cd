// Command-line front end: decompose | synthesize | preprocess | parse |
// train | predict | evaluate | gradcheck | fuzz.
// JSON results go to stdout, logs to stderr. Exit 0 on success, 1 on bad
// input, 2 on internal failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "ryansql/dataset.hpp"
#include "ryansql/decoder.hpp"
#include "ryansql/encoder.hpp"
#include "ryansql/errors.hpp"
#include "ryansql/evaluate.hpp"
#include "ryansql/gradcheck.hpp"
#include "ryansql/preprocess.hpp"
#include "ryansql/sketch.hpp"
#include "ryansql/sql.hpp"

using namespace ryansql;

namespace {

struct CliConfig {
  EncoderConfig encoder;
  TrainOptions train;
  std::uint64_t word_vector_seed = 7;
  std::string word_vectors;  // optional vector file; empty -> seeded random
  int max_depth = kDefaultMaxSpcDepth;
};

// Desk-scale defaults: the toy-training recipe. A config file overrides
// individual keys.
CliConfig default_config() {
  CliConfig c;
  c.encoder = EncoderConfig::toy();
  c.encoder.d = 64;
  c.train.batch_size = 1;
  return c;
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + out_path);
  out << text << "\n";
}

CliConfig load_config(const std::string& path) {
  CliConfig c = default_config();
  if (path.empty()) return c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedDocument,
         std::string("config is not valid JSON: ") + e.what());
  }
  auto get = [&j](const char* key, auto& slot) {
    if (j.contains(key)) slot = j[key].template get<std::decay_t<decltype(slot)>>();
  };
  get("d1", c.encoder.d1);
  get("d2", c.encoder.d2);
  get("d_p", c.encoder.d_p);
  get("d", c.encoder.d);
  get("dense_growth", c.encoder.dense_growth);
  get("heads", c.encoder.heads);
  get("dropout_rate", c.encoder.dropout_rate);
  get("learning_rate", c.train.learning_rate);
  get("lr_decay", c.train.lr_decay);
  get("decay_interval", c.train.decay_interval);
  get("batch_size", c.train.batch_size);
  get("max_epochs", c.train.max_epochs);
  get("patience", c.train.patience);
  get("seed", c.train.seed);
  get("word_vector_seed", c.word_vector_seed);
  get("word_vectors", c.word_vectors);
  get("max_depth", c.max_depth);
  if (j.contains("optimizer")) {
    std::string name = j["optimizer"].get<std::string>();
    if (name == "adam") c.train.optimizer = OptimizerKind::Adam;
    else if (name == "sgd") c.train.optimizer = OptimizerKind::GradientDescent;
    else fail(ErrorKind::MalformedDocument, "unknown optimizer: " + name);
  }
  return c;
}

nlohmann::json config_to_json(const CliConfig& c) {
  return {
      {"d1", c.encoder.d1},
      {"d2", c.encoder.d2},
      {"d_p", c.encoder.d_p},
      {"d", c.encoder.d},
      {"dense_growth", c.encoder.dense_growth},
      {"heads", c.encoder.heads},
      {"dropout_rate", c.encoder.dropout_rate},
      {"optimizer",
       c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
      {"learning_rate", c.train.learning_rate},
      {"lr_decay", c.train.lr_decay},
      {"decay_interval", c.train.decay_interval},
      {"batch_size", c.train.batch_size},
      {"max_epochs", c.train.max_epochs},
      {"patience", c.train.patience},
      {"seed", c.train.seed},
      {"word_vector_seed", c.word_vector_seed},
      {"word_vectors", c.word_vectors},
      {"max_depth", c.max_depth},
  };
}

Encoder build_encoder(const CliConfig& c) {
  WordVectors words = c.word_vectors.empty()
                          ? random_word_vectors(c.encoder.d1, c.word_vector_seed)
                          : load_word_vectors(c.word_vectors);
  EncoderConfig enc = c.encoder;
  enc.d1 = words.width;
  return Encoder(enc, std::move(words));
}

int schema_index_of(const std::vector<DatabaseSchema>& schemas,
                    const std::string& db_id) {
  for (size_t i = 0; i < schemas.size(); ++i) {
    if (schemas[i].db_id == db_id) return static_cast<int>(i);
  }
  fail(ErrorKind::UnresolvedIdentifier, "no schema with db_id '" + db_id + "'");
}

// Chunked index-parallelism; results keep their slots, so output order is
// deterministic regardless of the thread count.
void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct PreparedData {
  std::vector<SupplementedSchema> schemas;
  std::vector<DatasetExample> rows;
  std::vector<int> schema_of_row;
  std::vector<std::vector<std::string>> questions;
};

PreparedData load_inputs(const std::string& schema_path,
                         const std::string& data_path) {
  PreparedData p;
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  for (const DatabaseSchema& s : schemas) {
    p.schemas.push_back(supplement_column_names(s));
  }
  p.rows = load_dataset(data_path);
  for (const DatasetExample& row : p.rows) {
    p.schema_of_row.push_back(schema_index_of(schemas, row.db_id));
    p.questions.push_back(tokenize_question(row.question));
  }
  return p;
}

int cmd_decompose(const std::string& schema_path, const std::string& db,
                  const std::string& sql, const CliConfig& config) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  const DatabaseSchema& schema = find_schema(schemas, db);
  NonNestedForm nnf = decompose(parse_sql(sql, schema), config.max_depth);
  std::cout << nnf_to_json(nnf, 2) << "\n";
  return 0;
}

int cmd_synthesize(const std::string& schema_path, const std::string& db,
                   const std::string& input) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  const DatabaseSchema& schema = find_schema(schemas, db);
  SelectStatement stmt = synthesize(nnf_from_json(read_file(input)));
  std::cout << print_sql(stmt, schema) << "\n";
  return 0;
}

int cmd_parse(const std::string& schema_path, const std::string& db,
              const std::string& sql) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  const DatabaseSchema& schema = find_schema(schemas, db);
  std::cout << statement_to_json(parse_sql(sql, schema), 2) << "\n";
  return 0;
}

int cmd_preprocess(const std::string& schema_path, const std::string& db,
                   const std::string& sql) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  nlohmann::json out = nlohmann::json::array();
  for (const DatabaseSchema& schema : schemas) {
    if (!db.empty() && schema.db_id != db) continue;
    SupplementedSchema sup = supplement_column_names(schema);
    nlohmann::json cols = nlohmann::json::array();
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      cols.push_back({{"column", schema.columns[c].orig_name},
                      {"table", schema.columns[c].table_index < 0
                                    ? "*"
                                    : schema.table(schema.columns[c].table_index)
                                          .orig_name},
                      {"tokens", sup.scn_tokens[c]}});
    }
    out.push_back({{"db_id", schema.db_id}, {"columns", cols}});
  }
  if (out.empty()) fail(ErrorKind::UnresolvedIdentifier,
                        "no schema with db_id '" + db + "'");

  if (!sql.empty()) {
    if (db.empty()) fail(ErrorKind::InputContract, "--sql needs --db");
    const DatabaseSchema& schema = find_schema(schemas, db);
    SelectStatement stmt = parse_sql(sql, schema);
    SelectStatement filtered = filter_link_tables(stmt, schema);
    SelectStatement recovered = filtered;
    recovered.from_tables =
        recover_link_tables(filtered.from_tables, schema).tables;
    nlohmann::json jtf = {
        {"original", print_sql(stmt, schema)},
        {"filtered", nlohmann::json::parse(statement_to_json(filtered))},
        {"recovered", print_sql(recovered, schema)},
    };
    out = {{"schemas", out}, {"join_table_filtering", jtf}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_train(const std::string& schema_path, const std::string& data_path,
              const std::string& model_path, const CliConfig& config) {
  PreparedData data = load_inputs(schema_path, data_path);

  std::vector<TrainingExample> examples;
  for (size_t i = 0; i < data.rows.size(); ++i) {
    const DatabaseSchema& schema = data.schemas[data.schema_of_row[i]].base;
    SelectStatement stmt = parse_sql(data.rows[i].query, schema);
    SelectStatement filtered = filter_link_tables(stmt, schema);
    NonNestedForm nnf = decompose(filtered, config.max_depth);
    for (auto& [spc, sub] : nnf.entries) {
      examples.push_back({data.questions[i], spc, sub,
                          data.schema_of_row[i]});
    }
  }
  std::cerr << "training on " << examples.size() << " entries from "
            << data.rows.size() << " examples\n";

  Decoder decoder(build_encoder(config));
  ParamStore params(config.train.seed);
  auto t0 = std::chrono::steady_clock::now();
  TrainReport report =
      decoder.train(examples, data.schemas, params, config.train);
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::cerr << "trained " << report.epochs << " epochs in " << elapsed
            << "s, best loss " << report.best_loss << "\n";

  save_checkpoint(params, model_path);
  {
    std::ofstream side(model_path + ".json", std::ios::binary);
    if (!side) fail(ErrorKind::Io, "cannot write file: " + model_path + ".json");
    side << config_to_json(config).dump(2) << "\n";
  }

  nlohmann::json out = {
      {"examples", data.rows.size()},
      {"entries", examples.size()},
      {"epochs", report.epochs},
      {"best_loss", report.best_loss},
      {"epoch_losses", report.epoch_losses},
      {"elapsed_seconds", elapsed},
      {"model", model_path},
  };
  std::cout << out.dump(2) << "\n";
  return 0;
}

CliConfig model_config(const std::string& model_path,
                       const std::string& config_path) {
  std::ifstream side(model_path + ".json", std::ios::binary);
  if (side) return load_config(model_path + ".json");
  return load_config(config_path);
}

int cmd_predict(const std::string& schema_path, const std::string& data_path,
                const std::string& model_path, const std::string& config_path,
                const std::string& out_path, int jobs) {
  CliConfig config = model_config(model_path, config_path);
  PreparedData data = load_inputs(schema_path, data_path);
  Decoder decoder(build_encoder(config));
  ParamStore params = load_checkpoint(model_path);

  // Materialize every parameter up front; the store is read-only afterwards,
  // which keeps the example loop thread-safe.
  std::vector<char> touched(data.schemas.size(), 0);
  for (size_t i = 0; i < data.rows.size(); ++i) {
    int s = data.schema_of_row[i];
    if (!touched[s]) {
      touched[s] = 1;
      decoder.ensure_params(data.questions[i], data.schemas[s], params);
    }
  }

  int n = static_cast<int>(data.rows.size());
  std::vector<nlohmann::json> results(n);
  parallel_for(n, jobs, [&](int i) {
    const SupplementedSchema& schema = data.schemas[data.schema_of_row[i]];
    std::vector<std::string> warnings;
    SelectStatement stmt =
        decoder.generate_statement(data.questions[i], schema, root_spc(),
                                   params, config.max_depth, &warnings);
    results[i] = {
        {"db_id", data.rows[i].db_id},
        {"question", data.rows[i].question},
        {"predicted", print_sql(stmt, schema.base)},
        {"nnf", nlohmann::json::parse(nnf_to_json(decompose(stmt)))},
        {"warnings", warnings},
    };
  });

  nlohmann::json out = nlohmann::json::array();
  for (nlohmann::json& r : results) out.push_back(std::move(r));
  write_output(out_path, out.dump(2));
  return 0;
}

int cmd_evaluate(const std::string& schema_path, const std::string& gold_path,
                 const std::string& pred_path, int jobs, bool loose_values) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  std::vector<DatasetExample> gold = load_dataset(gold_path);

  nlohmann::json pred_doc;
  try {
    pred_doc = nlohmann::json::parse(read_file(pred_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedDocument,
         std::string("predictions are not valid JSON: ") + e.what());
  }
  if (!pred_doc.is_array()) {
    fail(ErrorKind::MalformedDocument, "predictions must be a JSON array");
  }
  if (pred_doc.size() != gold.size()) {
    fail(ErrorKind::Alignment,
         "prediction/gold mismatch: " + std::to_string(pred_doc.size()) +
             " predictions vs " + std::to_string(gold.size()) + " gold queries");
  }

  int n = static_cast<int>(gold.size());
  std::vector<SelectStatement> gold_asts(n), pred_asts(n);
  std::atomic<int> unparseable{0};
  parallel_for(n, jobs, [&](int i) {
    const nlohmann::json& p = pred_doc[i];
    std::string db = p.contains("db_id") ? p["db_id"].get<std::string>()
                                         : gold[i].db_id;
    if (db != gold[i].db_id) {
      fail(ErrorKind::Alignment,
           "entry " + std::to_string(i) + ": prediction is for db '" + db +
               "' but gold is for '" + gold[i].db_id + "'");
    }
    const DatabaseSchema& schema = find_schema(schemas, db);
    gold_asts[i] = parse_sql(gold[i].query, schema);
    std::string text;
    if (p.contains("predicted")) text = p["predicted"].get<std::string>();
    else if (p.contains("query")) text = p["query"].get<std::string>();
    else fail(ErrorKind::MalformedDocument,
              "prediction entry " + std::to_string(i) +
                  " has neither 'predicted' nor 'query'");
    try {
      pred_asts[i] = parse_sql(text, schema);
    } catch (const Error&) {
      // scored as a miss: the empty statement never matches a valid one
      ++unparseable;
    }
  });
  if (unparseable > 0) {
    std::cerr << unparseable << " predictions did not parse\n";
  }

  MatchOptions options;
  options.compare_values = !loose_values;
  CorpusMetrics metrics = evaluate_corpus(pred_asts, gold_asts, options);
  std::cerr << metrics_table(metrics);
  std::cout << metrics_to_json(metrics, 2) << "\n";
  return 0;
}

int cmd_gradcheck() {
  std::vector<GradCheckEntry> entries = gradient_suite(20);
  nlohmann::json out = nlohmann::json::array();
  bool ok = true;
  for (const GradCheckEntry& e : entries) {
    out.push_back({{"op", e.name}, {"max_rel_error", e.max_rel_error}});
    ok = ok && e.max_rel_error < 1e-4;
  }
  std::cout << out.dump(2) << "\n";
  if (!ok) {
    std::cerr << "gradient check failed: at least one op >= 1e-4\n";
    return 2;
  }
  return 0;
}

int cmd_fuzz(const std::string& schema_path, const std::string& db,
             std::uint64_t seed, const std::string& out_path,
             const CliConfig& config) {
  std::vector<DatabaseSchema> schemas = load_schemas(schema_path);
  const DatabaseSchema& schema = find_schema(schemas, db);
  SelectStatement stmt =
      fuzz_generate(schema, seed, std::min(config.max_depth, 3));
  write_output(out_path, print_sql(stmt, schema));
  return 0;
}

bool input_side_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Divergence:
    case ErrorKind::NumericInstability:
      return false;  // internal
    default:
      return true;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketch-based text-to-SQL toolkit"};
  app.require_subcommand(1);

  std::string schema_path, db, sql, input = "-", data_path, gold_path,
              pred_path, model_path, config_path, out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  bool loose_values = false;

  auto add_common = [&](CLI::App* cmd, bool needs_schema) {
    auto* opt = cmd->add_option("--schema", schema_path, "schema JSON file");
    if (needs_schema) opt->required();
    cmd->add_option("--config", config_path, "config JSON file");
  };

  CLI::App* c_decompose = app.add_subcommand(
      "decompose", "flatten a nested query into position-coded statements");
  add_common(c_decompose, true);
  c_decompose->add_option("--db", db, "database id")->required();
  c_decompose->add_option("--sql", sql, "SQL text")->required();

  CLI::App* c_synthesize = app.add_subcommand(
      "synthesize", "reassemble SQL from a decomposed form");
  add_common(c_synthesize, true);
  c_synthesize->add_option("--db", db, "database id")->required();
  c_synthesize->add_option("--input", input, "decomposed JSON file ('-' stdin)");

  CLI::App* c_preprocess = app.add_subcommand(
      "preprocess", "supplemented column names; with --sql, join-table filtering");
  add_common(c_preprocess, true);
  c_preprocess->add_option("--db", db, "database id");
  c_preprocess->add_option("--sql", sql, "SQL text");

  CLI::App* c_parse = app.add_subcommand("parse", "SQL text to statement JSON");
  add_common(c_parse, true);
  c_parse->add_option("--db", db, "database id")->required();
  c_parse->add_option("--sql", sql, "SQL text")->required();

  CLI::App* c_train = app.add_subcommand("train", "fit a model on a dataset");
  add_common(c_train, true);
  c_train->add_option("--data", data_path, "dataset JSON file")->required();
  c_train->add_option("--model", model_path, "checkpoint output path")
      ->required();
  c_train->add_option("--seed", seed, "training seed override")
      ->each([&seed_given](const std::string&) { seed_given = true; });

  CLI::App* c_predict = app.add_subcommand("predict", "decode SQL for questions");
  add_common(c_predict, true);
  c_predict->add_option("--data", data_path, "dataset JSON file")->required();
  c_predict->add_option("--model", model_path, "checkpoint path")->required();
  c_predict->add_option("--out", out_path, "output file (default stdout)");
  c_predict->add_option("--jobs", jobs, "parallel workers");

  CLI::App* c_evaluate = app.add_subcommand("evaluate", "exact-match metrics");
  add_common(c_evaluate, true);
  c_evaluate->add_option("--gold", gold_path, "gold dataset JSON")->required();
  c_evaluate->add_option("--pred", pred_path, "predictions JSON")->required();
  c_evaluate->add_option("--jobs", jobs, "parallel workers");
  c_evaluate->add_flag("--loose-values", loose_values,
                       "ignore literal values when matching");

  CLI::App* c_gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every differentiable op");
  (void)c_gradcheck;

  CLI::App* c_fuzz = app.add_subcommand("fuzz", "random valid query for a schema");
  add_common(c_fuzz, true);
  c_fuzz->add_option("--db", db, "database id")->required();
  c_fuzz->add_option("--seed", seed, "generator seed");
  c_fuzz->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CliConfig config = load_config(config_path);
    if (seed_given) config.train.seed = seed;
    if (c_decompose->parsed()) return cmd_decompose(schema_path, db, sql, config);
    if (c_synthesize->parsed()) return cmd_synthesize(schema_path, db, input);
    if (c_preprocess->parsed()) return cmd_preprocess(schema_path, db, sql);
    if (c_parse->parsed()) return cmd_parse(schema_path, db, sql);
    if (c_train->parsed())
      return cmd_train(schema_path, data_path, model_path, config);
    if (c_predict->parsed())
      return cmd_predict(schema_path, data_path, model_path, config_path,
                         out_path, jobs);
    if (c_evaluate->parsed())
      return cmd_evaluate(schema_path, gold_path, pred_path, jobs, loose_values);
    if (c_gradcheck->parsed()) return cmd_gradcheck();
    if (c_fuzz->parsed()) return cmd_fuzz(schema_path, db, seed, out_path, config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return input_side_error(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
