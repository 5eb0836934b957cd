#include "ryansql/encoder.hpp"

#include <fstream>
#include <sstream>

namespace ryansql {

Tensor WordVectors::lookup(const std::string& token) const {
  auto it = vectors.find(token);
  if (it != vectors.end()) return it->second;
  if (!random_fallback) return Tensor(1, width);  // unknown word -> zero vector
  std::mt19937_64 rng(mix_seed(seed, "word:" + token));
  return random_tensor(1, width, 1.0 / std::sqrt(static_cast<double>(width)), rng);
}

WordVectors load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open word-vector file `" + path + "`");
  WordVectors out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (token.empty() || values.empty() || !fields.eof())
      fail(ErrorKind::MalformedDocument,
           "bad word-vector line " + std::to_string(line_no) + " in `" + path + "`");
    if (out.width == 0) out.width = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.width)
      fail(ErrorKind::MalformedDocument,
           "word-vector width changes at line " + std::to_string(line_no));
    Tensor t(1, out.width);
    t.data = std::move(values);
    out.vectors.emplace(std::move(token), std::move(t));
  }
  if (out.vectors.empty())
    fail(ErrorKind::MalformedDocument, "word-vector file `" + path + "` is empty");
  return out;
}

WordVectors random_word_vectors(int width, std::uint64_t seed) {
  if (width <= 0) fail(ErrorKind::InputContract, "word-vector width must be positive");
  WordVectors out;
  out.width = width;
  out.random_fallback = true;
  out.seed = seed;
  return out;
}

EncoderConfig EncoderConfig::toy() {
  EncoderConfig c;
  c.d1 = 32;
  c.d2 = 16;
  c.d_p = 16;
  c.d = 32;
  c.dense_growth = 16;
  c.heads = 4;
  return c;
}

int char_row(unsigned char c) { return (c >= 0x20 && c <= 0x7e) ? c - 0x20 : 95; }

Encoder::Encoder(EncoderConfig config, WordVectors words)
    : config_(config), words_(std::move(words)) {
  if (config_.d2 <= 0 || config_.d_p <= 0 || config_.d <= 0 ||
      config_.dense_growth <= 0 || config_.heads <= 0)
    fail(ErrorKind::InputContract, "encoder dimensions must be positive");
  if (words_.width <= 0)
    fail(ErrorKind::InputContract, "word vectors have no width");
  config_.d1 = words_.width;  // a loaded vector file fixes d1
}

Var Encoder::embed_word(const std::string& token, ParamStore& params) const {
  if (token.empty()) fail(ErrorKind::InputContract, "cannot embed an empty token");
  Var word = make_var(words_.lookup(token));
  Var char_table = params.get("embed.chars", 96, config_.d2);
  std::vector<int> rows;
  rows.reserve(token.size());
  for (unsigned char c : token) rows.push_back(char_row(c));
  Var char_vec = maxpool_rows(gather_rows(char_table, rows));
  Var joined = concat_cols({word, char_vec});
  int width = config_.d1 + config_.d2;
  return highway(joined, params.get("embed.highway.wt", width, width),
                 params.get_const("embed.highway.bt", 1, width, 0.0),
                 params.get("embed.highway.wh", width, width),
                 params.get_const("embed.highway.bh", 1, width, 0.0));
}

Var Encoder::encode_spc(const StatementPositionCode& spc, ParamStore& params) const {
  if (spc.elements.empty()) fail(ErrorKind::InputContract, "empty statement position code");
  Var table = params.get("embed.spc", 7, config_.d_p);
  std::vector<int> rows;
  rows.reserve(spc.elements.size());
  for (SpcElement e : spc.elements) rows.push_back(static_cast<int>(e));
  Var conv = conv1d_k3(gather_rows(table, rows),
                       params.get("spc.conv.kernel", 3 * config_.d_p, config_.d_p),
                       params.get_const("spc.conv.bias", 1, config_.d_p, 0.0));
  return maxpool_rows(conv);
}

EncoderOutputs Encoder::encode_inputs(const std::vector<std::string>& question,
                                      const SupplementedSchema& schema,
                                      const StatementPositionCode& spc,
                                      ParamStore& params, bool training,
                                      std::mt19937_64& rng) const {
  if (question.empty()) fail(ErrorKind::InputContract, "cannot encode an empty question");
  if (schema.base.tables.empty()) fail(ErrorKind::InputContract, "cannot encode an empty schema");
  int d = config_.d;

  Var v_p = encode_spc(spc, params);

  // Every word sequence gets v_P appended so the dense convolution stack can
  // be shared across question, column and table-name words.
  auto embed_sequence = [&](const std::vector<std::string>& tokens) {
    std::vector<Var> rows;
    rows.reserve(tokens.size());
    for (const std::string& t : tokens) rows.push_back(embed_word(t, params));
    Var stacked = concat_rows(rows);
    return concat_cols({stacked, tile_rows(v_p, stacked->value.rows)});
  };
  auto encode_sequence = [&](const std::vector<std::string>& tokens) {
    return dense_cnn_block(embed_sequence(tokens), params, "encode.cnn",
                           config_.dense_growth, d);
  };

  Var question_words = layer_norm_rows(
      encode_sequence(question), params.get_const("encode.q.ln.gain", 1, d, 1.0),
      params.get_const("encode.q.ln.bias", 1, d, 0.0));
  question_words = dropout(question_words, config_.dropout_rate, training, rng);

  // Table-name representation: max-pool over the name's word encodings.
  std::vector<Var> table_names;
  table_names.reserve(schema.base.tables.size());
  for (const Table& t : schema.base.tables)
    table_names.push_back(maxpool_rows(encode_sequence(t.name_tokens)));

  std::vector<Var> column_rows;
  column_rows.reserve(schema.scn_tokens.size());
  for (std::size_t c = 0; c < schema.scn_tokens.size(); ++c) {
    Var pooled = maxpool_rows(encode_sequence(schema.scn_tokens[c]));
    int owner = schema.base.columns[c].table_index;
    Var name_rep = owner >= 0 ? table_names[owner] : make_var(Tensor(1, d));
    Var joined = concat_cols({pooled, name_rep});
    column_rows.push_back(add(matmul(joined, params.get("encode.col.proj.weight", 2 * d, d)),
                              params.get_const("encode.col.proj.bias", 1, d, 0.0)));
  }
  Var hidden_columns = layer_norm_rows(
      concat_rows(column_rows), params.get_const("encode.c.ln.gain", 1, d, 1.0),
      params.get_const("encode.c.ln.bias", 1, d, 0.0));
  hidden_columns = dropout(hidden_columns, config_.dropout_rate, training, rng);

  // Question-column alignment: attend, fuse, then one transformer layer.
  Var attended_c = scaled_dot_attention(hidden_columns, question_words);
  Var fused_c = fusion(attended_c, hidden_columns,
                       params.get("align.qc.fuse.wr", 4 * d, d),
                       params.get("align.qc.fuse.wg", 4 * d, d));
  Var columns = transformer_layer(fused_c, params, "align.qc.tf", config_.heads);

  // Table encoder: attention summary over each table's own columns.
  Var table_fs_w1 = params.get("table.fs.w1", d, d);
  Var table_fs_w2 = params.get("table.fs.w2", 1, d);
  std::vector<Var> table_rows;
  table_rows.reserve(schema.base.tables.size());
  for (const Table& t : schema.base.tables) {
    if (t.column_indices.empty())
      fail(ErrorKind::InputContract,
           "table `" + t.orig_name + "` has no columns to encode");
    table_rows.push_back(
        self_attend(gather_rows(columns, t.column_indices), table_fs_w1, table_fs_w2));
  }
  Var hidden_tables = concat_rows(table_rows);

  // Question-table alignment mirrors the question-column layer.
  Var attended_t = scaled_dot_attention(hidden_tables, question_words);
  Var fused_t = fusion(attended_t, hidden_tables,
                       params.get("align.qt.fuse.wr", 4 * d, d),
                       params.get("align.qt.fuse.wg", 4 * d, d));
  Var tables = transformer_layer(fused_t, params, "align.qt.tf", config_.heads);

  EncoderOutputs out;
  out.question_words = question_words;
  out.columns = columns;
  out.tables = tables;
  out.spc = v_p;
  out.question = self_attend(question_words, params.get("question.fs.w1", d, d),
                             params.get("question.fs.w2", 1, d));
  out.schema = self_attend(columns, params.get("schema.fs.w1", d, d),
                           params.get("schema.fs.w2", 1, d));
  return out;
}

EncoderOutputs Encoder::encode_inputs(const std::vector<std::string>& question,
                                      const SupplementedSchema& schema,
                                      const StatementPositionCode& spc,
                                      ParamStore& params) const {
  std::mt19937_64 rng(0);
  return encode_inputs(question, schema, spc, params, false, rng);
}

}  // namespace ryansql
