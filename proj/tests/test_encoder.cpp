#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "ryansql/encoder.hpp"

using namespace ryansql;

// Straight-line recomputation of the encoder pipeline with plain loops,
// reading the same parameter values from the store. Any wiring difference
// between this and the graph implementation is a bug in one of them.
namespace oracle {

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, b.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < b.cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(r, k) * b.at(k, c);
      out.at(r, c) = acc;
    }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) out.at(r, c) += b.rows == 1 ? b.at(0, c) : b.at(r, c);
  return out;
}

Tensor map(const Tensor& a, double (*fn)(double)) {
  Tensor out = a;
  for (double& v : out.data) v = fn(v);
  return out;
}

double relu_s(double v) { return v > 0 ? v : 0; }
double sigmoid_s(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) out.at(c, r) = a.at(r, c);
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out = a;
  for (int r = 0; r < a.rows; ++r) {
    double m = out.at(r, 0);
    for (int c = 1; c < a.cols; ++c) m = std::max(m, out.at(r, c));
    double total = 0.0;
    for (int c = 0; c < a.cols; ++c) total += (out.at(r, c) = std::exp(out.at(r, c) - m));
    for (int c = 0; c < a.cols; ++c) out.at(r, c) /= total;
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  int cols = 0;
  for (const Tensor& p : parts) cols += p.cols;
  Tensor out(parts[0].rows, cols);
  int base = 0;
  for (const Tensor& p : parts) {
    for (int r = 0; r < p.rows; ++r)
      for (int c = 0; c < p.cols; ++c) out.at(r, base + c) = p.at(r, c);
    base += p.cols;
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  int rows = 0;
  for (const Tensor& p : parts) rows += p.rows;
  Tensor out(rows, parts[0].cols);
  int base = 0;
  for (const Tensor& p : parts) {
    for (int r = 0; r < p.rows; ++r)
      for (int c = 0; c < p.cols; ++c) out.at(base + r, c) = p.at(r, c);
    base += p.rows;
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
  Tensor out(a.rows, end - begin);
  for (int r = 0; r < a.rows; ++r)
    for (int c = begin; c < end; ++c) out.at(r, c - begin) = a.at(r, c);
  return out;
}

Tensor maxpool(const Tensor& a) {
  Tensor out(1, a.cols);
  for (int c = 0; c < a.cols; ++c) {
    double best = a.at(0, c);
    for (int r = 1; r < a.rows; ++r) best = std::max(best, a.at(r, c));
    out.at(0, c) = best;
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  Tensor out = x;
  for (int r = 0; r < x.rows; ++r) {
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < x.cols; ++c) mean += x.at(r, c);
    mean /= x.cols;
    for (int c = 0; c < x.cols; ++c) var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
    var /= x.cols;
    double sigma = std::sqrt(var + 1e-5);
    for (int c = 0; c < x.cols; ++c)
      out.at(r, c) = gain.at(0, c) * (x.at(r, c) - mean) / sigma + bias.at(0, c);
  }
  return out;
}

Tensor conv3(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  Tensor out(x.rows, kernel.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < kernel.cols; ++c) {
      double acc = bias.at(0, c);
      for (int k = -1; k <= 1; ++k) {
        int src = r + k;
        if (src < 0 || src >= x.rows) continue;
        for (int j = 0; j < x.cols; ++j)
          acc += x.at(src, j) * kernel.at((k + 1) * x.cols + j, c);
      }
      out.at(r, c) = acc;
    }
  return out;
}

Tensor highway(const Tensor& x, const Tensor& wt, const Tensor& bt,
               const Tensor& wh, const Tensor& bh) {
  Tensor gate = map(add(matmul(x, wt), bt), sigmoid_s);
  Tensor cand = map(add(matmul(x, wh), bh), relu_s);
  Tensor out = x;
  for (int i = 0; i < out.size(); ++i)
    out.data[i] = gate.data[i] * cand.data[i] + (1.0 - gate.data[i]) * x.data[i];
  return out;
}

Tensor fs(const Tensor& m, const Tensor& w1, const Tensor& w2) {
  Tensor scores = softmax_rows(matmul(w2, map(matmul(w1, transpose(m)), [](double v) {
                                        return std::tanh(v);
                                      })));
  return matmul(scores, m);
}

Tensor sdot(const Tensor& h, const Tensor& v) {
  Tensor scores = matmul(h, transpose(v));
  for (double& s : scores.data) s /= std::sqrt(static_cast<double>(v.cols));
  return matmul(softmax_rows(scores), v);
}

Tensor fusion(const Tensor& x, const Tensor& y, const Tensor& wr, const Tensor& wg) {
  Tensor prod = x, diff = x;
  for (int i = 0; i < x.size(); ++i) {
    prod.data[i] = x.data[i] * y.data[i];
    diff.data[i] = x.data[i] - y.data[i];
  }
  Tensor cat = concat_cols({x, y, prod, diff});
  Tensor cand = map(matmul(cat, wr), relu_s);
  Tensor gate = map(matmul(cat, wg), sigmoid_s);
  Tensor out = x;
  for (int i = 0; i < x.size(); ++i)
    out.data[i] = gate.data[i] * cand.data[i] + (1.0 - gate.data[i]) * x.data[i];
  return out;
}

Tensor transformer(const Tensor& x, ParamStore& p, const std::string& prefix, int heads) {
  int d = x.cols, hd = d / heads;
  Tensor q = matmul(x, p.at(prefix + ".wq")->value);
  Tensor k = matmul(x, p.at(prefix + ".wk")->value);
  Tensor v = matmul(x, p.at(prefix + ".wv")->value);
  std::vector<Tensor> outs;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
    Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
    Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
    Tensor scores = matmul(qh, transpose(kh));
    for (double& s : scores.data) s /= std::sqrt(static_cast<double>(hd));
    outs.push_back(matmul(softmax_rows(scores), vh));
  }
  Tensor att = matmul(concat_cols(outs), p.at(prefix + ".wo")->value);
  Tensor h1 = layer_norm(add(x, att), p.at(prefix + ".ln1.gain")->value,
                         p.at(prefix + ".ln1.bias")->value);
  Tensor inner = map(add(matmul(h1, p.at(prefix + ".ff1.weight")->value),
                         p.at(prefix + ".ff1.bias")->value),
                     relu_s);
  Tensor ff = add(matmul(inner, p.at(prefix + ".ff2.weight")->value),
                  p.at(prefix + ".ff2.bias")->value);
  return layer_norm(add(h1, ff), p.at(prefix + ".ln2.gain")->value,
                    p.at(prefix + ".ln2.bias")->value);
}

Tensor dcnn(const Tensor& x, ParamStore& p, const std::string& prefix) {
  Tensor c1 = map(conv3(x, p.at(prefix + ".conv1.kernel")->value,
                        p.at(prefix + ".conv1.bias")->value),
                  relu_s);
  Tensor h1 = concat_cols({x, c1});
  Tensor c2 = map(conv3(h1, p.at(prefix + ".conv2.kernel")->value,
                        p.at(prefix + ".conv2.bias")->value),
                  relu_s);
  Tensor h2 = concat_cols({h1, c2});
  return add(matmul(h2, p.at(prefix + ".proj.weight")->value),
             p.at(prefix + ".proj.bias")->value);
}

Tensor embed(const Encoder& enc, ParamStore& p, const std::string& token) {
  Tensor word = enc.words().lookup(token);
  const Tensor& chars = p.at("embed.chars")->value;
  Tensor picked(static_cast<int>(token.size()), chars.cols);
  for (std::size_t i = 0; i < token.size(); ++i)
    for (int c = 0; c < chars.cols; ++c)
      picked.at(static_cast<int>(i), c) =
          chars.at(char_row(static_cast<unsigned char>(token[i])), c);
  Tensor joined = concat_cols({word, maxpool(picked)});
  return highway(joined, p.at("embed.highway.wt")->value, p.at("embed.highway.bt")->value,
                 p.at("embed.highway.wh")->value, p.at("embed.highway.bh")->value);
}

Tensor spc_vector(const Encoder& enc, ParamStore& p, const StatementPositionCode& spc) {
  const Tensor& table = p.at("embed.spc")->value;
  Tensor seq(static_cast<int>(spc.elements.size()), table.cols);
  for (std::size_t i = 0; i < spc.elements.size(); ++i)
    for (int c = 0; c < table.cols; ++c)
      seq.at(static_cast<int>(i), c) = table.at(static_cast<int>(spc.elements[i]), c);
  (void)enc;
  return maxpool(conv3(seq, p.at("spc.conv.kernel")->value, p.at("spc.conv.bias")->value));
}

}  // namespace oracle

namespace {

void check_close(const Tensor& got, const Tensor& want, double tol = 1e-9) {
  REQUIRE(got.rows == want.rows);
  REQUIRE(got.cols == want.cols);
  for (int i = 0; i < got.size(); ++i)
    CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(tol).scale(1.0));
}

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d1 = 3;
  c.d2 = 2;
  c.d_p = 3;
  c.d = 4;
  c.dense_growth = 2;
  c.heads = 2;
  return c;
}

SupplementedSchema one_table_schema() {
  DatabaseSchema s = parse_schemas(R"([
    {"db_id":"shows","table_names_original":["shows"],
     "column_names_original":[[-1,"*"],[0,"name"]]}
  ])").at(0);
  return supplement_column_names(s);
}

}  // namespace

TEST_CASE("word vector files load and miss to zero") {
  std::string path = "encoder_vectors_test.txt";
  std::ofstream(path) << "alpha 1 2 3\nbeta 4 5 6\n\n";
  WordVectors w = load_word_vectors(path);
  CHECK(w.width == 3);
  CHECK(w.lookup("beta").data == std::vector<double>{4, 5, 6});
  CHECK(w.lookup("gamma").data == std::vector<double>{0, 0, 0});
  std::remove(path.c_str());

  std::ofstream(path) << "alpha 1 2 3\nbeta 4 5\n";
  CHECK(fixtures::thrown_kind([&] { load_word_vectors(path); }) == ErrorKind::MalformedDocument);
  std::ofstream(path, std::ios::trunc) << "alpha one two\n";
  CHECK(fixtures::thrown_kind([&] { load_word_vectors(path); }) == ErrorKind::MalformedDocument);
  std::remove(path.c_str());
  CHECK(fixtures::thrown_kind([] { load_word_vectors("missing_vectors.txt"); }) == ErrorKind::Io);
}

TEST_CASE("random word vectors are deterministic per token") {
  WordVectors a = random_word_vectors(8, 3);
  WordVectors b = random_word_vectors(8, 3);
  CHECK(a.lookup("city").data == b.lookup("city").data);
  CHECK(a.lookup("city").data != a.lookup("town").data);
  CHECK(a.lookup("city").cols == 8);
  CHECK(random_word_vectors(8, 4).lookup("city").data != a.lookup("city").data);
}

TEST_CASE("word embedding concatenates word and character-max parts") {
  WordVectors words;
  words.width = 1;  // zero vector for every token
  Encoder enc(tiny_config(), words);
  ParamStore params(0);
  // Pin the character table and make the highway pass its input through.
  Tensor chars(96, 2);
  chars.at(char_row('a'), 0) = 1;
  chars.at(char_row('a'), 1) = -2;
  chars.at(char_row('b'), 0) = 0;
  chars.at(char_row('b'), 1) = 3;
  params.put("embed.chars", chars);
  params.put("embed.highway.wt", Tensor(3, 3));
  params.put("embed.highway.bt", Tensor(1, 3, -40.0));
  params.put("embed.highway.wh", Tensor(3, 3));
  params.put("embed.highway.bh", Tensor(1, 3));

  Tensor out = enc.embed_word("ab", params)->value;
  REQUIRE(out.cols == 3);  // d1 + d2
  CHECK(out.at(0, 0) == doctest::Approx(0.0));
  CHECK(out.at(0, 1) == doctest::Approx(1.0));  // max(1, 0)
  CHECK(out.at(0, 2) == doctest::Approx(3.0));  // max(-2, 3)

  // A single-character word's character part is that character's vector.
  Tensor single = enc.embed_word("b", params)->value;
  CHECK(single.at(0, 1) == doctest::Approx(0.0));
  CHECK(single.at(0, 2) == doctest::Approx(3.0));

  CHECK(fixtures::thrown_kind([&] { enc.embed_word("", params); }) == ErrorKind::InputContract);
}

TEST_CASE("statement position encoding is fixed-length and oracle-exact") {
  Encoder enc(tiny_config(), random_word_vectors(3, 1));
  ParamStore params(11);
  Var root = enc.encode_spc(root_spc(), params);
  Var deep = enc.encode_spc(spc_from_strings({"WHERE", "UNION"}), params);
  CHECK(root->value.rows == 1);
  CHECK(root->value.cols == 3);
  CHECK(deep->value.cols == 3);
  CHECK(root->value.data != deep->value.data);

  check_close(deep->value, oracle::spc_vector(enc, params, spc_from_strings({"WHERE", "UNION"})));
  check_close(root->value, oracle::spc_vector(enc, params, root_spc()));
}

TEST_CASE("encoder output shapes follow question, column and table counts") {
  Encoder enc(EncoderConfig::toy(), random_word_vectors(16, 2));
  ParamStore params(3);
  SupplementedSchema schema = supplement_column_names(fixtures::tv_schema());
  std::vector<std::string> question = {"what", "is", "the", "series", "name"};
  EncoderOutputs out = enc.encode_inputs(question, schema, root_spc(), params);
  int d = enc.config().d;
  CHECK(out.question_words->value.rows == 5);
  CHECK(out.question_words->value.cols == d);
  CHECK(out.columns->value.rows == static_cast<int>(schema.scn_tokens.size()));
  CHECK(out.columns->value.cols == d);
  CHECK(out.tables->value.rows == 3);
  CHECK(out.tables->value.cols == d);
  CHECK(out.spc->value.rows == 1);
  CHECK(out.question->value.cols == d);
  CHECK(out.schema->value.cols == d);

  CHECK(fixtures::thrown_kind([&] {
          enc.encode_inputs({}, schema, root_spc(), params);
        }) == ErrorKind::InputContract);
  CHECK(fixtures::thrown_kind([&] {
          enc.encode_inputs(question, SupplementedSchema{}, root_spc(), params);
        }) == ErrorKind::InputContract);
}

TEST_CASE("full pipeline matches an independent straight-line recomputation") {
  WordVectors words;
  words.width = 3;
  words.vectors.emplace("show", Tensor::from({{0.2, -1.0, 0.4}}));
  words.vectors.emplace("names", Tensor::from({{1.1, 0.3, -0.7}}));
  Encoder enc(tiny_config(), words);
  ParamStore params(17);
  SupplementedSchema schema = one_table_schema();
  std::vector<std::string> question = {"show", "names"};
  StatementPositionCode spc = spc_from_strings({"WHERE"});

  EncoderOutputs got = enc.encode_inputs(question, schema, spc, params);

  // Embedding and embedding-encoder layers.
  Tensor v_p = oracle::spc_vector(enc, params, spc);
  auto sequence = [&](const std::vector<std::string>& tokens) {
    std::vector<Tensor> rows;
    for (const std::string& t : tokens) rows.push_back(oracle::embed(enc, params, t));
    Tensor stacked = oracle::concat_rows(rows);
    Tensor tiled(stacked.rows, v_p.cols);
    for (int r = 0; r < stacked.rows; ++r)
      for (int c = 0; c < v_p.cols; ++c) tiled.at(r, c) = v_p.at(0, c);
    return oracle::dcnn(oracle::concat_cols({stacked, tiled}), params, "encode.cnn");
  };
  Tensor v_q_words = oracle::layer_norm(sequence(question),
                                        params.at("encode.q.ln.gain")->value,
                                        params.at("encode.q.ln.bias")->value);
  Tensor table_rep = oracle::maxpool(sequence(schema.base.tables[0].name_tokens));
  std::vector<Tensor> col_rows;
  for (std::size_t c = 0; c < schema.scn_tokens.size(); ++c) {
    Tensor pooled = oracle::maxpool(sequence(schema.scn_tokens[c]));
    Tensor rep = schema.base.columns[c].table_index >= 0 ? table_rep : Tensor(1, 4);
    col_rows.push_back(oracle::add(
        oracle::matmul(oracle::concat_cols({pooled, rep}),
                       params.at("encode.col.proj.weight")->value),
        params.at("encode.col.proj.bias")->value));
  }
  Tensor h_c = oracle::layer_norm(oracle::concat_rows(col_rows),
                                  params.at("encode.c.ln.gain")->value,
                                  params.at("encode.c.ln.bias")->value);

  // Question-column alignment: attention, fusion, transformer.
  Tensor a_qc = oracle::sdot(h_c, v_q_words);
  Tensor f_c = oracle::fusion(a_qc, h_c, params.at("align.qc.fuse.wr")->value,
                              params.at("align.qc.fuse.wg")->value);
  Tensor v_c = oracle::transformer(f_c, params, "align.qc.tf", 2);

  // Table encoder: summary of each table's own column rows.
  Tensor owned(1, 4);
  for (int c = 0; c < 4; ++c) owned.at(0, c) = v_c.at(1, c);  // only real column
  Tensor h_t = oracle::fs(owned, params.at("table.fs.w1")->value,
                          params.at("table.fs.w2")->value);
  // A single-row summary is that row itself.
  check_close(h_t, owned);

  // Question-table alignment and final summaries.
  Tensor a_qt = oracle::sdot(h_t, v_q_words);
  Tensor f_t = oracle::fusion(a_qt, h_t, params.at("align.qt.fuse.wr")->value,
                              params.at("align.qt.fuse.wg")->value);
  Tensor v_t = oracle::transformer(f_t, params, "align.qt.tf", 2);
  Tensor v_q = oracle::fs(v_q_words, params.at("question.fs.w1")->value,
                          params.at("question.fs.w2")->value);
  Tensor v_d = oracle::fs(v_c, params.at("schema.fs.w1")->value,
                          params.at("schema.fs.w2")->value);

  check_close(got.spc->value, v_p);
  check_close(got.question_words->value, v_q_words);
  check_close(got.columns->value, v_c);
  check_close(got.tables->value, v_t);
  check_close(got.question->value, v_q);
  check_close(got.schema->value, v_d);
}

TEST_CASE("changing the statement position changes the outputs") {
  Encoder enc(tiny_config(), random_word_vectors(3, 9));
  ParamStore params(23);
  SupplementedSchema schema = one_table_schema();
  std::vector<std::string> question = {"show", "names"};
  EncoderOutputs at_root = enc.encode_inputs(question, schema, root_spc(), params);
  EncoderOutputs in_where =
      enc.encode_inputs(question, schema, spc_from_strings({"WHERE"}), params);
  CHECK(at_root.spc->value.data != in_where.spc->value.data);
  CHECK(at_root.columns->value.data != in_where.columns->value.data);
  CHECK(at_root.question->value.data != in_where.question->value.data);
}

TEST_CASE("permuting columns permutes the column rows and keeps the summary") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg, random_word_vectors(3, 5));
  DatabaseSchema forward = parse_schemas(R"([
    {"db_id":"p","table_names_original":["airports"],
     "column_names_original":[[-1,"*"],[0,"city"],[0,"airport_name"],[0,"country"]]}
  ])").at(0);
  DatabaseSchema shuffled = parse_schemas(R"([
    {"db_id":"p","table_names_original":["airports"],
     "column_names_original":[[-1,"*"],[0,"country"],[0,"city"],[0,"airport_name"]]}
  ])").at(0);
  // Row in `shuffled` -> row in `forward`.
  std::vector<int> where = {0, 3, 1, 2};

  std::vector<std::string> question = {"which", "city"};
  ParamStore params_a(31);
  ParamStore params_b(31);
  EncoderOutputs a =
      enc.encode_inputs(question, supplement_column_names(forward), root_spc(), params_a);
  EncoderOutputs b =
      enc.encode_inputs(question, supplement_column_names(shuffled), root_spc(), params_b);

  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < cfg.d; ++c)
      CHECK(b.columns->value.at(r, c) ==
            doctest::Approx(a.columns->value.at(where[r], c)).epsilon(1e-6));
  for (int c = 0; c < cfg.d; ++c)
    CHECK(b.schema->value.at(0, c) == doctest::Approx(a.schema->value.at(0, c)).epsilon(1e-6));
}

TEST_CASE("encoding is deterministic at inference and dropout only acts in training") {
  Encoder enc(tiny_config(), random_word_vectors(3, 7));
  SupplementedSchema schema = one_table_schema();
  std::vector<std::string> question = {"show", "names"};

  ParamStore params(41);
  EncoderOutputs first = enc.encode_inputs(question, schema, root_spc(), params);
  EncoderOutputs second = enc.encode_inputs(question, schema, root_spc(), params);
  CHECK(first.columns->value.data == second.columns->value.data);

  std::mt19937_64 rng(1);
  EncoderOutputs dropped =
      enc.encode_inputs(question, schema, root_spc(), params, true, rng);
  CHECK(dropped.question_words->value.data != first.question_words->value.data);
}

TEST_CASE("gradients flow end to end through the encoder") {
  SupplementedSchema schema = one_table_schema();
  std::vector<std::string> question = {"show", "names"};
  auto op = [&](ParamStore& params, const std::vector<Var>&) {
    Encoder enc(tiny_config(), random_word_vectors(3, 13));
    EncoderOutputs out = enc.encode_inputs(question, schema, root_spc(), params);
    return concat_rows({out.question_words, out.columns, out.tables, out.question, out.schema});
  };
  for (std::uint64_t seed : {0, 1}) {
    double err = grad_check(op, {}, seed);
    INFO("seed := ", seed);
    CHECK(err < 1e-4);
  }
}
