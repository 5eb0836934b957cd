#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ryansql/preprocess.hpp"
#include "ryansql/sketch.hpp"
#include "ryansql/tensor.hpp"

namespace ryansql {

/// Fixed (non-trainable) word vectors. When `random_fallback` is set, every
/// token gets a vector derived from (seed, token) alone; otherwise tokens
/// absent from the table map to the zero vector.
struct WordVectors {
  int width = 0;
  std::unordered_map<std::string, Tensor> vectors;
  bool random_fallback = false;
  std::uint64_t seed = 0;

  Tensor lookup(const std::string& token) const;
};

/// Text file of lines "token v1 v2 ... vk"; the first line fixes the width.
WordVectors load_word_vectors(const std::string& path);
WordVectors random_word_vectors(int width, std::uint64_t seed);

struct EncoderConfig {
  int d1 = 300;  // word-vector width (overridden by a loaded vector file)
  int d2 = 50;   // character-embedding width
  int d_p = 100; // statement-position element width
  int d = 64;    // model width
  int dense_growth = 32;
  int heads = 4;
  double dropout_rate = 0.1;

  static EncoderConfig toy();
};

struct EncoderOutputs {
  Var question_words;  // n x d
  Var columns;         // m x d (row 0 is `*`)
  Var tables;          // t x d
  Var spc;             // 1 x d_p
  Var question;        // 1 x d, attention summary of question_words
  Var schema;          // 1 x d, attention summary of columns
};

/// Index into the 96-row character table: printable ASCII plus one
/// unknown bucket on row 95.
int char_row(unsigned char c);

/// Five-layer input encoder: embedding, embedding encoder (shared dense
/// convolution), question-column alignment, table encoder, question-table
/// alignment. Parameters live in the caller's store under stable names, so
/// one store serves training, checkpointing and inference.
class Encoder {
 public:
  Encoder(EncoderConfig config, WordVectors words);

  /// concat(word vector, per-dimension max over character vectors) through
  /// a one-layer highway network -> 1 x (d1+d2).
  Var embed_word(const std::string& token, ParamStore& params) const;

  /// Kernel-3 convolution over element embeddings, max-pooled -> 1 x d_p.
  Var encode_spc(const StatementPositionCode& spc, ParamStore& params) const;

  EncoderOutputs encode_inputs(const std::vector<std::string>& question,
                               const SupplementedSchema& schema,
                               const StatementPositionCode& spc,
                               ParamStore& params, bool training,
                               std::mt19937_64& rng) const;

  /// Inference-mode convenience: no dropout.
  EncoderOutputs encode_inputs(const std::vector<std::string>& question,
                               const SupplementedSchema& schema,
                               const StatementPositionCode& spc,
                               ParamStore& params) const;

  const EncoderConfig& config() const { return config_; }
  const WordVectors& words() const { return words_; }

 private:
  EncoderConfig config_;
  WordVectors words_;
};

}  // namespace ryansql
