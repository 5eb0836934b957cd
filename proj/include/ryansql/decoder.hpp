#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ryansql/encoder.hpp"
#include "ryansql/preprocess.hpp"
#include "ryansql/sketch.hpp"
#include "ryansql/sql.hpp"
#include "ryansql/tensor.hpp"

namespace ryansql {

/// Trailing set operation of a statement; NONE folded in as class 0, the rest
/// in SetOperator order.
enum class IuenChoice { None, Intersect, Union, Except };

const char* to_string(IuenChoice choice);

/// Clauses that own condition slots.
enum class ConditionClause { Select, Where, GroupBy, Having, OrderBy };

/// Slot capacity: SELECT 6, WHERE 4, GROUPBY 3, HAVING 2, ORDERBY 3.
int clause_capacity(ConditionClause clause);
const char* clause_tag(ConditionClause clause);  // parameter-name fragment

/// Outcome of the eleven statement-structure heads.
struct BaseStructure {
  bool has_groupby = false;
  bool has_orderby = false;
  bool has_limit = false;
  bool has_where = false;
  bool has_having = false;
  int n_groupby = 1;  // 1..3, meaningful when has_groupby
  int n_orderby = 1;  // 1..3
  int n_select = 1;   // 1..6, always meaningful
  int n_where = 1;    // 1..4
  int n_having = 1;   // 1..2
  IuenChoice iuen = IuenChoice::None;

  bool operator==(const BaseStructure&) const = default;
};

/// Raw structure-head outputs, kept as graph nodes so the training loss can
/// reuse them. `flags` columns are b_g, b_o, b_l, b_w, b_h.
struct BaseStructureLogits {
  Var flags;       // 1x5
  Var n_groupby;   // 1x3
  Var n_orderby;   // 1x3
  Var n_select;    // 1x6
  Var n_where;     // 1x4
  Var n_having;    // 1x2
  Var iuen;        // 1x4, IuenChoice order
};

struct FromLogits {
  Var table_scores;  // 1xt per-table inclusion logits
  Var count;         // 1x6 logits over 1..6 tables
};

/// Per-condition slot logits for one clause; rows index condition slots
/// 0..capacity-1. Heads the clause does not own stay null (GROUPBY keeps only
/// `col1`; `outer_agg`, `order_desc` and the WHERE/HAVING heads are
/// clause-specific).
struct ClauseLogits {
  Var attended;         // Nxd condition-attended question summaries
  Var col1;             // Nxm column scores
  Var summary1;         // Nxd fused question/column state driving the heads
  Var dist1;            // Nx1
  Var agg1;             // Nx6
  Var ari;              // Nx5
  Var col2;             // Nxm
  Var summary2;         // Nxd
  Var dist2;            // Nx1
  Var agg2;             // Nx6
  Var outer_agg;        // Nx6, SELECT only
  Var clause_distinct;  // 1x1, SELECT only
  Var order_desc;       // Nx1, ORDERBY only
  Var conjunction;      // Nx2, WHERE/HAVING
  Var negated;          // Nx1
  Var cond_op;          // Nx11, CondOperator order
  Var val1_nested;      // Nx1
  Var val1_start;       // Nxn pointer logits over question tokens
  Var val1_end;         // Nxn
  Var val2_nested;      // Nx1
  Var val2_start;       // Nxn
  Var val2_end;         // Nxn
};

struct LimitLogits {
  Var top1;     // 1x1
  Var pointer;  // 1xn over question tokens
};

/// Gold values for one condition slot. Spans of -1 mean "not locatable in the
/// question"; the corresponding pointer loss is masked.
struct ConditionLabels {
  int col1 = 0;
  bool dist1 = false;
  int agg1 = 0;
  int ari = 0;
  bool has_col2 = false;
  int col2 = 0;
  bool dist2 = false;
  int agg2 = 0;
  int outer_agg = 0;        // SELECT
  bool order_desc = false;  // ORDERBY
  int conjunction = 0;      // WHERE/HAVING, rows >= 1
  bool negated = false;
  int cond_op = static_cast<int>(CondOperator::Eq);
  bool val1_nested = false;
  int val1_start = -1;
  int val1_end = -1;
  bool has_val2 = false;
  bool val2_nested = false;
  int val2_start = -1;
  int val2_end = -1;
};

struct GoldLabels {
  BaseStructure base;
  bool select_distinct = false;
  std::vector<char> from_tables;  // per-table membership, size t
  int from_count = 1;             // distinct FROM tables, 1..6
  std::vector<ConditionLabels> select;
  std::vector<ConditionLabels> where;
  std::vector<ConditionLabels> groupby;
  std::vector<ConditionLabels> having;
  std::vector<ConditionLabels> orderby;
  bool limit_top1 = false;
  int limit_token = -1;  // question index of $NUM, -1 masked
};

/// One supervised non-nested entry: the statement's subqueries must already
/// be position-code placeholders.
struct TrainingExample {
  std::vector<std::string> question;
  StatementPositionCode spc;
  SelectStatement statement;
  int schema_index = 0;
};

enum class OptimizerKind { GradientDescent, Adam };

struct TrainOptions {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 4e-4;
  double lr_decay = 0.8;   // multiplied in every decay_interval epochs
  int decay_interval = 3;
  int batch_size = 4;
  int max_epochs = 300;
  int patience = 20;       // epochs without improvement before stopping
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  int epochs = 0;
  double best_loss = 0.0;
};

/// Slot-filling decoder over the statement encoder: eleven structure heads,
/// per-clause condition heads, value pointers, the recursive statement
/// generator, and the training loop.
class Decoder {
 public:
  explicit Decoder(Encoder encoder);

  const Encoder& encoder() const { return encoder_; }

  /// 1xd statement summary combining question, schema and position vectors.
  Var statement_vector(const EncoderOutputs& enc, ParamStore& params) const;

  BaseStructureLogits classify_base_structure(const Var& v_s,
                                              ParamStore& params) const;
  static BaseStructure read_base_structure(const BaseStructureLogits& logits);

  FromLogits predict_from(const EncoderOutputs& enc, ParamStore& params) const;
  /// Top-count tables by score (ties to the lower index), ascending order.
  static std::vector<int> read_from_tables(const FromLogits& logits);

  /// Nxd attended question vectors, one row per condition slot.
  Var condition_attention(const EncoderOutputs& enc, ConditionClause clause,
                          ParamStore& params) const;

  ClauseLogits predict_condition_slots(const Var& attended,
                                       const EncoderOutputs& enc,
                                       ConditionClause clause,
                                       ParamStore& params) const;

  LimitLogits predict_limit(const EncoderOutputs& enc, const Var& v_s,
                            ParamStore& params) const;
  /// Throws ValueParse when the pointed token is not a positive integer.
  static LimitSpec read_limit(const LimitLogits& logits,
                              const std::vector<std::string>& question);

  /// Runs the full pipeline and assembles a statement that always survives
  /// print_sql -> parse_sql, recursing into nested positions. Hitting the
  /// nesting limit downgrades the slot to a null literal (or drops the set
  /// operation) and appends to `warnings`. `forced` overrides the predicted
  /// base structure (teacher forcing).
  SelectStatement generate_statement(const std::vector<std::string>& question,
                                     const SupplementedSchema& schema,
                                     const StatementPositionCode& spc,
                                     ParamStore& params,
                                     int max_depth = kDefaultMaxSpcDepth,
                                     std::vector<std::string>* warnings = nullptr,
                                     const BaseStructure* forced = nullptr) const;

  /// Gold values for every head this entry activates. Throws
  /// UnsupportedExample when a clause exceeds its sketch capacity.
  GoldLabels extract_labels(const SelectStatement& stmt,
                            const DatabaseSchema& schema,
                            const std::vector<std::string>& question) const;

  /// Named per-head losses for one example; active heads only.
  std::vector<std::pair<std::string, Var>> head_losses(
      const TrainingExample& example, const SupplementedSchema& schema,
      ParamStore& params, bool training, std::mt19937_64& rng) const;

  /// Sum of head_losses; throws Divergence naming the first non-finite head.
  Var example_loss(const TrainingExample& example,
                   const SupplementedSchema& schema, ParamStore& params,
                   bool training, std::mt19937_64& rng) const;

  /// One gradient step over the batch (mean loss); returns that loss.
  double training_step(const std::vector<TrainingExample>& batch,
                       const std::vector<SupplementedSchema>& schemas,
                       ParamStore& params, OptimizerState& opt,
                       const TrainOptions& options, double learning_rate,
                       std::mt19937_64& rng) const;

  TrainReport train(const std::vector<TrainingExample>& examples,
                    const std::vector<SupplementedSchema>& schemas,
                    ParamStore& params, const TrainOptions& options) const;

  /// Touches every parameter once so later generate calls are read-only
  /// (safe to share the store across threads).
  void ensure_params(const std::vector<std::string>& question,
                     const SupplementedSchema& schema,
                     ParamStore& params) const;

 private:
  Encoder encoder_;
};

}  // namespace ryansql
