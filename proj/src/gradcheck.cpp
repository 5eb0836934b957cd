#include "ryansql/gradcheck.hpp"

#include <utility>

#include "ryansql/dataset.hpp"
#include "ryansql/decoder.hpp"
#include "ryansql/encoder.hpp"
#include "ryansql/preprocess.hpp"
#include "ryansql/tensor.hpp"

namespace ryansql {

namespace {

using OpFn = std::function<Var(ParamStore&, const std::vector<Var>&)>;

struct Suite {
  int seeds;
  std::vector<GradCheckEntry> entries;

  void check(const std::string& name, const OpFn& op,
             const std::vector<std::pair<int, int>>& shapes) {
    GradCheckEntry entry{name, 0.0};
    for (int seed = 0; seed < seeds; ++seed) {
      std::mt19937_64 rng(mix_seed(seed, "suite inputs"));
      std::vector<Tensor> inputs;
      inputs.reserve(shapes.size());
      for (auto [r, c] : shapes) inputs.push_back(random_tensor(r, c, 1.0, rng));
      entry.max_rel_error =
          std::max(entry.max_rel_error, grad_check(op, inputs, seed));
    }
    entries.push_back(std::move(entry));
  }
};

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d1 = 3;
  c.d2 = 2;
  c.d_p = 3;
  c.d = 4;
  c.dense_growth = 2;
  c.heads = 2;
  c.dropout_rate = 0.0;
  return c;
}

// Activations arrive as inputs so each head checks its own parameters.
EncoderOutputs fake_outputs(const std::vector<Var>& in) {
  return EncoderOutputs{in[0], in[1], in[2], in[3], in[4], in[5]};
}

constexpr int kN = 3, kM = 5, kT = 2, kD = 4, kDp = 3;

const std::vector<std::pair<int, int>> kEncShapes = {
    {kN, kD}, {kM, kD}, {kT, kD}, {1, kDp}, {1, kD}, {1, kD}};

}  // namespace

std::vector<GradCheckEntry> gradient_suite(int seeds) {
  Suite s{seeds, {}};

  // tensor primitives
  s.check("tensor/add", [](ParamStore&, const std::vector<Var>& in) {
    return add(in[0], in[1]);
  }, {{3, 4}, {3, 4}});
  s.check("tensor/add broadcast", [](ParamStore&, const std::vector<Var>& in) {
    return add(in[0], in[1]);
  }, {{3, 4}, {1, 4}});
  s.check("tensor/mul", [](ParamStore&, const std::vector<Var>& in) {
    return mul(in[0], in[1]);
  }, {{3, 4}, {3, 4}});
  s.check("tensor/matmul", [](ParamStore&, const std::vector<Var>& in) {
    return matmul(in[0], in[1]);
  }, {{3, 4}, {4, 2}});
  s.check("tensor/transpose", [](ParamStore&, const std::vector<Var>& in) {
    return transpose(in[0]);
  }, {{3, 4}});
  s.check("tensor/scale", [](ParamStore&, const std::vector<Var>& in) {
    return scale(in[0], -1.7);
  }, {{3, 4}});
  s.check("tensor/tanh", [](ParamStore&, const std::vector<Var>& in) {
    return tanh(in[0]);
  }, {{3, 4}});
  s.check("tensor/softmax_rows", [](ParamStore&, const std::vector<Var>& in) {
    return softmax_rows(in[0]);
  }, {{3, 5}});
  s.check("tensor/sum", [](ParamStore&, const std::vector<Var>& in) {
    return sum(in[0]);
  }, {{3, 4}});
  s.check("tensor/concat_cols", [](ParamStore&, const std::vector<Var>& in) {
    return concat_cols({in[0], in[1]});
  }, {{3, 2}, {3, 4}});
  s.check("tensor/concat_rows", [](ParamStore&, const std::vector<Var>& in) {
    return concat_rows({in[0], in[1]});
  }, {{2, 4}, {3, 4}});
  s.check("tensor/slice_cols", [](ParamStore&, const std::vector<Var>& in) {
    return slice_cols(in[0], 1, 4);
  }, {{3, 5}});
  s.check("tensor/gather_rows", [](ParamStore&, const std::vector<Var>& in) {
    return gather_rows(in[0], {2, 0, 2});
  }, {{4, 3}});
  s.check("tensor/tile_rows", [](ParamStore&, const std::vector<Var>& in) {
    return tile_rows(in[0], 4);
  }, {{1, 3}});
  s.check("tensor/maxpool_rows", [](ParamStore&, const std::vector<Var>& in) {
    return maxpool_rows(in[0]);
  }, {{4, 3}});
  s.check("tensor/layer_norm_rows", [](ParamStore&, const std::vector<Var>& in) {
    return layer_norm_rows(in[0], in[1], in[2]);
  }, {{3, 4}, {1, 4}, {1, 4}});
  s.check("tensor/cross_entropy", [](ParamStore&, const std::vector<Var>& in) {
    return cross_entropy_with_logits(in[0], {0, 2, 1});
  }, {{3, 4}});
  s.check("tensor/binary_cross_entropy",
          [](ParamStore&, const std::vector<Var>& in) {
            return binary_cross_entropy_with_logits(
                in[0], Tensor::from({{1, 0, 1, 0}}));
          }, {{1, 4}});
  s.check("tensor/hc", [](ParamStore&, const std::vector<Var>& in) {
    return hc(in[0], in[1]);
  }, {{1, 4}, {1, 4}});
  s.check("tensor/fusion", [](ParamStore&, const std::vector<Var>& in) {
    return fusion(in[0], in[1], in[2], in[3]);
  }, {{3, 4}, {3, 4}, {16, 4}, {16, 4}});
  s.check("tensor/self_attend", [](ParamStore&, const std::vector<Var>& in) {
    return self_attend(in[0], in[1], in[2]);
  }, {{3, 4}, {4, 4}, {1, 4}});
  s.check("tensor/scaled_dot_attention",
          [](ParamStore&, const std::vector<Var>& in) {
            return scaled_dot_attention(in[0], in[1]);
          }, {{3, 4}, {5, 4}});
  s.check("tensor/conv1d_k3", [](ParamStore&, const std::vector<Var>& in) {
    return conv1d_k3(in[0], in[1], in[2]);
  }, {{4, 3}, {9, 2}, {1, 2}});
  s.check("tensor/highway", [](ParamStore&, const std::vector<Var>& in) {
    return highway(in[0], in[1], in[2], in[3], in[4]);
  }, {{2, 3}, {3, 3}, {1, 3}, {3, 3}, {1, 3}});
  s.check("tensor/dense_cnn_block", [](ParamStore& p, const std::vector<Var>& in) {
    return dense_cnn_block(in[0], p, "gc.dense", 2, 4);
  }, {{4, 3}});
  s.check("tensor/transformer_layer",
          [](ParamStore& p, const std::vector<Var>& in) {
            return transformer_layer(in[0], p, "gc.tf", 2);
          }, {{3, 4}});
  s.check("tensor/dropout(eval)", [](ParamStore&, const std::vector<Var>& in) {
    std::mt19937_64 rng(5);
    return dropout(in[0], 0.4, false, rng);
  }, {{3, 4}});

  // encoder: word path, position-code path, and the full five-layer stack
  const Encoder enc(tiny_config(), random_word_vectors(3, 13));
  s.check("encoder/embed_word", [&enc](ParamStore& p, const std::vector<Var>&) {
    return enc.embed_word("flights", p);
  }, {});
  s.check("encoder/encode_spc", [&enc](ParamStore& p, const std::vector<Var>&) {
    return enc.encode_spc(
        child_spc(root_spc(), NestingSite::Where, 1), p);
  }, {});
  const SupplementedSchema toy_schema =
      supplement_column_names(toy_corpus().schemas[0]);
  s.check("encoder/encode_inputs",
          [&enc, &toy_schema](ParamStore& p, const std::vector<Var>&) {
            EncoderOutputs out = enc.encode_inputs(
                {"top", "2", "cities"}, toy_schema, root_spc(), p);
            return concat_rows({out.question_words, out.columns, out.tables,
                                out.question, out.schema});
          }, {});

  // decoder heads, with encoder activations injected as inputs
  const Decoder dec((Encoder(tiny_config(), random_word_vectors(3, 13))));
  s.check("decoder/statement_vector",
          [&dec](ParamStore& p, const std::vector<Var>& in) {
            return dec.statement_vector(fake_outputs(in), p);
          }, kEncShapes);
  s.check("decoder/base_structure",
          [&dec](ParamStore& p, const std::vector<Var>& in) {
            BaseStructureLogits out = dec.classify_base_structure(in[0], p);
            return concat_cols({out.flags, out.n_groupby, out.n_orderby,
                                out.n_select, out.n_where, out.n_having,
                                out.iuen});
          }, {{1, kD}});
  s.check("decoder/from_tables",
          [&dec](ParamStore& p, const std::vector<Var>& in) {
            FromLogits out = dec.predict_from(fake_outputs(in), p);
            return concat_cols({out.table_scores, out.count});
          }, kEncShapes);
  s.check("decoder/condition_attention",
          [&dec](ParamStore& p, const std::vector<Var>& in) {
            return dec.condition_attention(fake_outputs(in),
                                           ConditionClause::Where, p);
          }, kEncShapes);
  {
    auto slot_shapes = kEncShapes;
    slot_shapes.push_back({clause_capacity(ConditionClause::Where), kD});
    s.check("decoder/condition_slots(where)",
            [&dec](ParamStore& p, const std::vector<Var>& in) {
              ClauseLogits out = dec.predict_condition_slots(
                  in[6], fake_outputs(in), ConditionClause::Where, p);
              return concat_cols({out.col1, out.dist1, out.agg1, out.ari,
                                  out.col2, out.dist2, out.agg2,
                                  out.conjunction, out.negated, out.cond_op,
                                  out.val1_nested, out.val1_start,
                                  out.val1_end, out.val2_nested,
                                  out.val2_start, out.val2_end});
            }, slot_shapes);
  }
  {
    auto slot_shapes = kEncShapes;
    slot_shapes.push_back({clause_capacity(ConditionClause::Select), kD});
    s.check("decoder/condition_slots(select)",
            [&dec](ParamStore& p, const std::vector<Var>& in) {
              ClauseLogits out = dec.predict_condition_slots(
                  in[6], fake_outputs(in), ConditionClause::Select, p);
              return concat_cols({out.col1, out.dist1, out.agg1, out.ari,
                                  out.col2, out.dist2, out.agg2,
                                  out.outer_agg,
                                  tile_rows(out.clause_distinct,
                                            out.col1->value.rows)});
            }, slot_shapes);
  }
  {
    auto slot_shapes = kEncShapes;
    slot_shapes.push_back({clause_capacity(ConditionClause::OrderBy), kD});
    s.check("decoder/condition_slots(orderby)",
            [&dec](ParamStore& p, const std::vector<Var>& in) {
              ClauseLogits out = dec.predict_condition_slots(
                  in[6], fake_outputs(in), ConditionClause::OrderBy, p);
              return concat_cols({out.col1, out.dist1, out.agg1, out.ari,
                                  out.col2, out.dist2, out.agg2,
                                  out.order_desc});
            }, slot_shapes);
  }
  {
    auto limit_shapes = kEncShapes;
    limit_shapes.push_back({1, kD});
    s.check("decoder/limit",
            [&dec](ParamStore& p, const std::vector<Var>& in) {
              LimitLogits out = dec.predict_limit(fake_outputs(in), in[6], p);
              return concat_cols({out.top1, out.pointer});
            }, limit_shapes);
  }

  return s.entries;
}

}  // namespace ryansql
