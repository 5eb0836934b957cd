#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "ryansql/tensor.hpp"

using namespace ryansql;

namespace {

using OpFn = std::function<Var(ParamStore&, const std::vector<Var>&)>;

// Draws seeded inputs of the given shapes and runs the finite-difference
// comparison against the op's analytic gradients.
double check_op(const OpFn& op, const std::vector<std::pair<int, int>>& shapes,
                std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, "test inputs"));
  std::vector<Tensor> inputs;
  inputs.reserve(shapes.size());
  for (auto [r, c] : shapes) inputs.push_back(random_tensor(r, c, 1.0, rng));
  return grad_check(op, inputs, seed);
}

void check_all_seeds(const OpFn& op, const std::vector<std::pair<int, int>>& shapes,
                     int seeds = 20) {
  for (int seed = 0; seed < seeds; ++seed) {
    double err = check_op(op, shapes, static_cast<std::uint64_t>(seed));
    INFO("seed := ", seed);
    CHECK(err < 1e-4);
  }
}

std::vector<double> row(const Tensor& t, int r) {
  std::vector<double> out(t.cols);
  for (int c = 0; c < t.cols; ++c) out[c] = t.at(r, c);
  return out;
}

}  // namespace

TEST_CASE("tensor literals and shape guards") {
  Tensor t = Tensor::from({{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rows == 2);
  CHECK(t.cols == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(fixtures::thrown_kind([] { Tensor::from({{1, 2}, {3}}); }) == ErrorKind::InputContract);
  CHECK(fixtures::thrown_kind([] {
          Var a = make_var(Tensor(2, 3, 1.0));
          run_backward(a);
        }) == ErrorKind::InputContract);
  CHECK(fixtures::thrown_kind([] {
          matmul(make_var(Tensor(2, 3)), make_var(Tensor(2, 3)));
        }) == ErrorKind::InputContract);
}

TEST_CASE("broadcast add and mul against hand expansion") {
  Var a = make_var(Tensor::from({{1, 2}, {3, 4}, {5, 6}}));
  Var b = make_var(Tensor::from({{10, 100}}));
  CHECK(add(a, b)->value.data == std::vector<double>{11, 102, 13, 104, 15, 106});
  CHECK(mul(a, b)->value.data == std::vector<double>{10, 200, 30, 400, 50, 600});
}

TEST_CASE("heuristic-matching concatenation layout") {
  Var x = make_var(Tensor::from({{1, 2}}));
  Var y = make_var(Tensor::from({{3, 0}}));
  CHECK(hc(x, y)->value.data == std::vector<double>{1, 2, 3, 0, 2, 2, 3, 0});

  // x == y collapses the difference block to zero and the product to x^2.
  Var z = make_var(Tensor::from({{-1.5, 4}}));
  CHECK(hc(z, z)->value.data == std::vector<double>{-1.5, 4, -1.5, 4, 0, 0, 2.25, 16});
}

TEST_CASE("fusion with zero weights halves its first argument") {
  Var x = make_var(Tensor::from({{2, -4}, {6, 8}}));
  Var y = make_var(Tensor::from({{1, 1}, {1, 1}}));
  Var w_r = make_var(Tensor(8, 2, 0.0));
  Var w_g = make_var(Tensor(8, 2, 0.0));
  Tensor out = fusion(x, y, w_r, w_g)->value;
  for (int i = 0; i < out.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(0.5 * x->value.data[i]));
}

TEST_CASE("fusion outputs stay between candidate and carry values") {
  std::mt19937_64 rng(11);
  Var x = make_var(random_tensor(3, 4, 1.0, rng));
  Var y = make_var(random_tensor(3, 4, 1.0, rng));
  Var w_r = make_var(random_tensor(16, 4, 0.5, rng));
  Var w_g = make_var(random_tensor(16, 4, 0.5, rng));
  Tensor candidate = relu(matmul(concat_cols({x, y, mul(x, y), sub(x, y)}), w_r))->value;
  Tensor out = fusion(x, y, w_r, w_g)->value;
  for (int i = 0; i < out.size(); ++i) {
    double lo = std::min(candidate.data[i], x->value.data[i]);
    double hi = std::max(candidate.data[i], x->value.data[i]);
    CHECK(out.data[i] >= lo - 1e-12);
    CHECK(out.data[i] <= hi + 1e-12);
  }
}

TEST_CASE("attention summary of identical rows returns that row") {
  Var m = make_var(Tensor::from({{1, -2, 0.5}, {1, -2, 0.5}, {1, -2, 0.5}, {1, -2, 0.5}}));
  std::mt19937_64 rng(3);
  Var w_1 = make_var(random_tensor(2, 3, 1.0, rng));
  Var w_2 = make_var(random_tensor(1, 2, 1.0, rng));
  Tensor out = self_attend(m, w_1, w_2)->value;
  CHECK(out.rows == 1);
  for (int c = 0; c < 3; ++c) CHECK(out.at(0, c) == doctest::Approx(m->value.at(0, c)));
}

TEST_CASE("attention summary with zero scorer weights is the column mean") {
  Var m = make_var(Tensor::from({{1, 2}, {3, 4}, {5, 6}}));
  std::mt19937_64 rng(4);
  Var w_1 = make_var(random_tensor(3, 2, 1.0, rng));
  Var w_2 = make_var(Tensor(1, 3, 0.0));
  Tensor out = self_attend(m, w_1, w_2)->value;
  CHECK(out.at(0, 0) == doctest::Approx(3.0));
  CHECK(out.at(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("scaled dot attention degenerates and saturates as expected") {
  // Single key: every query row returns that row.
  Var v1 = make_var(Tensor::from({{7, -1, 2}}));
  Var h = make_var(Tensor::from({{1, 0, 0}, {0, 5, 0}}));
  Tensor out = scaled_dot_attention(h, v1)->value;
  CHECK(row(out, 0) == std::vector<double>{7, -1, 2});
  CHECK(row(out, 1) == std::vector<double>{7, -1, 2});

  // A strongly aligned query concentrates nearly all weight on one key.
  Var v2 = make_var(Tensor::from({{1, 0, 0, 0}, {0, 1, 0, 0}}));
  Var big = make_var(Tensor::from({{20, 0, 0, 0}}));
  Tensor sat = scaled_dot_attention(big, v2)->value;
  CHECK(sat.at(0, 0) > 0.99);
  CHECK(sat.at(0, 1) < 0.01);
}

TEST_CASE("kernel-3 convolution oracle on a short sequence") {
  Var x = make_var(Tensor::from({{1}, {2}, {3}, {4}}));
  Var kernel = make_var(Tensor(3, 1, 1.0));
  Var bias = make_var(Tensor(1, 1, 0.0));
  CHECK(conv1d_k3(x, kernel, bias)->value.data == std::vector<double>{3, 6, 9, 7});
}

TEST_CASE("row max pooling oracle") {
  Var x = make_var(Tensor::from({{1, 5}, {4, 2}}));
  CHECK(maxpool_rows(x)->value.data == std::vector<double>{4, 5});
}

TEST_CASE("layer normalization standardizes each row") {
  std::mt19937_64 rng(9);
  Var x = make_var(random_tensor(4, 6, 3.0, rng));
  Var gain = make_var(Tensor(1, 6, 1.0));
  Var bias = make_var(Tensor(1, 6, 0.0));
  Tensor out = layer_norm_rows(x, gain, bias)->value;
  for (int r = 0; r < out.rows; ++r) {
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < out.cols; ++c) mean += out.at(r, c);
    mean /= out.cols;
    for (int c = 0; c < out.cols; ++c) var += (out.at(r, c) - mean) * (out.at(r, c) - mean);
    var /= out.cols;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("softmax rows are normalized across shapes") {
  std::vector<std::pair<int, int>> shapes = {{2, 3}, {8, 30}, {30, 40}, {40, 8}};
  for (auto [r, c] : shapes) {
    std::mt19937_64 rng(mix_seed(31, std::to_string(r) + "x" + std::to_string(c)));
    Tensor sm = softmax_rows(make_var(random_tensor(r, c, 5.0, rng)))->value;
    for (int i = 0; i < r; ++i) {
      double total = 0.0;
      for (int j = 0; j < c; ++j) {
        CHECK(sm.at(i, j) >= 0.0);
        total += sm.at(i, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
  // Attention weights are softmax rows of scores and inherit normalization.
  std::mt19937_64 rng(5);
  Var h = make_var(random_tensor(30, 8, 1.0, rng));
  Var v = make_var(random_tensor(40, 8, 1.0, rng));
  Var scores = scale(matmul(h, transpose(v)), 1.0 / std::sqrt(8.0));
  Tensor weights = softmax_rows(scores)->value;
  for (int i = 0; i < weights.rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < weights.cols; ++j) total += weights.at(i, j);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("cross entropy oracles") {
  Var logits = make_var(Tensor::from({{0, 0}}));
  CHECK(cross_entropy_with_logits(logits, {0})->value.data[0] ==
        doctest::Approx(std::log(2.0)));
  Var confident = make_var(Tensor::from({{30, 0, 0}}));
  CHECK(cross_entropy_with_logits(confident, {0})->value.data[0] ==
        doctest::Approx(0.0).epsilon(1e-6));

  Var z = make_var(Tensor::from({{0.0}}));
  Tensor half(1, 1, 0.5);
  CHECK(binary_cross_entropy_with_logits(z, half)->value.data[0] ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("gradients of the matching and attention blocks") {
  check_all_seeds([](ParamStore&, const std::vector<Var>& in) { return hc(in[0], in[1]); },
                  {{3, 4}, {3, 4}});
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) { return fusion(in[0], in[1], in[2], in[3]); },
      {{3, 4}, {3, 4}, {16, 4}, {16, 4}});
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) { return self_attend(in[0], in[1], in[2]); },
      {{5, 4}, {3, 4}, {1, 3}});
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) { return scaled_dot_attention(in[0], in[1]); },
      {{3, 4}, {5, 4}});
}

TEST_CASE("gradients of the convolution, pooling and gate blocks") {
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) { return conv1d_k3(in[0], in[1], in[2]); },
      {{5, 3}, {9, 2}, {1, 2}});
  check_all_seeds([](ParamStore&, const std::vector<Var>& in) { return maxpool_rows(in[0]); },
                  {{6, 5}});
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) {
        return highway(in[0], in[1], in[2], in[3], in[4]);
      },
      {{4, 3}, {3, 3}, {1, 3}, {3, 3}, {1, 3}});
}

TEST_CASE("gradients of the composite encoder layers") {
  check_all_seeds(
      [](ParamStore& params, const std::vector<Var>& in) {
        return dense_cnn_block(in[0], params, "dense", 4, 3);
      },
      {{5, 3}});
  check_all_seeds(
      [](ParamStore& params, const std::vector<Var>& in) {
        return transformer_layer(in[0], params, "tf", 4);
      },
      {{4, 8}});
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) {
        return layer_norm_rows(in[0], in[1], in[2]);
      },
      {{4, 6}, {1, 6}, {1, 6}}, 5);
}

TEST_CASE("gradients of softmax, losses and remaining primitives") {
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) { return softmax_rows(in[0]); }, {{4, 5}}, 5);
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) {
        return cross_entropy_with_logits(in[0], {0, 2, 1});
      },
      {{3, 4}}, 5);
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) {
        Tensor targets(3, 4);
        for (int i = 0; i < targets.size(); ++i) targets.data[i] = (i * 7 % 3 == 0) ? 1.0 : 0.0;
        return binary_cross_entropy_with_logits(in[0], targets);
      },
      {{3, 4}}, 5);
  // One chain through the bookkeeping ops: broadcast, slice, gather, tile,
  // stacking, transpose and the scalar activations.
  check_all_seeds(
      [](ParamStore&, const std::vector<Var>& in) {
        Var a = tanh(mul(in[0], in[1]));                        // 3x4, broadcast
        Var b = sigmoid(gather_rows(in[2], {0, 4, 2}));         // 3x4
        Var c = abs(sub(a, b));                                 // 3x4
        Var d = concat_rows({c, tile_rows(in[1], 2)});          // 5x4
        Var e = slice_cols(transpose(d), 1, 4);                 // 4x3
        return add_scalar(scale(maxpool_rows(e), 2.0), 1.0);    // 1x3
      },
      {{3, 4}, {1, 4}, {6, 4}}, 5);
}

TEST_CASE("finite differences reject overflowing ops") {
  auto blows_up = [](ParamStore&, const std::vector<Var>& in) {
    Var big = scale(in[0], 1e200);
    return mul(big, big);
  };
  CHECK(fixtures::thrown_kind([&] {
          grad_check(blows_up, {Tensor(2, 2, 2.0)}, 0);
        }) == ErrorKind::NumericInstability);
}

TEST_CASE("parameter initialization ignores creation order") {
  ParamStore first(42);
  Var a1 = first.get("alpha", 3, 4);
  Var b1 = first.get("beta", 2, 2);
  ParamStore second(42);
  Var b2 = second.get("beta", 2, 2);
  Var a2 = second.get("alpha", 3, 4);
  CHECK(a1->value.data == a2->value.data);
  CHECK(b1->value.data == b2->value.data);

  ParamStore other(43);
  CHECK(other.get("alpha", 3, 4)->value.data != a1->value.data);
  CHECK(fixtures::thrown_kind([&] { first.get("alpha", 4, 3); }) == ErrorKind::InputContract);
  CHECK(fixtures::thrown_kind([&] { first.at("missing"); }) == ErrorKind::InputContract);
}

TEST_CASE("sgd step and zero grad") {
  ParamStore store(1);
  Var w = store.get_const("w", 1, 2, 3.0);
  w->grad.at(0, 0) = 1.0;
  w->grad.at(0, 1) = -2.0;
  store.sgd_step(0.5);
  CHECK(w->value.data == std::vector<double>{2.5, 4.0});
  store.zero_grad();
  CHECK(w->grad.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward results are reproducible for a fixed seed") {
  auto build = [](std::uint64_t seed) {
    ParamStore params(seed);
    std::mt19937_64 rng(mix_seed(seed, "x"));
    Var x = make_var(random_tensor(5, 8, 1.0, rng));
    return transformer_layer(x, params, "tf", 4)->value.data;
  };
  CHECK(build(7) == build(7));
  CHECK(build(7) != build(8));
}

TEST_CASE("checkpoint round trip preserves every tensor bit for bit") {
  ParamStore store(99);
  store.get("encoder.w", 4, 6);
  store.get("decoder.w", 2, 3);
  store.get_const("decoder.b", 1, 3, 0.25);
  std::string path = "tensor_checkpoint_test.bin";
  save_checkpoint(store, path);
  ParamStore loaded = load_checkpoint(path);
  CHECK(loaded.seed() == 99);
  std::vector<Var> expect = store.items();
  std::vector<Var> got = loaded.items();
  REQUIRE(expect.size() == got.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(expect[i]->name == got[i]->name);
    CHECK(expect[i]->value.rows == got[i]->value.rows);
    CHECK(expect[i]->value.cols == got[i]->value.cols);
    CHECK(expect[i]->value.data == got[i]->value.data);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects junk") {
  CHECK(fixtures::thrown_kind([] { load_checkpoint("no_such_checkpoint.bin"); }) ==
        ErrorKind::Io);
  std::string path = "tensor_checkpoint_junk.bin";
  std::ofstream(path, std::ios::binary) << "this is not a checkpoint at all";
  CHECK(fixtures::thrown_kind([&] { load_checkpoint(path); }) == ErrorKind::MalformedDocument);
  std::remove(path.c_str());
}

TEST_CASE("dropout is identity at inference and rescales while training") {
  std::mt19937_64 rng(21);
  Var x = make_var(Tensor(20, 50, 1.0));
  CHECK(dropout(x, 0.5, false, rng).get() == x.get());

  Tensor out = dropout(x, 0.5, true, rng)->value;
  int zeros = 0;
  for (double v : out.data) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    if (v == 0.0) ++zeros;
  }
  CHECK(zeros > 350);
  CHECK(zeros < 650);
}

TEST_CASE("adaptive updates match two hand-computed steps") {
  ParamStore params(1);
  params.put("w", Tensor::from({{1.0, -2.0}}));
  OptimizerState state;

  // loss = sum(w*w), gradient 2w; moments follow the bias-corrected updates.
  double m[2] = {0, 0}, s[2] = {0, 0};
  double w[2] = {1.0, -2.0};
  for (int step = 1; step <= 2; ++step) {
    Var p = params.at("w");
    params.zero_grad();
    run_backward(sum(mul(p, p)));
    for (int i = 0; i < 2; ++i) {
      double g = 2.0 * w[i];
      CHECK(p->grad.data[i] == doctest::Approx(g));
      m[i] = 0.9 * m[i] + 0.1 * g;
      s[i] = 0.999 * s[i] + 0.001 * g * g;
      double mh = m[i] / (1.0 - std::pow(0.9, step));
      double sh = s[i] / (1.0 - std::pow(0.999, step));
      w[i] -= 0.01 * mh / (std::sqrt(sh) + 1e-8);
    }
    adam_step(params, state, 0.01);
    CHECK(p->value.data[0] == doctest::Approx(w[0]).epsilon(1e-12));
    CHECK(p->value.data[1] == doctest::Approx(w[1]).epsilon(1e-12));
  }
  CHECK(state.step == 2);

  SUBCASE("a stale accumulator shape is rejected") {
    OptimizerState stale;
    stale.first["w"] = Tensor(2, 2, 0.0);
    stale.second["w"] = Tensor(2, 2, 0.0);
    CHECK(fixtures::thrown_kind([&] { adam_step(params, stale, 0.01); }) ==
          ErrorKind::InputContract);
  }
}
