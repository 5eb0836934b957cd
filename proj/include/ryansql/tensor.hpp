#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ryansql/errors.hpp"

namespace ryansql {

/// Dense row-major matrix of doubles. Vectors are 1xN throughout.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0);
  static Tensor from(std::initializer_list<std::initializer_list<double>> values);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

class Node;
using Var = std::shared_ptr<Node>;

/// One vertex of a reverse-mode computation graph. `backward` scatters this
/// node's gradient into its parents; leaves have none. Gradients accumulate
/// until explicitly zeroed, so one parameter can appear in many graphs.
class Node {
 public:
  Tensor value;
  Tensor grad;       // same shape as value, starts zeroed
  std::string name;  // non-empty for named parameters only
  std::vector<Var> parents;
  std::function<void(Node&)> backward;

  explicit Node(Tensor v);
};

/// Wraps a tensor as a graph leaf.
Var make_var(Tensor value);

/// Reverse-mode accumulation from a 1x1 output, in topological order.
void run_backward(const Var& output);

// ---- primitive operations ----
Var add(const Var& a, const Var& b);  // same shape, or b 1xN broadcast down rows
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise; b may be 1xN broadcast
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double value);
Var abs(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softmax_rows(const Var& a);
Var sum(const Var& a);  // -> 1x1
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int begin, int end);
Var gather_rows(const Var& table, const std::vector<int>& rows);
Var tile_rows(const Var& row, int count);  // 1xN -> count x N
Var maxpool_rows(const Var& a);            // column-wise max -> 1xN
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias,
                    double eps = 1e-5);
/// Inverted dropout; identity when not training.
Var dropout(const Var& x, double rate, bool training, std::mt19937_64& rng);

// ---- losses (mean-reduced to 1x1) ----
Var cross_entropy_with_logits(const Var& logits, const std::vector<int>& targets);
Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets);

/// Owns named trainable tensors. Initial values depend only on (seed, name),
/// never on creation order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed);

  /// Fetches or creates; new tensors get Glorot-scaled gaussian entries.
  Var get(const std::string& name, int rows, int cols);
  /// Fetches or creates with a constant fill (biases, layer-norm gains).
  Var get_const(const std::string& name, int rows, int cols, double fill);
  /// Creates or overwrites in place, preserving node identity when present.
  Var put(const std::string& name, Tensor value);

  bool contains(const std::string& name) const;
  Var at(const std::string& name) const;
  std::vector<Var> items() const;  // sorted by name
  std::uint64_t seed() const { return seed_; }

  void zero_grad();
  void sgd_step(double learning_rate);

 private:
  std::map<std::string, Var> params_;
  std::uint64_t seed_ = 0;
};

/// Per-parameter moment accumulators for adaptive updates.
struct OptimizerState {
  long long step = 0;
  std::map<std::string, Tensor> first;
  std::map<std::string, Tensor> second;
};

/// Adam update over every parameter in the store, bias-corrected. Missing
/// accumulators are created zeroed; a shape clash with an existing
/// accumulator is an InputContract error.
void adam_step(ParamStore& params, OptimizerState& state, double learning_rate,
               double beta1 = 0.9, double beta2 = 0.999,
               double epsilon = 1e-8);

// Deterministic scalar draws (the standard-library distributions are
// implementation-defined; the raw engine is not).
double uniform01(std::mt19937_64& rng);
double gaussian(std::mt19937_64& rng);  // Box-Muller
std::uint64_t mix_seed(std::uint64_t seed, const std::string& name);
Tensor random_tensor(int rows, int cols, double stddev, std::mt19937_64& rng);

/// Binary parameter container: "RYTN" magic, version, a JSON index of
/// (seed, names, shapes, byte offsets), then row-major little-endian f64
/// payloads. Layout documented in docs/formats.md.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

// ---- building blocks ----
/// Heuristic-matching concatenation: rows of [x, y, |x-y|, x*y].
Var hc(const Var& x, const Var& y);
/// Gated merge of y into x: g*relu(c w_r) + (1-g)*x over rows
/// c = [x, y, x*y, x-y], g = sigmoid(c w_g). Weights are 4d x d.
Var fusion(const Var& x, const Var& y, const Var& w_r, const Var& w_g);
/// Attention summary softmax(w_2 tanh(w_1 M^T)) M -> 1xd;
/// w_1 is a x d, w_2 is 1 x a.
Var self_attend(const Var& m, const Var& w_1, const Var& w_2);
/// Row-wise softmax(H V^T / sqrt(d)) V.
Var scaled_dot_attention(const Var& h, const Var& v);
/// Kernel-3 same-padded convolution over rows; kernel is (3*d_in) x d_out,
/// laid out [previous row; current row; next row]; bias is 1 x d_out.
Var conv1d_k3(const Var& x, const Var& kernel, const Var& bias);
/// Single highway layer: sigmoid gate over a relu candidate.
Var highway(const Var& x, const Var& w_t, const Var& b_t, const Var& w_h,
            const Var& b_h);
/// Two kernel-3 convolution layers, each appending its output to its input,
/// then a linear projection to d_out.
Var dense_cnn_block(const Var& x, ParamStore& params, const std::string& prefix,
                    int growth, int d_out);
/// Post-norm transformer layer: multi-head self-attention plus a width-4d
/// feed-forward, each with residual and layer normalization.
Var transformer_layer(const Var& x, ParamStore& params, const std::string& prefix,
                      int heads = 4);

/// Central-difference verification of analytic gradients. Checks every
/// element of `inputs` and of every parameter the op creates in its store;
/// matrix outputs are reduced through a seeded random projection. Returns
/// the maximum relative error.
double grad_check(
    const std::function<Var(ParamStore&, const std::vector<Var>&)>& op,
    const std::vector<Tensor>& inputs, std::uint64_t seed, double step = 1e-5);

}  // namespace ryansql
