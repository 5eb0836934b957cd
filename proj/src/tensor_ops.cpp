#include <algorithm>
#include <cmath>

#include "ryansql/tensor.hpp"

namespace ryansql {

namespace {

void require(bool ok, const char* message) {
  if (!ok) fail(ErrorKind::InputContract, message);
}

// True when b is a 1xN row broadcast down a's rows.
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rows == 1 && b.cols == a.cols && a.rows != 1;
}

Var unary(const Var& a, Tensor out, std::function<void(Node&)> back) {
  Var n = make_var(std::move(out));
  n->parents = {a};
  n->backward = std::move(back);
  return n;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Tensor& x = a->value;
  const Tensor& y = b->value;
  bool bc = row_broadcast(x, y);
  require(bc || x.same_shape(y), "add: shape mismatch");
  Tensor out = x;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) out.at(r, c) += bc ? y.at(0, c) : y.at(r, c);
  Var n = make_var(std::move(out));
  n->parents = {a, b};
  n->backward = [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (int i = 0; i < self.grad.size(); ++i) pa.grad.data[i] += self.grad.data[i];
    if (bc) {
      for (int r = 0; r < self.grad.rows; ++r)
        for (int c = 0; c < self.grad.cols; ++c) pb.grad.at(0, c) += self.grad.at(r, c);
    } else {
      for (int i = 0; i < self.grad.size(); ++i) pb.grad.data[i] += self.grad.data[i];
    }
  };
  return n;
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (int i = 0; i < out.size(); ++i) out.data[i] -= b->value.data[i];
  Var n = make_var(std::move(out));
  n->parents = {a, b};
  n->backward = [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i) {
      self.parents[0]->grad.data[i] += self.grad.data[i];
      self.parents[1]->grad.data[i] -= self.grad.data[i];
    }
  };
  return n;
}

Var mul(const Var& a, const Var& b) {
  const Tensor& x = a->value;
  const Tensor& y = b->value;
  bool bc = row_broadcast(x, y);
  require(bc || x.same_shape(y), "mul: shape mismatch");
  Tensor out = x;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) out.at(r, c) *= bc ? y.at(0, c) : y.at(r, c);
  Var n = make_var(std::move(out));
  n->parents = {a, b};
  n->backward = [bc](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (int r = 0; r < self.grad.rows; ++r)
      for (int c = 0; c < self.grad.cols; ++c) {
        double g = self.grad.at(r, c);
        double xv = pa.value.at(r, c);
        double yv = bc ? pb.value.at(0, c) : pb.value.at(r, c);
        pa.grad.at(r, c) += g * yv;
        if (bc)
          pb.grad.at(0, c) += g * xv;
        else
          pb.grad.at(r, c) += g * xv;
      }
  };
  return n;
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a->value;
  const Tensor& y = b->value;
  require(x.cols == y.rows, "matmul: inner dimensions differ");
  Tensor out(x.rows, y.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int k = 0; k < x.cols; ++k) {
      double xv = x.at(r, k);
      if (xv == 0.0) continue;
      for (int c = 0; c < y.cols; ++c) out.at(r, c) += xv * y.at(k, c);
    }
  Var n = make_var(std::move(out));
  n->parents = {a, b};
  n->backward = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    // dA += G B^T ; dB += A^T G
    for (int r = 0; r < pa.value.rows; ++r)
      for (int k = 0; k < pa.value.cols; ++k) {
        double acc = 0.0;
        for (int c = 0; c < self.grad.cols; ++c)
          acc += self.grad.at(r, c) * pb.value.at(k, c);
        pa.grad.at(r, k) += acc;
      }
    for (int k = 0; k < pb.value.rows; ++k)
      for (int c = 0; c < pb.value.cols; ++c) {
        double acc = 0.0;
        for (int r = 0; r < pa.value.rows; ++r)
          acc += pa.value.at(r, k) * self.grad.at(r, c);
        pb.grad.at(k, c) += acc;
      }
  };
  return n;
}

Var transpose(const Var& a) {
  Tensor out(a->value.cols, a->value.rows);
  for (int r = 0; r < a->value.rows; ++r)
    for (int c = 0; c < a->value.cols; ++c) out.at(c, r) = a->value.at(r, c);
  return unary(a, std::move(out), [](Node& self) {
    for (int r = 0; r < self.grad.rows; ++r)
      for (int c = 0; c < self.grad.cols; ++c)
        self.parents[0]->grad.at(c, r) += self.grad.at(r, c);
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a->value;
  for (double& v : out.data) v *= factor;
  return unary(a, std::move(out), [factor](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i)
      self.parents[0]->grad.data[i] += factor * self.grad.data[i];
  });
}

Var add_scalar(const Var& a, double value) {
  Tensor out = a->value;
  for (double& v : out.data) v += value;
  return unary(a, std::move(out), [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i)
      self.parents[0]->grad.data[i] += self.grad.data[i];
  });
}

Var abs(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::abs(v);
  return unary(a, std::move(out), [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i) {
      double x = self.parents[0]->value.data[i];
      double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      self.parents[0]->grad.data[i] += sign * self.grad.data[i];
    }
  });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::max(v, 0.0);
  return unary(a, std::move(out), [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i)
      if (self.parents[0]->value.data[i] > 0.0)
        self.parents[0]->grad.data[i] += self.grad.data[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return unary(a, std::move(out), [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i) {
      double s = self.value.data[i];
      self.parents[0]->grad.data[i] += s * (1.0 - s) * self.grad.data[i];
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.data) v = std::tanh(v);
  return unary(a, std::move(out), [](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i) {
      double t = self.value.data[i];
      self.parents[0]->grad.data[i] += (1.0 - t * t) * self.grad.data[i];
    }
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = a->value;
  for (int r = 0; r < out.rows; ++r) {
    double m = out.at(r, 0);
    for (int c = 1; c < out.cols; ++c) m = std::max(m, out.at(r, c));
    double total = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      out.at(r, c) = std::exp(out.at(r, c) - m);
      total += out.at(r, c);
    }
    for (int c = 0; c < out.cols; ++c) out.at(r, c) /= total;
  }
  return unary(a, std::move(out), [](Node& self) {
    for (int r = 0; r < self.grad.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < self.grad.cols; ++c)
        dot += self.grad.at(r, c) * self.value.at(r, c);
      for (int c = 0; c < self.grad.cols; ++c)
        self.parents[0]->grad.at(r, c) +=
            self.value.at(r, c) * (self.grad.at(r, c) - dot);
    }
  });
}

Var sum(const Var& a) {
  Tensor out(1, 1);
  for (double v : a->value.data) out.data[0] += v;
  return unary(a, std::move(out), [](Node& self) {
    double g = self.grad.data[0];
    for (int i = 0; i < self.parents[0]->grad.size(); ++i)
      self.parents[0]->grad.data[i] += g;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  int rows = parts[0]->value.rows;
  int cols = 0;
  for (const Var& p : parts) {
    require(p->value.rows == rows, "concat_cols: row count mismatch");
    cols += p->value.cols;
  }
  Tensor out(rows, cols);
  int base = 0;
  for (const Var& p : parts) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < p->value.cols; ++c) out.at(r, base + c) = p->value.at(r, c);
    base += p->value.cols;
  }
  Var n = make_var(std::move(out));
  n->parents = parts;
  n->backward = [](Node& self) {
    int base = 0;
    for (Var& p : self.parents) {
      for (int r = 0; r < p->grad.rows; ++r)
        for (int c = 0; c < p->grad.cols; ++c)
          p->grad.at(r, c) += self.grad.at(r, base + c);
      base += p->grad.cols;
    }
  };
  return n;
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  int cols = parts[0]->value.cols;
  int rows = 0;
  for (const Var& p : parts) {
    require(p->value.cols == cols, "concat_rows: column count mismatch");
    rows += p->value.rows;
  }
  Tensor out(rows, cols);
  int base = 0;
  for (const Var& p : parts) {
    for (int r = 0; r < p->value.rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(base + r, c) = p->value.at(r, c);
    base += p->value.rows;
  }
  Var n = make_var(std::move(out));
  n->parents = parts;
  n->backward = [](Node& self) {
    int base = 0;
    for (Var& p : self.parents) {
      for (int r = 0; r < p->grad.rows; ++r)
        for (int c = 0; c < p->grad.cols; ++c)
          p->grad.at(r, c) += self.grad.at(base + r, c);
      base += p->grad.rows;
    }
  };
  return n;
}

Var slice_cols(const Var& a, int begin, int end) {
  require(0 <= begin && begin < end && end <= a->value.cols, "slice_cols: bad range");
  Tensor out(a->value.rows, end - begin);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = a->value.at(r, begin + c);
  return unary(a, std::move(out), [begin](Node& self) {
    for (int r = 0; r < self.grad.rows; ++r)
      for (int c = 0; c < self.grad.cols; ++c)
        self.parents[0]->grad.at(r, begin + c) += self.grad.at(r, c);
  });
}

Var gather_rows(const Var& table, const std::vector<int>& rows) {
  for (int r : rows)
    require(0 <= r && r < table->value.rows, "gather_rows: row out of range");
  Tensor out(static_cast<int>(rows.size()), table->value.cols);
  for (int i = 0; i < out.rows; ++i)
    for (int c = 0; c < out.cols; ++c) out.at(i, c) = table->value.at(rows[i], c);
  return unary(table, std::move(out), [rows](Node& self) {
    for (int i = 0; i < self.grad.rows; ++i)
      for (int c = 0; c < self.grad.cols; ++c)
        self.parents[0]->grad.at(rows[i], c) += self.grad.at(i, c);
  });
}

Var tile_rows(const Var& row, int count) {
  require(row->value.rows == 1, "tile_rows: input must be 1xN");
  require(count >= 1, "tile_rows: count must be positive");
  Tensor out(count, row->value.cols);
  for (int r = 0; r < count; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = row->value.at(0, c);
  return unary(row, std::move(out), [](Node& self) {
    for (int r = 0; r < self.grad.rows; ++r)
      for (int c = 0; c < self.grad.cols; ++c)
        self.parents[0]->grad.at(0, c) += self.grad.at(r, c);
  });
}

Var maxpool_rows(const Var& a) {
  require(a->value.rows >= 1, "maxpool_rows: empty input");
  Tensor out(1, a->value.cols);
  std::vector<int> winner(a->value.cols, 0);
  for (int c = 0; c < a->value.cols; ++c) {
    double best = a->value.at(0, c);
    for (int r = 1; r < a->value.rows; ++r)
      if (a->value.at(r, c) > best) {
        best = a->value.at(r, c);
        winner[c] = r;
      }
    out.at(0, c) = best;
  }
  return unary(a, std::move(out), [winner](Node& self) {
    for (int c = 0; c < self.grad.cols; ++c)
      self.parents[0]->grad.at(winner[c], c) += self.grad.at(0, c);
  });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Tensor& xv = x->value;
  require(gain->value.rows == 1 && gain->value.cols == xv.cols, "layer_norm_rows: bad gain shape");
  require(bias->value.rows == 1 && bias->value.cols == xv.cols, "layer_norm_rows: bad bias shape");
  Tensor normed(xv.rows, xv.cols);
  std::vector<double> sigma(xv.rows);
  for (int r = 0; r < xv.rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < xv.cols; ++c) mean += xv.at(r, c);
    mean /= xv.cols;
    double variance = 0.0;
    for (int c = 0; c < xv.cols; ++c) {
      double d = xv.at(r, c) - mean;
      variance += d * d;
    }
    variance /= xv.cols;
    sigma[r] = std::sqrt(variance + eps);
    for (int c = 0; c < xv.cols; ++c) normed.at(r, c) = (xv.at(r, c) - mean) / sigma[r];
  }
  Tensor out(xv.rows, xv.cols);
  for (int r = 0; r < xv.rows; ++r)
    for (int c = 0; c < xv.cols; ++c)
      out.at(r, c) = gain->value.at(0, c) * normed.at(r, c) + bias->value.at(0, c);
  Var n = make_var(std::move(out));
  n->parents = {x, gain, bias};
  n->backward = [normed, sigma](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    int cols = self.grad.cols;
    for (int r = 0; r < self.grad.rows; ++r) {
      double mean_g = 0.0, mean_gx = 0.0;
      for (int c = 0; c < cols; ++c) {
        double gi = self.grad.at(r, c) * pg.value.at(0, c);
        mean_g += gi;
        mean_gx += gi * normed.at(r, c);
        pg.grad.at(0, c) += self.grad.at(r, c) * normed.at(r, c);
        pb.grad.at(0, c) += self.grad.at(r, c);
      }
      mean_g /= cols;
      mean_gx /= cols;
      for (int c = 0; c < cols; ++c) {
        double gi = self.grad.at(r, c) * pg.value.at(0, c);
        px.grad.at(r, c) += (gi - mean_g - normed.at(r, c) * mean_gx) / sigma[r];
      }
    }
  };
  return n;
}

Var dropout(const Var& x, double rate, bool training, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  Tensor mask(x->value.rows, x->value.cols);
  double keep = 1.0 - rate;
  for (double& m : mask.data) m = uniform01(rng) < rate ? 0.0 : 1.0 / keep;
  Tensor out = x->value;
  for (int i = 0; i < out.size(); ++i) out.data[i] *= mask.data[i];
  return unary(x, std::move(out), [mask](Node& self) {
    for (int i = 0; i < self.grad.size(); ++i)
      self.parents[0]->grad.data[i] += mask.data[i] * self.grad.data[i];
  });
}

Var cross_entropy_with_logits(const Var& logits, const std::vector<int>& targets) {
  const Tensor& z = logits->value;
  require(static_cast<int>(targets.size()) == z.rows, "cross entropy: one target per row");
  for (int t : targets) require(0 <= t && t < z.cols, "cross entropy: target out of range");
  Tensor probs(z.rows, z.cols);
  double loss = 0.0;
  for (int r = 0; r < z.rows; ++r) {
    double m = z.at(r, 0);
    for (int c = 1; c < z.cols; ++c) m = std::max(m, z.at(r, c));
    double total = 0.0;
    for (int c = 0; c < z.cols; ++c) {
      probs.at(r, c) = std::exp(z.at(r, c) - m);
      total += probs.at(r, c);
    }
    for (int c = 0; c < z.cols; ++c) probs.at(r, c) /= total;
    loss += std::log(total) + m - z.at(r, targets[r]);
  }
  Tensor out(1, 1, loss / z.rows);
  return unary(logits, std::move(out), [probs, targets](Node& self) {
    double g = self.grad.data[0] / probs.rows;
    for (int r = 0; r < probs.rows; ++r)
      for (int c = 0; c < probs.cols; ++c)
        self.parents[0]->grad.at(r, c) +=
            g * (probs.at(r, c) - (c == targets[r] ? 1.0 : 0.0));
  });
}

Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets) {
  const Tensor& z = logits->value;
  require(z.same_shape(targets), "binary cross entropy: shape mismatch");
  double loss = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    double zi = z.data[i];
    loss += std::max(zi, 0.0) - zi * targets.data[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  Tensor out(1, 1, loss / z.size());
  return unary(logits, std::move(out), [targets](Node& self) {
    double g = self.grad.data[0] / targets.size();
    for (int i = 0; i < targets.size(); ++i) {
      double s = 1.0 / (1.0 + std::exp(-self.parents[0]->value.data[i]));
      self.parents[0]->grad.data[i] += g * (s - targets.data[i]);
    }
  });
}

// ---- building blocks ----

Var hc(const Var& x, const Var& y) {
  require(x->value.same_shape(y->value), "hc: shape mismatch");
  return concat_cols({x, y, abs(sub(x, y)), mul(x, y)});
}

Var fusion(const Var& x, const Var& y, const Var& w_r, const Var& w_g) {
  require(x->value.same_shape(y->value), "fusion: shape mismatch");
  Var cat = concat_cols({x, y, mul(x, y), sub(x, y)});
  Var candidate = relu(matmul(cat, w_r));
  Var gate = sigmoid(matmul(cat, w_g));
  Var kept = mul(add_scalar(scale(gate, -1.0), 1.0), x);
  return add(mul(gate, candidate), kept);
}

Var self_attend(const Var& m, const Var& w_1, const Var& w_2) {
  Var scores = matmul(w_2, tanh(matmul(w_1, transpose(m))));  // 1 x n
  return matmul(softmax_rows(scores), m);
}

Var scaled_dot_attention(const Var& h, const Var& v) {
  require(h->value.cols == v->value.cols, "scaled_dot_attention: width mismatch");
  double inv = 1.0 / std::sqrt(static_cast<double>(v->value.cols));
  Var scores = scale(matmul(h, transpose(v)), inv);
  return matmul(softmax_rows(scores), v);
}

namespace {

// n x d -> n x 3d windows [previous row; current row; next row], zero-padded.
Var windows_k3(const Var& x) {
  const Tensor& xv = x->value;
  Tensor out(xv.rows, 3 * xv.cols);
  for (int r = 0; r < xv.rows; ++r)
    for (int k = -1; k <= 1; ++k) {
      int src = r + k;
      if (src < 0 || src >= xv.rows) continue;
      for (int c = 0; c < xv.cols; ++c)
        out.at(r, (k + 1) * xv.cols + c) = xv.at(src, c);
    }
  return unary(x, std::move(out), [](Node& self) {
    int cols = self.parents[0]->grad.cols;
    for (int r = 0; r < self.grad.rows; ++r)
      for (int k = -1; k <= 1; ++k) {
        int src = r + k;
        if (src < 0 || src >= self.parents[0]->grad.rows) continue;
        for (int c = 0; c < cols; ++c)
          self.parents[0]->grad.at(src, c) += self.grad.at(r, (k + 1) * cols + c);
      }
  });
}

}  // namespace

Var conv1d_k3(const Var& x, const Var& kernel, const Var& bias) {
  require(kernel->value.rows == 3 * x->value.cols, "conv1d_k3: kernel height must be 3*d_in");
  require(bias->value.rows == 1 && bias->value.cols == kernel->value.cols,
          "conv1d_k3: bias must be 1 x d_out");
  return add(matmul(windows_k3(x), kernel), bias);
}

Var highway(const Var& x, const Var& w_t, const Var& b_t, const Var& w_h,
            const Var& b_h) {
  Var gate = sigmoid(add(matmul(x, w_t), b_t));
  Var candidate = relu(add(matmul(x, w_h), b_h));
  return add(mul(gate, candidate), mul(add_scalar(scale(gate, -1.0), 1.0), x));
}

Var dense_cnn_block(const Var& x, ParamStore& params, const std::string& prefix,
                    int growth, int d_out) {
  require(growth >= 1 && d_out >= 1, "dense_cnn_block: bad widths");
  int d_in = x->value.cols;
  Var k1 = params.get(prefix + ".conv1.kernel", 3 * d_in, growth);
  Var b1 = params.get_const(prefix + ".conv1.bias", 1, growth, 0.0);
  Var h1 = concat_cols({x, relu(conv1d_k3(x, k1, b1))});
  Var k2 = params.get(prefix + ".conv2.kernel", 3 * (d_in + growth), growth);
  Var b2 = params.get_const(prefix + ".conv2.bias", 1, growth, 0.0);
  Var h2 = concat_cols({h1, relu(conv1d_k3(h1, k2, b2))});
  Var w = params.get(prefix + ".proj.weight", d_in + 2 * growth, d_out);
  Var b = params.get_const(prefix + ".proj.bias", 1, d_out, 0.0);
  return add(matmul(h2, w), b);
}

Var transformer_layer(const Var& x, ParamStore& params, const std::string& prefix,
                      int heads) {
  int d = x->value.cols;
  require(heads >= 1 && d % heads == 0, "transformer_layer: width not divisible by head count");
  int head_dim = d / heads;
  Var q = matmul(x, params.get(prefix + ".wq", d, d));
  Var k = matmul(x, params.get(prefix + ".wk", d, d));
  Var v = matmul(x, params.get(prefix + ".wv", d, d));
  double inv = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> per_head;
  per_head.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Var kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Var vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Var weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv));
    per_head.push_back(matmul(weights, vh));
  }
  Var attended = matmul(concat_cols(per_head), params.get(prefix + ".wo", d, d));
  Var h1 = layer_norm_rows(add(x, attended),
                           params.get_const(prefix + ".ln1.gain", 1, d, 1.0),
                           params.get_const(prefix + ".ln1.bias", 1, d, 0.0));
  Var inner = relu(add(matmul(h1, params.get(prefix + ".ff1.weight", d, 4 * d)),
                       params.get_const(prefix + ".ff1.bias", 1, 4 * d, 0.0)));
  Var ff = add(matmul(inner, params.get(prefix + ".ff2.weight", 4 * d, d)),
               params.get_const(prefix + ".ff2.bias", 1, d, 0.0));
  return layer_norm_rows(add(h1, ff),
                         params.get_const(prefix + ".ln2.gain", 1, d, 1.0),
                         params.get_const(prefix + ".ln2.bias", 1, d, 0.0));
}

}  // namespace ryansql
