// Copyright 2026 The cam2rank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "cam2/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cam2/error.hpp"

namespace cam2::nn {

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape_string() + " vs " + b.shape_string());
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Applies f to each (value, grad) pair of a unary elementwise op.
template <typename Forward, typename Derivative>
Var unary(Var x, Forward f, Derivative df) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return x.tape->record(std::move(out), {x.id},
                        [xi = x.id, df](Tape& t, std::size_t self) {
                          if (!t.requires_grad(xi)) return;
                          const Tensor& xin = t.value(xi);
                          const Tensor& y = t.value(self);
                          const Tensor& g = t.grad(self);
                          Tensor& gx = t.accum(xi);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            gx[i] += g[i] * df(xin[i], y[i]);
                          }
                        });
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ValidationError("unsupported activation: " + std::string(name));
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows() || B.rank() != 2) {
    throw DimensionError("matmul: shape mismatch " + A.shape_string() +
                         " x " + B.shape_string());
  }
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  out.as_matrix().noalias() = A.as_matrix() * B.as_matrix();
  return a.tape->record(
      std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
        const auto g = t.grad(self).as_matrix();
        if (t.requires_grad(ai)) {
          t.accum(ai).as_matrix().noalias() +=
              g * t.value(bi).as_matrix().transpose();
        }
        if (t.requires_grad(bi)) {
          t.accum(bi).as_matrix().noalias() +=
              t.value(ai).as_matrix().transpose() * g;
        }
      });
}

Var dense(Var x, Var w, Var b) {
  require_same_tape(x, w);
  require_same_tape(x, b);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  if (X.rank() != 2 || W.rank() != 2 || X.cols() != W.rows() ||
      B.size() != W.cols()) {
    throw DimensionError("dense: shape mismatch input " + X.shape_string() +
                         ", weights " + W.shape_string() + ", bias " +
                         B.shape_string());
  }
  Tensor out = Tensor::matrix(X.rows(), W.cols());
  auto o = out.as_matrix();
  if (W.cols() > 0) {
    o.noalias() = X.as_matrix() * W.as_matrix();
    o.rowwise() += B.as_matrix().row(0);
  }
  return x.tape->record(
      std::move(out), {x.id, w.id, b.id},
      [xi = x.id, wi = w.id, bi = b.id](Tape& t, std::size_t self) {
        const auto g = t.grad(self).as_matrix();
        if (t.requires_grad(xi)) {
          t.accum(xi).as_matrix().noalias() +=
              g * t.value(wi).as_matrix().transpose();
        }
        if (t.requires_grad(wi)) {
          t.accum(wi).as_matrix().noalias() +=
              t.value(xi).as_matrix().transpose() * g;
        }
        if (t.requires_grad(bi)) {
          t.accum(bi).as_matrix().row(0) += g.colwise().sum();
        }
      });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        // Split on sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var activation(Var x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
  }
  throw ValidationError("unsupported activation");
}

Var residual_block(Var x, Var w1, Var b1, Var w2, Var b2) {
  const std::size_t d = x.value().cols();
  if (w1.value().rows() != d || w1.value().cols() != d ||
      w2.value().rows() != d || w2.value().cols() != d) {
    throw DimensionError("residual_block: width mismatch input " +
                         x.value().shape_string() + ", inner " +
                         w1.value().shape_string() + " / " +
                         w2.value().shape_string());
  }
  return add(x, dense(relu(dense(x, w1, b1)), w2, b2));
}

Var stop_gradient(Var x) { return x.tape->barrier(x); }

Var embedding_lookup(Var table, std::span<const int> indices) {
  const Tensor& T = table.value();
  if (T.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank 2, got " +
                         T.shape_string());
  }
  const std::size_t vocab = T.rows();
  const std::size_t dim = T.cols();
  Tensor out = Tensor::matrix(indices.size(), dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab) {
      throw IndexError("embedding_lookup: index " + std::to_string(idx) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(T.data() + idx * dim, dim, out.data() + r * dim);
  }
  std::vector<int> ids(indices.begin(), indices.end());
  return table.tape->record(
      std::move(out), {table.id},
      [ti = table.id, ids = std::move(ids), dim](Tape& t, std::size_t self) {
        if (!t.requires_grad(ti)) return;
        const Tensor& g = t.grad(self);
        Tensor& gt = t.accum(ti);
        for (std::size_t r = 0; r < ids.size(); ++r) {
          double* dst = gt.data() + ids[r] * dim;
          const double* src = g.data() + r * dim;
          for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
        }
      });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  add_into(out, b.value());
  return a.tape->record(std::move(out), {a.id, b.id},
                        [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          if (t.requires_grad(ai)) add_into(t.accum(ai), g);
                          if (t.requires_grad(bi)) add_into(t.accum(bi), g);
                        });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id},
                        [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          if (t.requires_grad(ai)) add_into(t.accum(ai), g);
                          if (t.requires_grad(bi)) {
                            Tensor& gb = t.accum(bi);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[i] -= g[i];
                            }
                          }
                        });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape->record(
      std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ai)) {
          Tensor& ga = t.accum(ai);
          const Tensor& bv = t.value(bi);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(bi)) {
          Tensor& gb = t.accum(bi);
          const Tensor& av = t.value(ai);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      });
}

Var scale(Var a, double s) {
  return unary(
      a, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var scale_by(Var a, Var s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) {
    throw DimensionError("scale_by: scale must hold one element, got " +
                         s.value().shape_string());
  }
  const double k = s.value()[0];
  Tensor out = a.value();
  for (double& v : out.values()) v *= k;
  return a.tape->record(
      std::move(out), {a.id, s.id}, [ai = a.id, si = s.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ai)) {
          Tensor& ga = t.accum(ai);
          const double k = t.value(si)[0];
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * k;
        }
        if (t.requires_grad(si)) {
          const Tensor& av = t.value(ai);
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
          t.accum(si)[0] += acc;
        }
      });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape* tape = parts.front().tape;
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape != tape) throw Error("concat_cols: mixed tapes");
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           parts.front().value().shape_string() + " vs " +
                           p.value().shape_string());
    }
    widths.push_back(p.value().cols());
    ids.push_back(p.id);
    cols += widths.back();
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k],
                  out.data() + r * cols + offset);
    }
    offset += widths[k];
  }
  std::vector<std::size_t> inputs = ids;
  return tape->record(
      std::move(out), std::move(inputs),
      [ids, widths, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            Tensor& gk = t.accum(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              const double* src = g.data() + r * cols + offset;
              double* dst = gk.data() + r * widths[k];
              for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
            }
          }
          offset += widths[k];
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  if (begin > end || end > A.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + A.shape_string());
  }
  const std::size_t rows = A.rows();
  const std::size_t cols = A.cols();
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(rows, w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * cols + begin, w, out.data() + r * w);
  }
  return a.tape->record(
      std::move(out), {a.id},
      [ai = a.id, begin, w, rows, cols](Tape& t, std::size_t self) {
        if (!t.requires_grad(ai)) return;
        const Tensor& g = t.grad(self);
        Tensor& ga = t.accum(ai);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            ga[r * cols + begin + c] += g[r * w + c];
          }
        }
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          if (!t.requires_grad(ai)) return;
                          const double g = t.grad(self)[0];
                          for (double& v : t.accum(ai).values()) v += g;
                        });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
  const Tensor& A = a.value();
  Tensor out = Tensor::matrix(A.rows(), 1);
  out.as_matrix() = A.as_matrix().rowwise().sum();
  return a.tape->record(std::move(out), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          if (!t.requires_grad(ai)) return;
                          const auto g = t.grad(self).as_matrix();
                          auto ga = t.accum(ai).as_matrix();
                          ga.colwise() += g.col(0);
                        });
}

Var abs(Var a) {
  return unary(
      a, [](double v) { return std::fabs(v); },
      [](double in, double) {
        return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0);
      });
}

Var square(Var a) {
  return unary(
      a, [](double v) { return v * v; },
      [](double in, double) { return 2.0 * in; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double in, double) {
        return (in >= lo && in <= hi) ? 1.0 : 0.0;
      });
}

Var softmax(Var a) {
  const Tensor& A = a.value();
  if (A.rows() != 1) {
    throw DimensionError("softmax: expects a single row, got " +
                         A.shape_string());
  }
  Tensor out(A.shape());
  double mx = A[0];
  for (double v : A.values()) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    out[i] = std::exp(A[i] - mx);
    z += out[i];
  }
  for (double& v : out.values()) v /= z;
  return a.tape->record(std::move(out), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          if (!t.requires_grad(ai)) return;
                          const Tensor& y = t.value(self);
                          const Tensor& g = t.grad(self);
                          double dot = 0.0;
                          for (std::size_t i = 0; i < y.size(); ++i) {
                            dot += g[i] * y[i];
                          }
                          Tensor& ga = t.accum(ai);
                          for (std::size_t i = 0; i < y.size(); ++i) {
                            ga[i] += y[i] * (g[i] - dot);
                          }
                        });
}

Var binary_cross_entropy(Var p, const Tensor& targets) {
  const Tensor& P = p.value();
  if (P.size() != targets.size()) {
    throw DimensionError("binary_cross_entropy: predictions " +
                         P.shape_string() + " vs targets " +
                         targets.shape_string());
  }
  if (P.size() == 0) throw DimensionError("binary_cross_entropy: empty batch");
  const double n = static_cast<double>(P.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double y = targets[i];
    acc -= y * std::log(P[i]) + (1.0 - y) * std::log1p(-P[i]);
  }
  return p.tape->record(
      Tensor::scalar(acc / n), {p.id},
      [pi = p.id, targets, n](Tape& t, std::size_t self) {
        if (!t.requires_grad(pi)) return;
        const double g = t.grad(self)[0];
        const Tensor& P = t.value(pi);
        Tensor& gp = t.accum(pi);
        for (std::size_t i = 0; i < P.size(); ++i) {
          const double y = targets[i];
          gp[i] += g * ((P[i] - y) / (P[i] * (1.0 - P[i]))) / n;
        }
      });
}

}  // namespace cam2::nn
