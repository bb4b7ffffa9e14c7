#include "lsrlab/ndgrad/ops.hpp"

#include <algorithm>
#include <cmath>

#include "lsrlab/error.hpp"

namespace lsrlab::ndgrad {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + " needs a matrix, got " + a.shape_string());
  }
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error(ErrorCode::ShapeMismatch, "operands live on different tapes");
}

// Applies f elementwise and records d(out)/d(in) = dfdx(x, y).
template <typename F, typename D>
Var unary(Var a, const char* op, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a},
                        [ia, dfdx](Tape& t, std::size_t self) {
                          const Tensor& x = t.value(ia);
                          const Tensor& y = t.value(self);
                          const Tensor& g = t.grad(self);
                          Tensor& ga = t.grad_buffer(ia);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            ga.data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
                          }
                        },
                        op);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix("matmul", A);
  require_matrix("matmul", B);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out({n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out.data[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.data[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B.data[p * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(
      std::move(out), {a, b},
      [ia, ib, n, k, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.needs_grad(ia)) {
          const Tensor& B = t.value(ib);
          Tensor& ga = t.grad_buffer(ia);
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = &g.data[i * m];
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = &B.data[p * m];
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
              ga.data[i * k + p] += acc;
            }
          }
        }
        if (t.needs_grad(ib)) {
          const Tensor& A = t.value(ia);
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = &g.data[i * m];
            for (std::size_t p = 0; p < k; ++p) {
              const double av = A.data[i * k + p];
              if (av == 0.0) continue;
              double* gbrow = &gb.data[p * m];
              for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      },
      "matmul");
}

namespace {

template <typename F>
Var binary_same_shape(Var a, Var b, const char* op, F f, double da_sign, double db_sign,
                      bool product) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error(op, A, B);
  Tensor out(A.shape);
  for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = f(A.data[i], B.data[i]);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(
      std::move(out), {a, b},
      [ia, ib, da_sign, db_sign, product](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.needs_grad(ia)) {
          Tensor& ga = t.grad_buffer(ia);
          if (product) {
            const Tensor& B = t.value(ib);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * B.data[i];
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += da_sign * g.data[i];
          }
        }
        if (t.needs_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          if (product) {
            const Tensor& A = t.value(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * A.data[i];
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += db_sign * g.data[i];
          }
        }
      },
      op);
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}

Var sub(Var a, Var b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}

Var mul(Var a, Var b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, 0.0, 0.0, true);
}

Var add_bias(Var a, Var bias) {
  require_same_tape(a, bias);
  const Tensor& A = a.value();
  const Tensor& b = bias.value();
  require_matrix("add_bias", A);
  if (b.size() != A.cols() || b.rows() != 1) shape_error("add_bias", A, b);
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out = A;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += b.data[j];
  }
  const std::size_t ia = a.id, ib = bias.id;
  return a.tape->record(std::move(out), {a, bias},
                        [ia, ib, n, m](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          if (t.needs_grad(ia)) {
                            Tensor& ga = t.grad_buffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
                          }
                          if (t.needs_grad(ib)) {
                            Tensor& gb = t.grad_buffer(ib);
                            for (std::size_t i = 0; i < n; ++i) {
                              for (std::size_t j = 0; j < m; ++j) gb.data[j] += g.data[i * m + j];
                            }
                          }
                        },
                        "add_bias");
}

Var affine(Var a, double scale, double shift) {
  return unary(
      a, "affine", [scale, shift](double x) { return scale * x + shift; },
      [scale](double, double) { return scale; });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const std::size_t n = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    const Tensor& v = p.value();
    require_matrix("concat_cols", v);
    if (v.rows() != n) shape_error("concat_cols", parts.front().value(), v);
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out({n, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(&v.data[i * widths[k]], widths[k], &out.data[i * total + offset]);
    }
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return parts.front().tape->record(
      std::move(out), parts,
      [ids, widths, n, total](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.needs_grad(ids[k])) {
            Tensor& gk = t.grad_buffer(ids[k]);
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < widths[k]; ++j) {
                gk.data[i * widths[k] + j] += g.data[i * total + offset + j];
              }
            }
          }
          offset += widths[k];
        }
      },
      "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const std::size_t m = parts.front().value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    const Tensor& v = p.value();
    require_matrix("concat_rows", v);
    if (v.cols() != m) shape_error("concat_rows", parts.front().value(), v);
    total += v.rows();
  }
  Tensor out({total, m});
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    ids.push_back(p.id);
    offsets.push_back(offset);
    offset += v.size();
  }
  return parts.front().tape->record(
      std::move(out), parts,
      [ids, offsets](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          Tensor& gk = t.grad_buffer(ids[k]);
          for (std::size_t i = 0; i < gk.size(); ++i) gk.data[i] += g.data[offsets[k] + i];
        }
      },
      "concat_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  require_matrix("slice_cols", A);
  if (begin >= end || end > A.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "slice_cols [" + std::to_string(begin) + "," +
                                              std::to_string(end) + ") of " + A.shape_string());
  }
  const std::size_t n = A.rows(), m = A.cols(), w = end - begin;
  Tensor out({n, w});
  for (std::size_t i = 0; i < n; ++i) std::copy_n(&A.data[i * m + begin], w, &out.data[i * w]);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a},
                        [ia, n, m, w, begin](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& ga = t.grad_buffer(ia);
                          for (std::size_t i = 0; i < n; ++i) {
                            for (std::size_t j = 0; j < w; ++j) {
                              ga.data[i * m + begin + j] += g.data[i * w + j];
                            }
                          }
                        },
                        "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  require_matrix("slice_rows", A);
  if (begin >= end || end > A.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "slice_rows [" + std::to_string(begin) + "," +
                                              std::to_string(end) + ") of " + A.shape_string());
  }
  const std::size_t m = A.cols();
  Tensor out({end - begin, m});
  std::copy(A.data.begin() + static_cast<std::ptrdiff_t>(begin * m),
            A.data.begin() + static_cast<std::ptrdiff_t>(end * m), out.data.begin());
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a},
                        [ia, begin, m](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          Tensor& ga = t.grad_buffer(ia);
                          for (std::size_t i = 0; i < g.size(); ++i) ga.data[begin * m + i] += g.data[i];
                        },
                        "slice_rows");
}

Var gather_rows(Var table, std::span<const int> indices) {
  const Tensor& T = table.value();
  require_matrix("gather_rows", T);
  const std::size_t v = T.rows(), e = T.cols();
  std::vector<int> idx(indices.begin(), indices.end());
  Tensor out({idx.size(), e});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw Error(ErrorCode::ShapeMismatch,
                  "gather_rows index " + std::to_string(idx[i]) + " outside " + T.shape_string());
    }
    std::copy_n(&T.data[static_cast<std::size_t>(idx[i]) * e], e, &out.data[i * e]);
  }
  const std::size_t it = table.id;
  return table.tape->record(std::move(out), {table},
                            [it, idx = std::move(idx), e](Tape& t, std::size_t self) {
                              const Tensor& g = t.grad(self);
                              Tensor& gt = t.grad_buffer(it);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                double* row = &gt.data[static_cast<std::size_t>(idx[i]) * e];
                                for (std::size_t j = 0; j < e; ++j) row[j] += g.data[i * e + j];
                              }
                            },
                            "gather_rows");
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(Var a) {
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sign(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data[i] = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
  }
  return a.tape->constant(std::move(out));
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data) s += v;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor::scalar(s), {a},
                        [ia](Tape& t, std::size_t self) {
                          const double g = t.grad(self).item();
                          for (double& v : t.grad_buffer(ia).data) v += g;
                        },
                        "sum");
}

Var mean(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data) s += v;
  const double n = static_cast<double>(x.size());
  const std::size_t ia = a.id;
  return a.tape->record(Tensor::scalar(s / n), {a},
                        [ia, n](Tape& t, std::size_t self) {
                          const double g = t.grad(self).item() / n;
                          for (double& v : t.grad_buffer(ia).data) v += g;
                        },
                        "mean");
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& L = logits.value();
  require_matrix("softmax_cross_entropy", L);
  const std::size_t n = L.rows(), v = L.cols();
  if (targets.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "softmax_cross_entropy: " + std::to_string(targets.size()) +
                                              " targets for " + L.shape_string());
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  Tensor probs({n, v});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= v) {
      throw Error(ErrorCode::ShapeMismatch, "target index " + std::to_string(tgt[i]) + " out of range");
    }
    const double* row = &L.data[i * v];
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < v; ++j) probs.data[i * v + j] = std::exp(row[j] - lse);
    total += lse - row[tgt[i]];
  }
  const std::size_t il = logits.id;
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), {logits},
      [il, probs = std::move(probs), tgt = std::move(tgt), n, v](Tape& t, std::size_t self) {
        const double g = t.grad(self).item() / static_cast<double>(n);
        Tensor& gl = t.grad_buffer(il);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < v; ++j) {
            const double onehot = static_cast<std::size_t>(tgt[i]) == j ? 1.0 : 0.0;
            gl.data[i * v + j] += g * (probs.data[i * v + j] - onehot);
          }
        }
      },
      "softmax_cross_entropy");
}

Var binary_cross_entropy(Var probs, const Tensor& targets, double floor) {
  const Tensor& P = probs.value();
  if (P.size() != targets.size()) shape_error("binary_cross_entropy", P, targets);
  const double n = static_cast<double>(P.size());
  double total = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double p = P.data[i], y = targets.data[i];
    double term = 0.0;
    if (y != 0.0) term += y * std::log(std::max(p, floor));
    if (y != 1.0) term += (1.0 - y) * std::log(std::max(1.0 - p, floor));
    total -= term;
  }
  const std::size_t ip = probs.id;
  return probs.tape->record(
      Tensor::scalar(total / n), {probs},
      [ip, targets, n, floor](Tape& t, std::size_t self) {
        const double g = t.grad(self).item() / n;
        const Tensor& P = t.value(ip);
        Tensor& gp = t.grad_buffer(ip);
        for (std::size_t i = 0; i < P.size(); ++i) {
          const double p = P.data[i], y = targets.data[i];
          double d = 0.0;
          if (y != 0.0 && p > floor) d -= y / p;
          if (y != 1.0 && 1.0 - p > floor) d += (1.0 - y) / (1.0 - p);
          gp.data[i] += g * d;
        }
      },
      "binary_cross_entropy");
}

Var pairwise_diff(Var column) {
  const Tensor& x = column.value();
  require_matrix("pairwise_diff", x);
  if (x.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "pairwise_diff needs [n,1], got " + x.shape_string());
  const std::size_t n = x.rows();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = x.data[i] - x.data[j];
  }
  const std::size_t ix = column.id;
  return column.tape->record(std::move(out), {column},
                             [ix, n](Tape& t, std::size_t self) {
                               const Tensor& g = t.grad(self);
                               Tensor& gx = t.grad_buffer(ix);
                               for (std::size_t i = 0; i < n; ++i) {
                                 for (std::size_t j = 0; j < n; ++j) {
                                   gx.data[i] += g.data[i * n + j];
                                   gx.data[j] -= g.data[i * n + j];
                                 }
                               }
                             },
                             "pairwise_diff");
}

}  // namespace lsrlab::ndgrad
