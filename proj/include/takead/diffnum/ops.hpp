#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "takead/diffnum/tape.hpp"

namespace takead::diffnum {

namespace detail {

inline void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

inline std::string shapes(const Tape& t, std::initializer_list<Var> vs) {
  std::string s;
  for (Var v : vs) s += (s.empty() ? "" : " x ") + shape_str(t.value(v).shape());
  return s;
}

// Numerically stable log(sigmoid(x)).
inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

using detail::log_sigmoid;
using detail::sigmoid;

// x[n, in] (or [in]) * w[in, out] + b[out]
inline Var linear(Tape& t, Var x, Var w, Var b) {
  const Tensor& X = t.value(x);
  const Tensor& W = t.value(w);
  const Tensor& B = t.value(b);
  detail::require(W.shape().size() == 2 && X.cols() == W.rows() && B.size() == W.cols(), "linear",
                  "shape mismatch " + detail::shapes(t, {x, w, b}));
  const std::size_t n = X.rows(), in = W.rows(), out = W.cols();
  Tensor Y = X.shape().size() == 1 ? Tensor(Shape{out}) : Tensor(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    double* y = Y.data() + r * out;
    for (std::size_t j = 0; j < out; ++j) y[j] = B[j];
    const double* xr = X.data() + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wr = W.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) y[j] += xv * wr[j];
    }
  }
  return t.record(std::move(Y), {x, w, b}, [x, w, b, n, in, out](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const Tensor& X = tp.value(x);
    const Tensor& W = tp.value(w);
    if (Tensor* gx = tp.grad_sink(x)) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < in; ++k) {
          double s = 0.0;
          const double* wr = W.data() + k * out;
          const double* g = G.data() + r * out;
          for (std::size_t j = 0; j < out; ++j) s += g[j] * wr[j];
          (*gx)[r * in + k] += s;
        }
    }
    if (Tensor* gw = tp.grad_sink(w)) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < in; ++k) {
          const double xv = X[r * in + k];
          if (xv == 0.0) continue;
          double* dst = gw->data() + k * out;
          const double* g = G.data() + r * out;
          for (std::size_t j = 0; j < out; ++j) dst[j] += xv * g[j];
        }
    }
    if (Tensor* gb = tp.grad_sink(b)) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < out; ++j) (*gb)[j] += G[r * out + j];
    }
  });
}

namespace detail {

template <class F, class D>
Var unary(Tape& t, Var x, F f, D df_from_xy) {
  const Tensor& X = t.value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = f(X[i]);
  return t.record(std::move(Y), {x}, [x, df_from_xy](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const Tensor& G = tp.grad(self);
    const Tensor& X = tp.value(x);
    const Tensor& Y = tp.value(Var{self});
    for (std::size_t i = 0; i < G.size(); ++i) (*gx)[i] += G[i] * df_from_xy(X[i], Y[i]);
  });
}

}  // namespace detail

inline Var relu(Tape& t, Var x) {
  return detail::unary(
      t, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(Tape& t, Var x) {
  return detail::unary(
      t, x, [](double v) { return detail::sigmoid(v); }, [](double, double y) { return y * (1.0 - y); });
}

inline Var log_sigmoid(Tape& t, Var x) {
  return detail::unary(
      t, x, [](double v) { return detail::log_sigmoid(v); },
      [](double xv, double) { return detail::sigmoid(-xv); });
}

inline Var log(Tape& t, Var x) {
  for (double v : t.value(x).values())
    detail::require(v > 0.0, "log", "non-positive input in tensor " + shape_str(t.value(x).shape()));
  return detail::unary(
      t, x, [](double v) { return std::log(v); }, [](double xv, double) { return 1.0 / xv; });
}

inline Var scale(Tape& t, Var x, double c) {
  return detail::unary(
      t, x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Var add_scalar(Tape& t, Var x, double c) {
  return detail::unary(
      t, x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

// a + b with identical shapes, or b a single row broadcast over the rows of a.
inline Var add(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  const bool same = A.same_shape(B);
  const bool bcast = !same && B.rows() == 1 && B.cols() == A.cols();
  detail::require(same || bcast, "add", "shape mismatch " + detail::shapes(t, {a, b}));
  Tensor Y = A;
  const std::size_t c = A.cols();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += same ? B[i] : B[i % c];
  return t.record(std::move(Y), {a, b}, [a, b, same, c](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (Tensor* ga = tp.grad_sink(a))
      for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
    if (Tensor* gb = tp.grad_sink(b))
      for (std::size_t i = 0; i < G.size(); ++i) (*gb)[same ? i : i % c] += G[i];
  });
}

inline Var sub(Tape& t, Var a, Var b) { return add(t, a, scale(t, b, -1.0)); }

// Column-wise concatenation; both inputs must have the same row count.
inline Var concat(Tape& t, Var a, Var b) {
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  detail::require(A.rows() == B.rows() && A.shape().size() == B.shape().size(), "concat",
                  "row mismatch " + detail::shapes(t, {a, b}));
  const std::size_t n = A.rows(), ca = A.cols(), cb = B.cols();
  Tensor Y = A.shape().size() == 1 ? Tensor(Shape{ca + cb}) : Tensor(n, ca + cb);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < ca; ++j) Y[r * (ca + cb) + j] = A[r * ca + j];
    for (std::size_t j = 0; j < cb; ++j) Y[r * (ca + cb) + ca + j] = B[r * cb + j];
  }
  return t.record(std::move(Y), {a, b}, [a, b, n, ca, cb](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (Tensor* ga = tp.grad_sink(a))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < ca; ++j) (*ga)[r * ca + j] += G[r * (ca + cb) + j];
    if (Tensor* gb = tp.grad_sink(b))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < cb; ++j) (*gb)[r * cb + j] += G[r * (ca + cb) + ca + j];
  });
}

namespace detail {

inline void softmax_row(const double* x, double* y, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) m = std::max(m, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - m);
    s += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] /= s;
}

}  // namespace detail

// Row-wise softmax (the whole vector for rank-1 inputs).
inline Var softmax(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor Y(X.shape());
  const std::size_t n = X.rows(), c = X.cols();
  for (std::size_t r = 0; r < n; ++r) detail::softmax_row(X.data() + r * c, Y.data() + r * c, c);
  return t.record(std::move(Y), {x}, [x, n, c](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const Tensor& G = tp.grad(self);
    const Tensor& Y = tp.value(Var{self});
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += G[r * c + j] * Y[r * c + j];
      for (std::size_t j = 0; j < c; ++j) (*gx)[r * c + j] += Y[r * c + j] * (G[r * c + j] - dot);
    }
  });
}

inline Var log_softmax(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  Tensor Y(X.shape());
  const std::size_t n = X.rows(), c = X.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = X.data() + r * c;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(xr[j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) Y[r * c + j] = xr[j] - lse;
  }
  return t.record(std::move(Y), {x}, [x, n, c](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const Tensor& G = tp.grad(self);
    const Tensor& Y = tp.value(Var{self});
    for (std::size_t r = 0; r < n; ++r) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += G[r * c + j];
      for (std::size_t j = 0; j < c; ++j) (*gx)[r * c + j] += G[r * c + j] - std::exp(Y[r * c + j]) * gs;
    }
  });
}

inline Var sum(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  double s = 0.0;
  for (double v : X.values()) s += v;
  return t.record(Tensor::scalar(s), {x}, [x](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const double g = tp.grad(self)[0];
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

inline Var mean(Tape& t, Var x) { return scale(t, sum(t, x), 1.0 / static_cast<double>(t.value(x).size())); }

// Sum over w_i * x_i for a constant weight vector w.
inline Var dot_const(Tape& t, Var x, std::span<const double> w) {
  const Tensor& X = t.value(x);
  detail::require(X.size() == w.size(), "dot_const",
                  "size mismatch " + shape_str(X.shape()) + " vs " + std::to_string(w.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * X[i];
  std::vector<double> wc(w.begin(), w.end());
  return t.record(Tensor::scalar(s), {x}, [x, wc = std::move(wc)](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const double g = tp.grad(self)[0];
    for (std::size_t i = 0; i < wc.size(); ++i) (*gx)[i] += g * wc[i];
  });
}

// Flat element i as a [1] tensor.
inline Var gather(Tape& t, Var x, std::size_t i) {
  const Tensor& X = t.value(x);
  detail::require(i < X.size(), "gather", "index " + std::to_string(i) + " out of range for " + shape_str(X.shape()));
  return t.record(Tensor::scalar(X[i]), {x}, [x, i](Tape& tp, int self) {
    if (Tensor* gx = tp.grad_sink(x)) (*gx)[i] += tp.grad(self)[0];
  });
}

// Flat elements [begin, begin + count) as a rank-1 tensor.
inline Var slice(Tape& t, Var x, std::size_t begin, std::size_t count) {
  const Tensor& X = t.value(x);
  detail::require(count > 0 && begin + count <= X.size(), "slice",
                  "range [" + std::to_string(begin) + "," + std::to_string(begin + count) + ") out of " +
                      shape_str(X.shape()));
  Tensor Y(Shape{count});
  for (std::size_t j = 0; j < count; ++j) Y[j] = X[begin + j];
  return t.record(std::move(Y), {x}, [x, begin, count](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const Tensor& G = tp.grad(self);
    for (std::size_t j = 0; j < count; ++j) (*gx)[begin + j] += G[j];
  });
}

// Broadcasts a single row to `rows` rows.
inline Var repeat_rows(Tape& t, Var x, std::size_t rows) {
  const Tensor& X = t.value(x);
  detail::require(X.rows() == 1 && rows > 0, "repeat_rows", "expects one row, got " + shape_str(X.shape()));
  const std::size_t c = X.cols();
  Tensor Y(rows, c);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) Y[r * c + j] = X[j];
  return t.record(std::move(Y), {x}, [x, rows, c](Tape& tp, int self) {
    Tensor* gx = tp.grad_sink(x);
    if (!gx) return;
    const Tensor& G = tp.grad(self);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) (*gx)[j] += G[r * c + j];
  });
}

// Single-head scaled dot-product attention:
//   softmax(q k^T / sqrt(d)) v, with masked keys given zero weight.
// A query row whose keys are all masked yields a zero row.
inline Var scaled_dot_attention(Tape& t, Var q, Var k, Var v, std::vector<bool> mask = {}) {
  const Tensor& Q = t.value(q);
  const Tensor& K = t.value(k);
  const Tensor& V = t.value(v);
  detail::require(Q.cols() == K.cols() && K.rows() == V.rows(), "scaled_dot_attention",
                  "shape mismatch " + detail::shapes(t, {q, k, v}));
  const std::size_t n = Q.rows(), m = K.rows(), d = Q.cols(), dv = V.cols();
  if (mask.empty()) mask.assign(m, true);
  detail::require(mask.size() == m, "scaled_dot_attention",
                  "mask length " + std::to_string(mask.size()) + " != key count " + std::to_string(m));
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < m; ++j)
    if (mask[j]) live.push_back(j);

  auto P = std::make_shared<std::vector<double>>(n * live.size(), 0.0);
  Tensor O = Q.shape().size() == 1 ? Tensor(Shape{dv}) : Tensor(n, dv);
  if (!live.empty()) {
    std::vector<double> s(live.size());
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t a = 0; a < live.size(); ++a) {
        double dot = 0.0;
        const double* qr = Q.data() + r * d;
        const double* kr = K.data() + live[a] * d;
        for (std::size_t c = 0; c < d; ++c) dot += qr[c] * kr[c];
        s[a] = dot * inv;
      }
      double* pr = P->data() + r * live.size();
      detail::softmax_row(s.data(), pr, live.size());
      double* orow = O.data() + r * dv;
      for (std::size_t a = 0; a < live.size(); ++a) {
        const double* vr = V.data() + live[a] * dv;
        for (std::size_t c = 0; c < dv; ++c) orow[c] += pr[a] * vr[c];
      }
    }
  }
  return t.record(std::move(O), {q, k, v}, [q, k, v, n, d, dv, inv, live, P](Tape& tp, int self) {
    if (live.empty()) return;
    const Tensor& G = tp.grad(self);
    const Tensor& Q = tp.value(q);
    const Tensor& K = tp.value(k);
    const Tensor& V = tp.value(v);
    Tensor* gq = tp.grad_sink(q);
    Tensor* gk = tp.grad_sink(k);
    Tensor* gv = tp.grad_sink(v);
    const std::size_t L = live.size();
    std::vector<double> dp(L), ds(L);
    for (std::size_t r = 0; r < n; ++r) {
      const double* pr = P->data() + r * L;
      const double* gr = G.data() + r * dv;
      double acc = 0.0;
      for (std::size_t a = 0; a < L; ++a) {
        const double* vr = V.data() + live[a] * dv;
        double s = 0.0;
        for (std::size_t c = 0; c < dv; ++c) s += gr[c] * vr[c];
        dp[a] = s;
        acc += s * pr[a];
        if (gv) {
          double* dst = gv->data() + live[a] * dv;
          for (std::size_t c = 0; c < dv; ++c) dst[c] += pr[a] * gr[c];
        }
      }
      for (std::size_t a = 0; a < L; ++a) ds[a] = pr[a] * (dp[a] - acc) * inv;
      if (gq) {
        double* dst = gq->data() + r * d;
        for (std::size_t a = 0; a < L; ++a) {
          const double* kr = K.data() + live[a] * d;
          for (std::size_t c = 0; c < d; ++c) dst[c] += ds[a] * kr[c];
        }
      }
      if (gk) {
        const double* qr = Q.data() + r * d;
        for (std::size_t a = 0; a < L; ++a) {
          double* dst = gk->data() + live[a] * d;
          for (std::size_t c = 0; c < d; ++c) dst[c] += ds[a] * qr[c];
        }
      }
    }
  });
}

enum class OpKind { Linear, Relu, Softmax, Sigmoid, Log, Mean, Concat, Add, ScaledDotAttention };

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Linear: return "linear";
    case OpKind::Relu: return "relu";
    case OpKind::Softmax: return "softmax";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Log: return "log";
    case OpKind::Mean: return "mean";
    case OpKind::Concat: return "concat";
    case OpKind::Add: return "add";
    case OpKind::ScaledDotAttention: return "scaled_dot_attention";
  }
  return "?";
}

// Generic entry point over the primitive set; the typed functions above are
// what model code calls directly.
inline Var forward_primitive(Tape& t, OpKind kind, std::span<const Var> in) {
  auto arity = [&](std::size_t n) {
    detail::require(in.size() == n, op_name(kind),
                    "expects " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
  };
  switch (kind) {
    case OpKind::Linear: arity(3); return linear(t, in[0], in[1], in[2]);
    case OpKind::Relu: arity(1); return relu(t, in[0]);
    case OpKind::Softmax: arity(1); return softmax(t, in[0]);
    case OpKind::Sigmoid: arity(1); return sigmoid(t, in[0]);
    case OpKind::Log: arity(1); return log(t, in[0]);
    case OpKind::Mean: arity(1); return mean(t, in[0]);
    case OpKind::Concat: arity(2); return concat(t, in[0], in[1]);
    case OpKind::Add: arity(2); return add(t, in[0], in[1]);
    case OpKind::ScaledDotAttention: arity(3); return scaled_dot_attention(t, in[0], in[1], in[2]);
  }
  throw std::invalid_argument("unknown op");
}

}  // namespace takead::diffnum
