#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uav/errors.hpp"
#include "uav/tensor.hpp"

namespace uav {

// Thread-local switch: with grads disabled no tape is recorded (inference).
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev; }
};

template <class S>
bool want_grad(const Tensor<S>& t) {
  return grad_enabled_flag() && t.requires_grad;
}

template <class S>
void check_finite(const Tensor<S>& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite values");
}

template <class S>
void expect_matrix(const Tensor<S>& t, const char* what) {
  if (t.shape.size() != 2) throw DimensionError(std::string(what) + ": expected a 2-d tensor");
}

template <class S>
void expect_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
  if (a.shape != b.shape) throw DimensionError(std::string(what) + ": shape mismatch");
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  expect_same_shape(a, b, "add");
  Tensor<S> out = Tensor<S>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      Tensor<S>& pb = o.node->parents[1];
      const std::size_t m = o.numel();
      if (pa.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i];
      if (pb.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pb.grad)[i] += (*o.grad)[i];
    };
  }
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  expect_same_shape(a, b, "sub");
  Tensor<S> out = Tensor<S>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) - b.at(i);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      Tensor<S>& pb = o.node->parents[1];
      const std::size_t m = o.numel();
      if (pa.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i];
      if (pb.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pb.grad)[i] -= (*o.grad)[i];
    };
  }
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  expect_same_shape(a, b, "mul");
  Tensor<S> out = Tensor<S>::zeros(a.shape, want_grad(a) || want_grad(b));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a, b};
    out.node->backward = [](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      Tensor<S>& pb = o.node->parents[1];
      const std::size_t m = o.numel();
      if (pa.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i] * pb.at(i);
      if (pb.requires_grad)
        for (std::size_t i = 0; i < m; ++i) (*pb.grad)[i] += (*o.grad)[i] * pa.at(i);
    };
  }
  return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, double c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape, want_grad(a));
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * static_cast<S>(c);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a};
    out.node->backward = [c](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      if (!pa.requires_grad) return;
      const std::size_t m = o.numel();
      for (std::size_t i = 0; i < m; ++i) (*pa.grad)[i] += (*o.grad)[i] * static_cast<S>(c);
    };
  }
  return out;
}

// x [T, D] + v [D] broadcast over rows.
template <class S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& v) {
  expect_matrix(x, "add_rowvec");
  if (v.shape.size() != 1 || v.shape[0] != x.cols())
    throw DimensionError("add_rowvec: vector width must match matrix columns");
  Tensor<S> out = Tensor<S>::zeros(x.shape, want_grad(x) || want_grad(v));
  const int T = x.rows(), D = x.cols();
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d)
      out.at(static_cast<std::size_t>(t) * D + d) = x.at(static_cast<std::size_t>(t) * D + d) + v.at(d);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x, v};
    out.node->backward = [T, D](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      Tensor<S>& pv = o.node->parents[1];
      if (px.requires_grad)
        for (std::size_t i = 0; i < o.numel(); ++i) (*px.grad)[i] += (*o.grad)[i];
      if (pv.requires_grad)
        for (int t = 0; t < T; ++t)
          for (int d = 0; d < D; ++d) (*pv.grad)[d] += (*o.grad)[static_cast<std::size_t>(t) * D + d];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <class S>
void matmul_accum(const S* a, const S* b, S* c, int m, int k, int n) {
  // c [m,n] += a [m,k] * b [k,n]; ikj order keeps the inner loop contiguous
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<std::size_t>(i) * k;
    S* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  expect_matrix(a, "matmul");
  expect_matrix(b, "matmul");
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions disagree");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<S> out = Tensor<S>::zeros({m, n}, want_grad(a) || want_grad(b));
  matmul_accum(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a, b};
    out.node->backward = [m, k, n](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      Tensor<S>& pb = o.node->parents[1];
      const S* g = o.grad->data();
      if (pa.requires_grad) {
        // dA += dC * B^T
        const S* bd = pb.data->data();
        S* ga = pa.grad->data();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const S gv = g[static_cast<std::size_t>(i) * n + j];
            if (gv == S(0)) continue;
            const S* brow = bd + static_cast<std::size_t>(j);
            for (int p = 0; p < k; ++p) ga[static_cast<std::size_t>(i) * k + p] += gv * brow[static_cast<std::size_t>(p) * n];
          }
      }
      if (pb.requires_grad) {
        // dB += A^T * dC
        const S* ad = pa.data->data();
        S* gb = pb.grad->data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const S av = ad[static_cast<std::size_t>(i) * k + p];
            if (av == S(0)) continue;
            const S* grow = g + static_cast<std::size_t>(i) * n;
            S* brow = gb + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    };
  }
  return out;
}

// a [m,k] * b^T where b is [n,k]; yields [m,n].
template <class S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  expect_matrix(a, "matmul_nt");
  expect_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: widths disagree");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<S> out = Tensor<S>::zeros({m, n}, want_grad(a) || want_grad(b));
  for (int i = 0; i < m; ++i) {
    const S* arow = a.data->data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const S* brow = b.data->data() + static_cast<std::size_t>(j) * k;
      S acc = S(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out.at(static_cast<std::size_t>(i) * n + j) = acc;
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {a, b};
    out.node->backward = [m, k, n](Tensor<S>& o) {
      Tensor<S>& pa = o.node->parents[0];
      Tensor<S>& pb = o.node->parents[1];
      const S* g = o.grad->data();
      if (pa.requires_grad) {
        // dA += dC * B
        matmul_accum(g, pb.data->data(), pa.grad->data(), m, n, k);
      }
      if (pb.requires_grad) {
        // dB += dC^T * A
        const S* ad = pa.data->data();
        S* gb = pb.grad->data();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const S gv = g[static_cast<std::size_t>(i) * n + j];
            if (gv == S(0)) continue;
            const S* arow = ad + static_cast<std::size_t>(i) * k;
            S* brow = gb + static_cast<std::size_t>(j) * k;
            for (int p = 0; p < k; ++p) brow[p] += gv * arow[p];
          }
      }
    };
  }
  return out;
}

template <class S>
Tensor<S> transpose(const Tensor<S>& x) {
  expect_matrix(x, "transpose");
  const int m = x.rows(), n = x.cols();
  Tensor<S> out = Tensor<S>::zeros({n, m}, want_grad(x));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.at(static_cast<std::size_t>(j) * m + i) = x.at(static_cast<std::size_t>(i) * n + j);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [m, n](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          (*px.grad)[static_cast<std::size_t>(i) * n + j] += (*o.grad)[static_cast<std::size_t>(j) * m + i];
    };
  }
  return out;
}

template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add_rowvec(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// row selection / assembly
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<int>& idx) {
  expect_matrix(x, "gather_rows");
  const int T = x.rows(), D = x.cols();
  for (int i : idx)
    if (i < 0 || i >= T) throw GeometryError("gather_rows: index out of range");
  Tensor<S> out = Tensor<S>::zeros({static_cast<int>(idx.size()), D}, want_grad(x));
  for (std::size_t j = 0; j < idx.size(); ++j)
    std::copy_n(x.data->data() + static_cast<std::size_t>(idx[j]) * D, D, out.data->data() + j * D);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [idx, D](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (std::size_t j = 0; j < idx.size(); ++j)
        for (int d = 0; d < D; ++d)
          (*px.grad)[static_cast<std::size_t>(idx[j]) * D + d] += (*o.grad)[j * D + d];
    };
  }
  return out;
}

// Places rows[j] at position idx[j] of a [total, D] output and the fill
// vector everywhere else. Fill receives the summed gradient of its copies.
template <class S>
Tensor<S> scatter_rows_fill(const Tensor<S>& rows, const std::vector<int>& idx, const Tensor<S>& fill,
                            int total) {
  expect_matrix(rows, "scatter_rows_fill");
  const int D = rows.cols();
  if (fill.shape.size() != 1 || fill.shape[0] != D)
    throw DimensionError("scatter_rows_fill: fill width must match row width");
  if (static_cast<int>(idx.size()) != rows.rows())
    throw GeometryError("scatter_rows_fill: index count must match row count");
  std::vector<char> used(static_cast<std::size_t>(total), 0);
  for (int i : idx) {
    if (i < 0 || i >= total) throw GeometryError("scatter_rows_fill: index out of range");
    if (used[static_cast<std::size_t>(i)]) throw GeometryError("scatter_rows_fill: duplicate index");
    used[static_cast<std::size_t>(i)] = 1;
  }
  Tensor<S> out = Tensor<S>::zeros({total, D}, want_grad(rows) || want_grad(fill));
  for (int t = 0; t < total; ++t)
    if (!used[static_cast<std::size_t>(t)])
      std::copy_n(fill.data->data(), D, out.data->data() + static_cast<std::size_t>(t) * D);
  for (std::size_t j = 0; j < idx.size(); ++j)
    std::copy_n(rows.data->data() + j * D, D, out.data->data() + static_cast<std::size_t>(idx[j]) * D);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {rows, fill};
    out.node->backward = [idx, used, total, D](Tensor<S>& o) {
      Tensor<S>& prows = o.node->parents[0];
      Tensor<S>& pfill = o.node->parents[1];
      if (prows.requires_grad)
        for (std::size_t j = 0; j < idx.size(); ++j)
          for (int d = 0; d < D; ++d)
            (*prows.grad)[j * D + d] += (*o.grad)[static_cast<std::size_t>(idx[j]) * D + d];
      if (pfill.requires_grad)
        for (int t = 0; t < total; ++t)
          if (!used[static_cast<std::size_t>(t)])
            for (int d = 0; d < D; ++d) (*pfill.grad)[d] += (*o.grad)[static_cast<std::size_t>(t) * D + d];
    };
  }
  return out;
}

template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const int D = parts[0].cols();
  int total = 0;
  bool rg = false;
  for (const Tensor<S>& p : parts) {
    expect_matrix(p, "concat_rows");
    if (p.cols() != D) throw DimensionError("concat_rows: width mismatch");
    total += p.rows();
    rg = rg || want_grad(p);
  }
  Tensor<S> out = Tensor<S>::zeros({total, D}, rg);
  std::size_t off = 0;
  for (const Tensor<S>& p : parts) {
    std::copy_n(p.data->data(), p.numel(), out.data->data() + off);
    off += p.numel();
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = parts;
    out.node->backward = [](Tensor<S>& o) {
      std::size_t pos = 0;
      for (Tensor<S>& p : o.node->parents) {
        if (p.requires_grad)
          for (std::size_t i = 0; i < p.numel(); ++i) (*p.grad)[i] += (*o.grad)[pos + i];
        pos += p.numel();
      }
    };
  }
  return out;
}

// 1-d vectors [D] stacked into [B, D].
template <class S>
Tensor<S> stack_vecs(const std::vector<Tensor<S>>& vecs) {
  if (vecs.empty()) throw DimensionError("stack_vecs: nothing to stack");
  const int D = vecs[0].shape.empty() ? 0 : vecs[0].shape[0];
  bool rg = false;
  for (const Tensor<S>& v : vecs) {
    if (v.shape.size() != 1 || v.shape[0] != D) throw DimensionError("stack_vecs: width mismatch");
    rg = rg || want_grad(v);
  }
  Tensor<S> out = Tensor<S>::zeros({static_cast<int>(vecs.size()), D}, rg);
  for (std::size_t i = 0; i < vecs.size(); ++i)
    std::copy_n(vecs[i].data->data(), D, out.data->data() + i * D);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = vecs;
    out.node->backward = [D](Tensor<S>& o) {
      for (std::size_t i = 0; i < o.node->parents.size(); ++i) {
        Tensor<S>& p = o.node->parents[i];
        if (!p.requires_grad) continue;
        for (int d = 0; d < D; ++d) (*p.grad)[d] += (*o.grad)[i * D + d];
      }
    };
  }
  return out;
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& x, int c0, int width) {
  expect_matrix(x, "slice_cols");
  const int T = x.rows(), D = x.cols();
  if (c0 < 0 || width <= 0 || c0 + width > D) throw DimensionError("slice_cols: invalid column range");
  Tensor<S> out = Tensor<S>::zeros({T, width}, want_grad(x));
  for (int t = 0; t < T; ++t)
    std::copy_n(x.data->data() + static_cast<std::size_t>(t) * D + c0, width,
                out.data->data() + static_cast<std::size_t>(t) * width);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [T, D, c0, width](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < width; ++j)
          (*px.grad)[static_cast<std::size_t>(t) * D + c0 + j] += (*o.grad)[static_cast<std::size_t>(t) * width + j];
    };
  }
  return out;
}

template <class S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const int T = parts[0].rows();
  int D = 0;
  bool rg = false;
  for (const Tensor<S>& p : parts) {
    expect_matrix(p, "concat_cols");
    if (p.rows() != T) throw DimensionError("concat_cols: row mismatch");
    D += p.cols();
    rg = rg || want_grad(p);
  }
  Tensor<S> out = Tensor<S>::zeros({T, D}, rg);
  int c0 = 0;
  for (const Tensor<S>& p : parts) {
    const int w = p.cols();
    for (int t = 0; t < T; ++t)
      std::copy_n(p.data->data() + static_cast<std::size_t>(t) * w, w,
                  out.data->data() + static_cast<std::size_t>(t) * D + c0);
    c0 += w;
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = parts;
    out.node->backward = [T, D](Tensor<S>& o) {
      int base = 0;
      for (Tensor<S>& p : o.node->parents) {
        const int w = p.cols();
        if (p.requires_grad)
          for (int t = 0; t < T; ++t)
            for (int j = 0; j < w; ++j)
              (*p.grad)[static_cast<std::size_t>(t) * w + j] += (*o.grad)[static_cast<std::size_t>(t) * D + base + j];
        base += w;
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

// Arithmetic mean over the token axis: [T, D] -> [D].
template <class S>
Tensor<S> mean_rows(const Tensor<S>& x) {
  expect_matrix(x, "mean_rows");
  const int T = x.rows(), D = x.cols();
  if (T < 1) throw PreconditionError("mean_rows: empty pool (no rows)");
  Tensor<S> out = Tensor<S>::zeros({D}, want_grad(x));
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d) out.at(d) += x.at(static_cast<std::size_t>(t) * D + d);
  const S inv = S(1) / static_cast<S>(T);
  for (int d = 0; d < D; ++d) out.at(d) *= inv;
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [T, D, inv](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (int t = 0; t < T; ++t)
        for (int d = 0; d < D; ++d) (*px.grad)[static_cast<std::size_t>(t) * D + d] += (*o.grad)[d] * inv;
    };
  }
  return out;
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw PreconditionError("mean_all: empty tensor");
  Tensor<S> out = Tensor<S>::zeros({1}, want_grad(x));
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) acc += x.at(i);
  out.at(0) = acc / static_cast<S>(n);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [n](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      const S g = (*o.grad)[0] / static_cast<S>(n);
      for (std::size_t i = 0; i < n; ++i) (*px.grad)[i] += g;
    };
  }
  return out;
}

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
  const std::size_t n = x.numel();
  Tensor<S> out = Tensor<S>::zeros({1}, want_grad(x));
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) acc += x.at(i);
  out.at(0) = acc;
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [n](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      const S g = (*o.grad)[0];
      for (std::size_t i = 0; i < n; ++i) (*px.grad)[i] += g;
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// nonlinearities and normalization
// ---------------------------------------------------------------------------

// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
// The approximation is pinned so an independent reference can match bit-for-bit.
template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  Tensor<S> out = Tensor<S>::zeros(x.shape, want_grad(x));
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x.at(i));
    const double u = kC * (v + kA * v * v * v);
    out.at(i) = static_cast<S>(0.5 * v * (1.0 + std::tanh(u)));
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [n](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(px.at(i));
        const double u = kC * (v + kA * v * v * v);
        const double th = std::tanh(u);
        const double du = kC * (1.0 + 3.0 * kA * v * v);
        const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
        (*px.grad)[i] += (*o.grad)[i] * static_cast<S>(d);
      }
    };
  }
  return out;
}

// Row-wise layer normalization with affine, eps inside the square root.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     double eps = 1e-5) {
  expect_matrix(x, "layer_norm");
  const int T = x.rows(), D = x.cols();
  if (gamma.shape.size() != 1 || gamma.shape[0] != D || beta.shape.size() != 1 || beta.shape[0] != D)
    throw DimensionError("layer_norm: affine parameters must be [D]");
  Tensor<S> out = Tensor<S>::zeros(x.shape, want_grad(x) || want_grad(gamma) || want_grad(beta));
  // normalized activations are kept for the backward pass
  auto xhat = std::make_shared<std::vector<S>>(x.numel());
  auto inv_std = std::make_shared<std::vector<S>>(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const S* row = x.data->data() + static_cast<std::size_t>(t) * D;
    S mu = S(0);
    for (int d = 0; d < D; ++d) mu += row[d];
    mu /= static_cast<S>(D);
    S var = S(0);
    for (int d = 0; d < D; ++d) {
      const S c = row[d] - mu;
      var += c * c;
    }
    var /= static_cast<S>(D);
    const S istd = S(1) / static_cast<S>(std::sqrt(static_cast<double>(var) + eps));
    (*inv_std)[static_cast<std::size_t>(t)] = istd;
    for (int d = 0; d < D; ++d) {
      const S h = (row[d] - mu) * istd;
      (*xhat)[static_cast<std::size_t>(t) * D + d] = h;
      out.at(static_cast<std::size_t>(t) * D + d) = gamma.at(d) * h + beta.at(d);
    }
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x, gamma, beta};
    out.node->backward = [T, D, xhat, inv_std](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      Tensor<S>& pg = o.node->parents[1];
      Tensor<S>& pb = o.node->parents[2];
      for (int t = 0; t < T; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * D;
        const S istd = (*inv_std)[static_cast<std::size_t>(t)];
        if (pg.requires_grad || pb.requires_grad) {
          for (int d = 0; d < D; ++d) {
            const S g = (*o.grad)[base + d];
            if (pg.requires_grad) (*pg.grad)[d] += g * (*xhat)[base + d];
            if (pb.requires_grad) (*pb.grad)[d] += g;
          }
        }
        if (px.requires_grad) {
          // dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
          S m1 = S(0), m2 = S(0);
          for (int d = 0; d < D; ++d) {
            const S dh = (*o.grad)[base + d] * pg.at(d);
            m1 += dh;
            m2 += dh * (*xhat)[base + d];
          }
          m1 /= static_cast<S>(D);
          m2 /= static_cast<S>(D);
          for (int d = 0; d < D; ++d) {
            const S dh = (*o.grad)[base + d] * pg.at(d);
            (*px.grad)[base + d] += istd * (dh - m1 - (*xhat)[base + d] * m2);
          }
        }
      }
    };
  }
  return out;
}

// Row-wise softmax, max-shifted.
template <class S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  expect_matrix(x, "softmax_rows");
  const int T = x.rows(), D = x.cols();
  Tensor<S> out = Tensor<S>::zeros(x.shape, want_grad(x));
  for (int t = 0; t < T; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * D;
    S mx = x.at(base);
    for (int d = 1; d < D; ++d) mx = std::max(mx, x.at(base + d));
    S z = S(0);
    for (int d = 0; d < D; ++d) {
      const S e = static_cast<S>(std::exp(static_cast<double>(x.at(base + d) - mx)));
      out.at(base + d) = e;
      z += e;
    }
    const S inv = S(1) / z;
    for (int d = 0; d < D; ++d) out.at(base + d) *= inv;
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [T, D](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (int t = 0; t < T; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * D;
        S dot = S(0);
        for (int d = 0; d < D; ++d) dot += (*o.grad)[base + d] * o.at(base + d);
        for (int d = 0; d < D; ++d)
          (*px.grad)[base + d] += o.at(base + d) * ((*o.grad)[base + d] - dot);
      }
    };
  }
  return out;
}

// Rows scaled to unit L2 norm. Zero-norm rows are an error: downstream cosine
// similarity is undefined there.
template <class S>
Tensor<S> l2_normalize_rows(const Tensor<S>& x) {
  expect_matrix(x, "l2_normalize_rows");
  const int T = x.rows(), D = x.cols();
  Tensor<S> out = Tensor<S>::zeros(x.shape, want_grad(x));
  auto inv_norm = std::make_shared<std::vector<S>>(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * D;
    double ss = 0.0;
    for (int d = 0; d < D; ++d) ss += static_cast<double>(x.at(base + d)) * static_cast<double>(x.at(base + d));
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw DegenerateEmbeddingError("l2_normalize_rows: zero-norm or non-finite row " + std::to_string(t));
    const S inv = static_cast<S>(1.0 / norm);
    (*inv_norm)[static_cast<std::size_t>(t)] = inv;
    for (int d = 0; d < D; ++d) out.at(base + d) = x.at(base + d) * inv;
  }
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {x};
    out.node->backward = [T, D, inv_norm](Tensor<S>& o) {
      Tensor<S>& px = o.node->parents[0];
      if (!px.requires_grad) return;
      for (int t = 0; t < T; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * D;
        const S inv = (*inv_norm)[static_cast<std::size_t>(t)];
        S dot = S(0);
        for (int d = 0; d < D; ++d) dot += (*o.grad)[base + d] * o.at(base + d);
        for (int d = 0; d < D; ++d)
          (*px.grad)[base + d] += inv * ((*o.grad)[base + d] - o.at(base + d) * dot);
      }
    };
  }
  return out;
}

// Mean over rows of -log softmax(row_i)[i]; the InfoNCE core on a square
// logit matrix with positives on the diagonal.
template <class S>
Tensor<S> cross_entropy_diagonal(const Tensor<S>& logits) {
  expect_matrix(logits, "cross_entropy_diagonal");
  const int B = logits.rows();
  if (logits.cols() != B) throw DimensionError("cross_entropy_diagonal: logits must be square");
  Tensor<S> out = Tensor<S>::zeros({1}, want_grad(logits));
  auto probs = std::make_shared<std::vector<S>>(logits.numel());
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * B;
    S mx = logits.at(base);
    for (int j = 1; j < B; ++j) mx = std::max(mx, logits.at(base + j));
    double z = 0.0;
    for (int j = 0; j < B; ++j) z += std::exp(static_cast<double>(logits.at(base + j) - mx));
    const double logz = std::log(z) + static_cast<double>(mx);
    for (int j = 0; j < B; ++j)
      (*probs)[base + j] = static_cast<S>(std::exp(static_cast<double>(logits.at(base + j)) - logz));
    loss += logz - static_cast<double>(logits.at(base + i));
  }
  out.at(0) = static_cast<S>(loss / B);
  if (out.requires_grad) {
    out.node = std::make_shared<Node<S>>();
    out.node->parents = {logits};
    out.node->backward = [B, probs](Tensor<S>& o) {
      Tensor<S>& pl = o.node->parents[0];
      if (!pl.requires_grad) return;
      const S g = (*o.grad)[0] / static_cast<S>(B);
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) {
          S p = (*probs)[static_cast<std::size_t>(i) * B + j];
          if (j == i) p -= S(1);
          (*pl.grad)[static_cast<std::size_t>(i) * B + j] += g * p;
        }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// attention and the transformer block
// ---------------------------------------------------------------------------

template <class S>
struct BlockParams {
  Tensor<S> ln1_g, ln1_b;
  Tensor<S> qkv_w, qkv_b;    // [D, 3D], [3D]
  Tensor<S> attn_w, attn_b;  // [D, D], [D]
  Tensor<S> ln2_g, ln2_b;
  Tensor<S> fc1_w, fc1_b;    // [D, H], [H]
  Tensor<S> fc2_w, fc2_b;    // [H, D], [D]
};

template <class S>
Tensor<S> multi_head_attention(const Tensor<S>& x, const Tensor<S>& qkv_w, const Tensor<S>& qkv_b,
                               const Tensor<S>& attn_w, const Tensor<S>& attn_b, int heads) {
  expect_matrix(x, "multi_head_attention");
  const int D = x.cols();
  if (heads < 1 || D % heads != 0)
    throw DimensionError("multi_head_attention: width must be divisible by head count");
  const int dh = D / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor<S> qkv = linear(x, qkv_w, qkv_b);  // [T, 3D]
  std::vector<Tensor<S>> head_out;
  head_out.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor<S> q = slice_cols(qkv, h * dh, dh);
    Tensor<S> k = slice_cols(qkv, D + h * dh, dh);
    Tensor<S> v = slice_cols(qkv, 2 * D + h * dh, dh);
    Tensor<S> att = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_dh));
    head_out.push_back(matmul(att, v));
  }
  return linear(concat_cols(head_out), attn_w, attn_b);
}

// Pre-norm residual block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <class S>
Tensor<S> transformer_block(const Tensor<S>& x, const BlockParams<S>& p, int heads) {
  expect_matrix(x, "transformer_block");
  if (x.rows() < 1) throw DimensionError("transformer_block: need at least one token");
  Tensor<S> h = add(x, multi_head_attention(layer_norm(x, p.ln1_g, p.ln1_b), p.qkv_w, p.qkv_b,
                                            p.attn_w, p.attn_b, heads));
  Tensor<S> m = layer_norm(h, p.ln2_g, p.ln2_b);
  Tensor<S> out = add(h, linear(gelu(linear(m, p.fc1_w, p.fc1_b)), p.fc2_w, p.fc2_b));
  check_finite(out, "transformer_block");
  return out;
}

// Spec name for the pooled-token mean; same kernel as mean_rows.
template <class S>
Tensor<S> mean_pool(const Tensor<S>& x) {
  return mean_rows(x);
}

}  // namespace uav
