// Differentiable ops over Var<T>. All ops take row-batched 2-D values:
// rows index samples, columns index features.

#pragma once

#include "smaug/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace smaug {

namespace detail {

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.tape() != b.tape()) throw ArgumentError(std::string(op) + ": operands on different tapes");
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + dims_string(a.value()) + " vs " +
                         dims_string(b.value()));
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value().unaryExpr(fwd);
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  return t.record(std::move(out), {ia}, [ia, iy, deriv](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& x = tp.value(ia);
    const Matrix<T>& y = tp.value(iy);
    tp.grad(ia).array() += g.array() * x.binaryExpr(y, deriv).array();
  });
}

}  // namespace detail

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + dims_string(a.value()) + " x " + dims_string(b.value()));
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.needs_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.needs_grad(ib)) tp.grad(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

/// y = x W^T (+ b). W is [out x in], b is [1 x out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>* b = nullptr) {
  if (x.cols() != w.cols())
    throw DimensionError("linear: input " + dims_string(x.value()) + " vs weight " +
                         dims_string(w.value()));
  if (b && (b->rows() != 1 || b->cols() != w.rows()))
    throw DimensionError("linear: bias " + dims_string(b->value()) + " vs weight " +
                         dims_string(w.value()));
  Tape<T>& t = *x.tape();
  Matrix<T> out = x.value() * w.value().transpose();
  if (b) out.rowwise() += b->value().row(0);
  const int ix = x.id(), iw = w.id(), ib = b ? b->id() : -1;
  std::vector<int> inputs{ix, iw};
  if (b) inputs.push_back(ib);
  return t.record(std::move(out), inputs, [ix, iw, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.needs_grad(ix)) tp.grad(ix).noalias() += g * tp.value(iw);
    if (tp.needs_grad(iw)) tp.grad(iw).noalias() += g.transpose() * tp.value(ix);
    if (ib >= 0 && tp.needs_grad(ib)) tp.grad(ib).row(0) += g.colwise().sum();
  });
}

/// Elementwise a + b; b may also be a [1 x cols] row broadcast over a's rows.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_tape(a, b, "add");
  Tape<T>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  if (b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols()) {
    Matrix<T> out = a.value();
    out.rowwise() += b.value().row(0);
    return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
      if (tp.needs_grad(ia)) tp.grad(ia) += g;
      if (tp.needs_grad(ib)) tp.grad(ib).row(0) += g.colwise().sum();
    });
  }
  detail::require_same_shape(a, b, "add");
  Matrix<T> out = a.value() + b.value();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.needs_grad(ia)) tp.grad(ia) += g;
    if (tp.needs_grad(ib)) tp.grad(ib) += g;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  Tape<T>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Matrix<T> out = a.value() - b.value();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.needs_grad(ia)) tp.grad(ia) += g;
    if (tp.needs_grad(ib)) tp.grad(ib) -= g;
  });
}

/// Elementwise product; b may also be an [rows x 1] column broadcast.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_tape(a, b, "mul");
  Tape<T>& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  if (b.cols() == 1 && a.cols() != 1 && b.rows() == a.rows()) {
    Matrix<T> out = a.value().array().colwise() * b.value().col(0).array();
    return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
      if (tp.needs_grad(ia))
        tp.grad(ia).array() += g.array().colwise() * tp.value(ib).col(0).array();
      if (tp.needs_grad(ib))
        tp.grad(ib).col(0) += (g.array() * tp.value(ia).array()).rowwise().sum().matrix();
    });
  }
  detail::require_same_shape(a, b, "mul");
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.needs_grad(ia)) tp.grad(ia) += g.cwiseProduct(tp.value(ib));
    if (tp.needs_grad(ib)) tp.grad(ib) += g.cwiseProduct(tp.value(ia));
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out = a.value() * s;
  return t.record(std::move(out), {ia},
                  [ia, s](Tape<T>& tp, const Matrix<T>& g) { tp.grad(ia) += g * s; });
}

/// Identity forward; multiplies the incoming gradient by s.
template <typename T>
Var<T> grad_scale(const Var<T>& a, T s) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value(), {ia},
                  [ia, s](Tape<T>& tp, const Matrix<T>& g) { tp.grad(ia) += g * s; });
}

template <typename T>
Var<T> detach(const Var<T>& a) {
  return a.tape()->constant(a.value());
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> elu(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return detail::unary<T>(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

namespace detail {

template <typename T>
Matrix<T> row_log_softmax(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    T s = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) s += std::exp(x(r, c) - m);
    const T lse = m + std::log(s);
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

}  // namespace detail

/// Row-wise softmax, stabilized by subtracting the row max.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& x) {
  return detail::row_log_softmax(x).array().exp().matrix();
}

template <typename T>
Var<T> softmax(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  return t.record(softmax_rows(a.value()), {ia}, [ia, iy](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& y = tp.value(iy);
    const auto dot = (g.array() * y.array()).rowwise().sum();
    tp.grad(ia).array() += y.array() * (g.array().colwise() - dot);
  });
}

template <typename T>
Var<T> log_softmax(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  return t.record(detail::row_log_softmax(a.value()), {ia},
                  [ia, iy](Tape<T>& tp, const Matrix<T>& g) {
                    const Matrix<T> p = tp.value(iy).array().exp().matrix();
                    const auto gsum = g.rowwise().sum();
                    tp.grad(ia) += g - (p.array().colwise() * gsum.array()).matrix();
                  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no operands");
  Tape<T>& t = *parts.front().tape();
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw DimensionError("concat_cols: row mismatch " + dims_string(p.value()) + " vs " +
                           dims_string(parts.front().value()));
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(out), ids, [ids, widths](Tape<T>& tp, const Matrix<T>& g) {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) tp.grad(ids[k]) += g.middleCols(off, widths[k]);
      off += widths[k];
    }
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no operands");
  Tape<T>& t = *parts.front().tape();
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw DimensionError("concat_rows: column mismatch " + dims_string(p.value()) + " vs " +
                           dims_string(parts.front().value()));
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.record(std::move(out), ids, [ids, heights](Tape<T>& tp, const Matrix<T>& g) {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) tp.grad(ids[k]) += g.middleRows(off, heights[k]);
      off += heights[k];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > a.cols())
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(len) +
                         ") out of " + dims_string(a.value()));
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out = a.value().middleCols(start, len);
  return t.record(std::move(out), {ia}, [ia, start, len](Tape<T>& tp, const Matrix<T>& g) {
    tp.grad(ia).middleCols(start, len) += g;
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > a.rows())
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(len) +
                         ") out of " + dims_string(a.value()));
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out = a.value().middleRows(start, len);
  return t.record(std::move(out), {ia}, [ia, start, len](Tape<T>& tp, const Matrix<T>& g) {
    tp.grad(ia).middleRows(start, len) += g;
  });
}

/// Gathers rows by index; indices may repeat.
template <typename T>
Var<T> take_rows(const Var<T>& a, std::vector<Eigen::Index> idx) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.rows())
      throw DimensionError("take_rows: index " + std::to_string(idx[r]) + " out of " +
                           dims_string(a.value()));
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  }
  return t.record(std::move(out), {ia}, [ia, idx = std::move(idx)](Tape<T>& tp, const Matrix<T>& g) {
    auto& ga = tp.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

/// Row-major reinterpretation: element order is unchanged.
template <typename T>
Var<T> reshape(const Var<T>& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size())
    throw DimensionError("reshape: " + dims_string(a.value()) + " to [" + std::to_string(rows) +
                         " x " + std::to_string(cols) + "]");
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  const auto r0 = a.rows(), c0 = a.cols();
  Matrix<T> out = Eigen::Map<const Matrix<T>>(a.value().data(), rows, cols);
  return t.record(std::move(out), {ia}, [ia, r0, c0](Tape<T>& tp, const Matrix<T>& g) {
    tp.grad(ia) += Eigen::Map<const Matrix<T>>(g.data(), r0, c0);
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {ia},
                  [ia](Tape<T>& tp, const Matrix<T>& g) { tp.grad(ia).array() += g(0, 0); });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// [rows x cols] -> [rows x 1]
template <typename T>
Var<T> row_sum(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out = a.value().rowwise().sum();
  return t.record(std::move(out), {ia}, [ia](Tape<T>& tp, const Matrix<T>& g) {
    tp.grad(ia).colwise() += g.col(0);
  });
}

/// Euclidean norm of each row, [rows x 1]. Gradient at a zero row is zero.
template <typename T>
Var<T> row_norm(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  Matrix<T> out = a.value().rowwise().norm();
  return t.record(std::move(out), {ia}, [ia, iy](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& x = tp.value(ia);
    const Matrix<T>& n = tp.value(iy);
    auto& ga = tp.grad(ia);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      if (n(r, 0) > T(0)) ga.row(r) += x.row(r) * (g(r, 0) / n(r, 0));
  });
}

/// Selects one column per row: out[r] = a[r, idx[r]].
template <typename T>
Var<T> pick(const Var<T>& a, std::vector<int> idx) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows())
    throw DimensionError("pick: " + std::to_string(idx.size()) + " indices for " +
                         dims_string(a.value()));
  Tape<T>& t = *a.tape();
  const int ia = a.id();
  Matrix<T> out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int c = idx[static_cast<std::size_t>(r)];
    if (c < 0 || c >= a.cols())
      throw DimensionError("pick: column " + std::to_string(c) + " out of " + dims_string(a.value()));
    out(r, 0) = a.value()(r, c);
  }
  return t.record(std::move(out), {ia}, [ia, idx = std::move(idx)](Tape<T>& tp, const Matrix<T>& g) {
    auto& ga = tp.grad(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, idx[static_cast<std::size_t>(r)]) += g(r, 0);
  });
}

/// Per-row vector-matrix product: q [N x n], w [N x (n*m)] viewed per row as
/// an [n x m] matrix; out [N x m] with out[r, j] = sum_a q[r, a] * w[r, a*m + j].
template <typename T>
Var<T> row_bmm(const Var<T>& q, const Var<T>& w) {
  detail::require_same_tape(q, w, "row_bmm");
  const auto n = q.cols();
  if (q.rows() != w.rows() || n == 0 || w.cols() % n != 0)
    throw DimensionError("row_bmm: " + dims_string(q.value()) + " with " + dims_string(w.value()));
  const auto m = w.cols() / n;
  Tape<T>& t = *q.tape();
  const int iq = q.id(), iw = w.id();
  Matrix<T> out = Matrix<T>::Zero(q.rows(), m);
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index a = 0; a < n; ++a)
      out.row(r) += q.value()(r, a) * w.value().row(r).segment(a * m, m);
  return t.record(std::move(out), {iq, iw}, [iq, iw, n, m](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& qv = tp.value(iq);
    const Matrix<T>& wv = tp.value(iw);
    const bool gq = tp.needs_grad(iq), gw = tp.needs_grad(iw);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index a = 0; a < n; ++a) {
        if (gq) tp.grad(iq)(r, a) += g.row(r).dot(wv.row(r).segment(a * m, m));
        if (gw) tp.grad(iw).row(r).segment(a * m, m) += qv(r, a) * g.row(r);
      }
  });
}

}  // namespace smaug
