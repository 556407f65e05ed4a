// Dense, GRU and multi-head attention layers on top of the tape.

#pragma once

#include "smaug/numerics/ops.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace smaug {

using Rng = std::mt19937_64;

template <typename T>
struct DenseLayer {
  using scalar_type = T;

  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out]

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.value.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.value.rows()); }

  void init(Rng& rng) {
    init_uniform_fan_in(weight, in_dim(), rng);
    init_uniform_fan_in(bias, in_dim(), rng);
  }

  Var<T> forward(Tape<T>& tape, const Var<T>& x) {
    if (static_cast<std::size_t>(x.cols()) != in_dim())
      throw DimensionError("dense_forward: input " + dims_string(x.value()) + " vs layer " +
                           shape_string(weight.shape));
    auto w = tape.parameter(weight);
    auto b = tape.parameter(bias);
    return linear(x, w, &b);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    f("weight", weight);
    f("bias", bias);
  }
};

/// GRU recurrence from precomputed input gates gi = W_ih x + b_ih, with the
/// PyTorch gate layout (reset, update, candidate):
///   r  = sigmoid(gi_r + W_hr h + b_hr)
///   u  = sigmoid(gi_u + W_hu h + b_hu)
///   n  = tanh(gi_n + r * (W_hn h + b_hn))
///   h' = (1 - u) * n + u * h
/// Rows whose mask entry is zero pass h through untouched.
template <typename T>
Var<T> gru_gates_step_op(const Var<T>& gi, const Var<T>& h, const Var<T>& w_hh, const Var<T>& b_hh,
                         const Matrix<T>* mask = nullptr) {
  detail::require_same_tape(gi, h, "gru_step");
  Tape<T>& t = *gi.tape();
  const auto hd = h.cols();
  if (gi.rows() != h.rows() || gi.cols() != 3 * hd)
    throw DimensionError("gru_step: input gates " + dims_string(gi.value()) + " vs hidden " +
                         dims_string(h.value()));
  if (w_hh.rows() != 3 * hd || w_hh.cols() != hd)
    throw DimensionError("gru_step: hidden " + dims_string(h.value()) + " vs weights " + dims_string(w_hh.value()));
  if (mask && (mask->rows() != gi.rows() || mask->cols() != 1))
    throw DimensionError("gru_step: mask " + dims_string(*mask) + " for " + dims_string(gi.value()));

  const Matrix<T>& giv = gi.value();
  const Matrix<T>& hv = h.value();
  Matrix<T> gh = hv * w_hh.value().transpose();
  gh.rowwise() += b_hh.value().row(0);

  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Arr r = T(1) / (T(1) + (-(giv.leftCols(hd) + gh.leftCols(hd)).array()).exp());
  Arr u = T(1) / (T(1) + (-(giv.middleCols(hd, hd) + gh.middleCols(hd, hd)).array()).exp());
  Arr ghn = gh.rightCols(hd).array();
  Arr cand = (giv.rightCols(hd).array() + r * ghn).tanh();
  Matrix<T> out = ((T(1) - u) * cand + u * hv.array()).matrix();
  if (mask)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if ((*mask)(i, 0) == T(0)) out.row(i) = hv.row(i);

  std::optional<Matrix<T>> m;
  if (mask) m = *mask;
  const int igi = gi.id(), ih = h.id(), iwh = w_hh.id(), ibh = b_hh.id();
  return t.record(
      std::move(out), {igi, ih, iwh, ibh},
      [=, r = std::move(r), u = std::move(u), cand = std::move(cand), ghn = std::move(ghn),
       m = std::move(m)](Tape<T>& tp, const Matrix<T>& g) {
        const Matrix<T>& hv = tp.value(ih);
        const auto rows = g.rows();
        Arr go = g.array();
        if (m)
          for (Eigen::Index i = 0; i < rows; ++i)
            if ((*m)(i, 0) == T(0)) go.row(i).setZero();
        const Arr dn_pre = go * (T(1) - u) * (T(1) - cand * cand);
        const Arr dr_pre = dn_pre * ghn * r * (T(1) - r);
        const Arr du_pre = go * (hv.array() - cand) * u * (T(1) - u);
        Matrix<T> dgh(rows, 3 * hd);
        dgh.leftCols(hd) = dr_pre.matrix();
        dgh.middleCols(hd, hd) = du_pre.matrix();
        dgh.rightCols(hd) = (dn_pre * r).matrix();
        if (tp.needs_grad(igi)) {
          auto& dgi = tp.grad(igi);
          dgi.leftCols(hd) += dr_pre.matrix();
          dgi.middleCols(hd, hd) += du_pre.matrix();
          dgi.rightCols(hd) += dn_pre.matrix();
        }
        if (tp.needs_grad(ih)) {
          auto& dh = tp.grad(ih);
          Matrix<T> direct = (go * u).matrix();
          if (m)
            for (Eigen::Index i = 0; i < rows; ++i)
              if ((*m)(i, 0) == T(0)) direct.row(i) = g.row(i);
          dh += direct;
          dh.noalias() += dgh * tp.value(iwh);
        }
        if (tp.needs_grad(iwh)) tp.grad(iwh).noalias() += dgh.transpose() * hv;
        if (tp.needs_grad(ibh)) tp.grad(ibh).row(0) += dgh.colwise().sum();
      });
}

/// Full GRU step from raw inputs x.
template <typename T>
Var<T> gru_step_op(const Var<T>& x, const Var<T>& h, const Var<T>& w_ih, const Var<T>& w_hh,
                   const Var<T>& b_ih, const Var<T>& b_hh, const Matrix<T>* mask = nullptr) {
  if (w_ih.cols() != x.cols() || w_ih.rows() != 3 * h.cols())
    throw DimensionError("gru_step: input " + dims_string(x.value()) + ", hidden " + dims_string(h.value()) +
                         " vs weights " + dims_string(w_ih.value()));
  return gru_gates_step_op(linear(x, w_ih, &b_ih), h, w_hh, b_hh, mask);
}

template <typename T>
struct GruCell {
  using scalar_type = T;

  Tensor<T> w_ih;  // [3H x in]
  Tensor<T> w_hh;  // [3H x H]
  Tensor<T> b_ih;  // [3H]
  Tensor<T> b_hh;  // [3H]

  GruCell() = default;
  GruCell(std::size_t in, std::size_t hidden)
      : w_ih({3 * hidden, in}), w_hh({3 * hidden, hidden}), b_ih({3 * hidden}), b_hh({3 * hidden}) {}

  std::size_t in_dim() const { return static_cast<std::size_t>(w_ih.value.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w_hh.value.cols()); }

  void init(Rng& rng) {
    const auto h = hidden_dim();
    init_uniform_fan_in(w_ih, h, rng);
    init_uniform_fan_in(w_hh, h, rng);
    init_uniform_fan_in(b_ih, h, rng);
    init_uniform_fan_in(b_hh, h, rng);
  }

  Var<T> step(Tape<T>& tape, const Var<T>& x, const Var<T>& h, const Matrix<T>* mask = nullptr) {
    return gru_step_op(x, h, tape.parameter(w_ih), tape.parameter(w_hh), tape.parameter(b_ih),
                       tape.parameter(b_hh), mask);
  }

  /// W_ih x + b_ih for a batch of inputs, reusable across many steps.
  Var<T> input_gates(Tape<T>& tape, const Var<T>& x) {
    auto w = tape.parameter(w_ih);
    auto b = tape.parameter(b_ih);
    return linear(x, w, &b);
  }

  Var<T> step_from_gates(Tape<T>& tape, const Var<T>& gi, const Var<T>& h, const Matrix<T>* mask = nullptr) {
    return gru_gates_step_op(gi, h, tape.parameter(w_hh), tape.parameter(b_hh), mask);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    f("w_ih", w_ih);
    f("w_hh", w_hh);
    f("b_ih", b_ih);
    f("b_hh", b_hh);
  }
};

/// Result of a fused attention evaluation.
template <typename T>
struct AttentionOutput {
  Var<T> output;      // [N x D]
  Matrix<T> weights;  // [N x (heads * K)], head-major: weights(r, h * K + k)
};

/// Multi-head attention over K keys, already projected to width D = heads * head_dim.
/// For each row and head: alpha_k = softmax_k(lambda * <q_h, key_k,h>),
/// out_h = sum_k alpha_k * val_k,h.
template <typename T>
AttentionOutput<T> attention_op(const Var<T>& query, const std::vector<Var<T>>& keys,
                                const std::vector<Var<T>>& values, int heads, T temperature) {
  if (keys.empty()) throw ArgumentError("attention: empty key list");
  if (keys.size() != values.size())
    throw ArgumentError("attention: " + std::to_string(keys.size()) + " keys vs " +
                        std::to_string(values.size()) + " values");
  const auto rows = query.rows();
  const auto width = query.cols();
  if (heads <= 0 || width % heads != 0)
    throw DimensionError("attention: width " + std::to_string(width) + " not divisible into " +
                         std::to_string(heads) + " heads");
  for (std::size_t k = 0; k < keys.size(); ++k)
    if (keys[k].rows() != rows || keys[k].cols() != width || values[k].rows() != rows ||
        values[k].cols() != width)
      throw DimensionError("attention: key/value " + std::to_string(k) + " shape " +
                           dims_string(keys[k].value()) + "/" + dims_string(values[k].value()) +
                           " vs query " + dims_string(query.value()));

  const auto K = static_cast<Eigen::Index>(keys.size());
  const auto hd = width / heads;
  Tape<T>& t = *query.tape();
  Matrix<T> alpha(rows, heads * K);
  Matrix<T> out = Matrix<T>::Zero(rows, width);
  std::vector<T> s(static_cast<std::size_t>(K));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int h = 0; h < heads; ++h) {
      T mx = -std::numeric_limits<T>::infinity();
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto& kv = keys[static_cast<std::size_t>(k)].value();
        T dot = 0;
        for (Eigen::Index d = 0; d < hd; ++d) dot += query.value()(r, h * hd + d) * kv(r, h * hd + d);
        s[static_cast<std::size_t>(k)] = temperature * dot;
        mx = std::max(mx, s[static_cast<std::size_t>(k)]);
      }
      T z = 0;
      for (Eigen::Index k = 0; k < K; ++k) {
        s[static_cast<std::size_t>(k)] = std::exp(s[static_cast<std::size_t>(k)] - mx);
        z += s[static_cast<std::size_t>(k)];
      }
      for (Eigen::Index k = 0; k < K; ++k) {
        const T a = s[static_cast<std::size_t>(k)] / z;
        alpha(r, h * K + k) = a;
        const auto& vv = values[static_cast<std::size_t>(k)].value();
        for (Eigen::Index d = 0; d < hd; ++d) out(r, h * hd + d) += a * vv(r, h * hd + d);
      }
    }
  }

  std::vector<int> ids{query.id()};
  std::vector<int> key_ids, val_ids;
  for (const auto& k : keys) key_ids.push_back(k.id());
  for (const auto& v : values) val_ids.push_back(v.id());
  ids.insert(ids.end(), key_ids.begin(), key_ids.end());
  ids.insert(ids.end(), val_ids.begin(), val_ids.end());
  const int iq = query.id();

  AttentionOutput<T> result;
  result.weights = alpha;
  result.output = t.record(
      std::move(out), ids,
      [=, alpha = std::move(alpha)](Tape<T>& tp, const Matrix<T>& g) {
        const Matrix<T>& qv = tp.value(iq);
        std::vector<T> da(static_cast<std::size_t>(K));
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (int h = 0; h < heads; ++h) {
            T mean_da = 0;
            for (Eigen::Index k = 0; k < K; ++k) {
              const auto& vv = tp.value(val_ids[static_cast<std::size_t>(k)]);
              T acc = 0;
              for (Eigen::Index d = 0; d < hd; ++d) acc += g(r, h * hd + d) * vv(r, h * hd + d);
              da[static_cast<std::size_t>(k)] = acc;
              mean_da += alpha(r, h * K + k) * acc;
            }
            for (Eigen::Index k = 0; k < K; ++k) {
              const T a = alpha(r, h * K + k);
              const T ds = a * (da[static_cast<std::size_t>(k)] - mean_da) * temperature;
              const int ik = key_ids[static_cast<std::size_t>(k)];
              const int iv = val_ids[static_cast<std::size_t>(k)];
              const auto& kv = tp.value(ik);
              if (tp.needs_grad(iv)) {
                auto& gv = tp.grad(iv);
                for (Eigen::Index d = 0; d < hd; ++d) gv(r, h * hd + d) += a * g(r, h * hd + d);
              }
              if (tp.needs_grad(ik)) {
                auto& gk = tp.grad(ik);
                for (Eigen::Index d = 0; d < hd; ++d) gk(r, h * hd + d) += ds * qv(r, h * hd + d);
              }
              if (tp.needs_grad(iq)) {
                auto& gq = tp.grad(iq);
                for (Eigen::Index d = 0; d < hd; ++d) gq(r, h * hd + d) += ds * kv(r, h * hd + d);
              }
            }
          }
        }
      });
  return result;
}

/// Query/key/value projections plus fused multi-head attention.
template <typename T>
struct MultiHeadAttention {
  using scalar_type = T;

  Tensor<T> w_q;  // [D x query_in]
  Tensor<T> w_k;  // [D x key_in]
  Tensor<T> w_v;  // [D x key_in]
  int n_heads = 4;
  T temperature = T(1);

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t query_in, std::size_t key_in, std::size_t width, int heads,
                     T lambda = T(1))
      : w_q({width, query_in}), w_k({width, key_in}), w_v({width, key_in}), n_heads(heads),
        temperature(lambda) {
    if (heads <= 0 || width % static_cast<std::size_t>(heads) != 0)
      throw DimensionError("attention width " + std::to_string(width) + " not divisible by " +
                           std::to_string(heads) + " heads");
  }

  std::size_t width() const { return static_cast<std::size_t>(w_q.value.rows()); }
  std::size_t head_dim() const { return width() / static_cast<std::size_t>(n_heads); }

  void init(Rng& rng) {
    init_uniform_fan_in(w_q, static_cast<std::size_t>(w_q.value.cols()), rng);
    init_uniform_fan_in(w_k, static_cast<std::size_t>(w_k.value.cols()), rng);
    init_uniform_fan_in(w_v, static_cast<std::size_t>(w_v.value.cols()), rng);
  }

  AttentionOutput<T> forward(Tape<T>& tape, const Var<T>& query, const std::vector<Var<T>>& keys,
                             const std::vector<Var<T>>& values_src) {
    if (keys.empty()) throw ArgumentError("attention_forward: empty key list");
    if (keys.size() != values_src.size())
      throw ArgumentError("attention_forward: keys and values differ in length");
    auto wq = tape.parameter(w_q);
    auto wk = tape.parameter(w_k);
    auto wv = tape.parameter(w_v);
    auto q = linear(query, wq);
    std::vector<Var<T>> pk, pv;
    pk.reserve(keys.size());
    pv.reserve(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
      pk.push_back(linear(keys[k], wk));
      pv.push_back(linear(values_src[k], wv));
    }
    return attention_op(q, pk, pv, n_heads, temperature);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    f("w_q", w_q);
    f("w_k", w_k);
    f("w_v", w_v);
  }
};

}  // namespace smaug
