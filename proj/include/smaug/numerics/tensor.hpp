// Dense parameter tensors with attached gradient accumulators.
//
// Every tensor is stored as a row-major matrix. Rank-1 tensors of length n
// live in a 1 x n matrix; rank-2 tensors [rows x cols] map directly. The
// logical shape is kept alongside for checkpointing.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace smaug {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<std::size_t>;

/// Raised when tensor shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed arguments that are not shape problems.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename M>
std::string dims_string(const M& m) {
  return shape_string({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
}

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
struct Tensor {
  Shape shape;
  Matrix<T> value;
  Matrix<T> grad;

  Tensor() = default;

  explicit Tensor(Shape s) : shape(std::move(s)) {
    if (shape.empty() || shape.size() > 2)
      throw DimensionError("tensor rank must be 1 or 2, got " + shape_string(shape));
    for (auto d : shape)
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_string(shape));
    const auto rows = shape.size() == 1 ? 1 : shape[0];
    const auto cols = shape.size() == 1 ? shape[0] : shape[1];
    value = Matrix<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    grad = Matrix<T>::Zero(value.rows(), value.cols());
  }

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  T* data() { return value.data(); }
  const T* data() const { return value.data(); }

  void zero_grad() { grad.setZero(); }

  bool all_finite() const { return value.allFinite() && grad.allFinite(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.value = value.template cast<U>();
    out.grad = grad.template cast<U>();
    return out;
  }
};

/// Visitor signature used by every network: f(name, tensor).
template <typename T>
using ParameterVisitor = std::function<void(const std::string&, Tensor<T>&)>;

/// Flat list of non-owning parameter handles, in a stable order.
template <typename T>
struct ParameterList {
  std::vector<std::pair<std::string, Tensor<T>*>> items;

  void add(const std::string& name, Tensor<T>& t) { items.emplace_back(name, &t); }

  template <typename Net>
  void add_all(const std::string& prefix, Net& net) {
    net.visit_parameters([&](const std::string& name, Tensor<T>& t) { add(prefix + name, t); });
  }

  void zero_grad() {
    for (auto& [_, t] : items) t->zero_grad();
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : items) n += t->size();
    return n;
  }

  T grad_norm() const {
    T s = 0;
    for (const auto& [_, t] : items) s += t->grad.squaredNorm();
    return std::sqrt(s);
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
template <typename T, typename Rng>
void init_uniform_fan_in(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < t.value.size(); ++i) {
    // 53-bit mantissa draw keeps the sequence identical across scalar types
    const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    t.value.data()[i] = static_cast<T>((2.0 * u - 1.0) * bound);
  }
}

/// Copies parameter values from one network to another with the same layout.
template <typename Dst, typename Src>
void copy_parameters(Dst& dst, Src& src) {
  using DT = typename Dst::scalar_type;
  using ST = typename Src::scalar_type;
  std::vector<Tensor<ST>*> from;
  src.visit_parameters([&](const std::string&, Tensor<ST>& t) { from.push_back(&t); });
  std::size_t i = 0;
  dst.visit_parameters([&](const std::string& name, Tensor<DT>& t) {
    if (i >= from.size() || from[i]->shape != t.shape)
      throw DimensionError("parameter layout mismatch at " + name);
    t.value = from[i]->value.template cast<DT>();
    ++i;
  });
  if (i != from.size()) throw DimensionError("parameter count mismatch");
}

}  // namespace smaug
