// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Operations record themselves on the thread's active Tape (see TapeScope)
// whenever at least one input requires a gradient. Without an active tape the
// same functions run as plain forward arithmetic.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "casaug/errors.hpp"

namespace casaug {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

using NodePtr = std::shared_ptr<TensorNode>;

}  // namespace detail

class Tape;

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false) {
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_string(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor scalar(double v) { return from({1}, {v}); }
  static Tensor vector(std::vector<double> v) {
    const auto n = v.size();
    return from({n}, std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v) {
    return from({rows, cols}, std::move(v));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return rank() == 2 ? node_->shape[1] : 1; }

  std::span<const double> data() const { return node_->data; }
  /// Direct write access, for parameter loading and optimizer updates only.
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const {
    return node_->data[r * cols() + c];
  }
  double item() const {
    if (size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_string(shape()));
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }
  /// Gradient buffer; zeros when nothing has flowed into this tensor.
  std::span<const double> grad() const { return node_->ensure_grad(); }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

  /// Detached copy sharing no storage and recording nothing.
  Tensor clone() const { return from(shape(), node_->data); }

  const detail::NodePtr& node() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  friend class Tape;
  friend Tensor make_result(Shape, std::vector<double>);

  detail::NodePtr node_;
};

inline Tensor make_result(Shape shape, std::vector<double> data) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Tensor(std::move(node));
}

/// Ordered record of differentiable operations for one forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<double>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape*& active() {
    thread_local Tape* current = nullptr;
    return current;
  }

  std::size_t size() const { return records_.size(); }

  void record(const Tensor& out, std::vector<detail::NodePtr> inputs,
              BackwardFn fn) {
    out.node()->requires_grad = true;
    records_.push_back({out.node(), std::move(inputs), std::move(fn)});
  }

  /// Populates grad of every requires_grad tensor reachable from `loss`.
  /// A tape supports a single backward pass.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          (loss.defined() ? shape_string(loss.shape())
                                          : std::string("<undefined>")));
    }
    if (consumed_) throw ContractError("tape already consumed by backward");
    const bool on_tape =
        std::any_of(records_.begin(), records_.end(),
                    [&](const Record& r) { return r.out == loss.node(); });
    if (!on_tape) throw ContractError("loss was not produced on this tape");
    consumed_ = true;

    for (auto& r : records_) r.out->grad.clear();
    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->out->grad.empty()) continue;
      for (auto& in : it->inputs) {
        if (in->requires_grad) in->ensure_grad();
      }
      it->fn(it->out->grad);
    }
  }

 private:
  struct Record {
    detail::NodePtr out;
    std::vector<detail::NodePtr> inputs;
    BackwardFn fn;
  };
  std::vector<Record> records_;
  bool consumed_ = false;
};

/// Makes `tape` the active tape of the current thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(Tape::active()) {
    Tape::active() = &tape;
  }
  ~TapeScope() { Tape::active() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording (inference, lexicon refresh).
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape::active()) { Tape::active() = nullptr; }
  ~NoGradScope() { Tape::active() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

inline void accumulate(const NodePtr& node, std::size_t i, double g) {
  if (node->requires_grad) node->grad[i] += g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// Matrix product. Accepts [M,K]x[K,P], [M,K]x[K] and [K]x[K,P].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if (a.rank() > 2 || b.rank() > 2 || (a_vec && b_vec)) {
    throw DimensionError("matmul: unsupported ranks " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  const std::size_t m = a_vec ? 1 : a.shape()[0];
  const std::size_t k = a_vec ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = b.shape()[0];
  const std::size_t p = b_vec ? 1 : b.shape()[1];
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ: " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> c(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = A[i * k + t];
      if (av == 0.0) continue;
      const double* brow = &B[t * p];
      double* crow = &c[i * p];
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
  Shape out_shape = a_vec ? Shape{p} : (b_vec ? Shape{m} : Shape{m, p});
  Tensor out = make_result(std::move(out_shape), std::move(c));
  if (detail::should_record({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    Tape::active()->record(out, {an, bn}, [an, bn, m, k, p](const auto& g) {
      // dA = dC * B^T, dB = A^T * dC
      if (an->requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j)
              s += g[i * p + j] * bn->data[t * p + j];
            an->grad[i * k + t] += s;
          }
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            const double av = an->data[i * k + t];
            for (std::size_t j = 0; j < p; ++j)
              bn->grad[t * p + j] += av * g[i * p + j];
          }
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose: expected matrix, got " +
                         shape_string(a.shape()));
  }
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out_data(r * c);
  const auto A = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out_data[j * r + i] = A[i * c + j];
  Tensor out = make_result({c, r}, std::move(out_data));
  if (detail::should_record({&a})) {
    auto an = a.node();
    Tape::active()->record(out, {an}, [an, r, c](const auto& g) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += g[j * r + i];
    });
  }
  return out;
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " +
                         shape_string(shape));
  }
  Tensor out = make_result(std::move(shape), std::vector<double>(a.data().begin(),
                                                                 a.data().end()));
  if (detail::should_record({&a})) {
    auto an = a.node();
    Tape::active()->record(out, {an}, [an](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

/// a + b. `b` may match `a`, be a single element, or (for matrix `a`) be a
/// vector of length cols(a) added to every row.
inline Tensor add(const Tensor& a, const Tensor& b) {
  enum class Mode { Same, Scalar, Row } mode;
  if (a.shape() == b.shape()) {
    mode = Mode::Same;
  } else if (b.size() == 1) {
    mode = Mode::Scalar;
  } else if (a.rank() == 2 && b.rank() == 1 && b.size() == a.shape()[1]) {
    mode = Mode::Row;
  } else {
    throw DimensionError("add: incompatible shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  const std::size_t n = a.size();
  const std::size_t cols = b.size();
  std::vector<double> out_data(n);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = mode == Mode::Same     ? B[i]
                      : mode == Mode::Scalar ? B[0]
                                             : B[i % cols];
    out_data[i] = A[i] + bv;
  }
  Tensor out = make_result(a.shape(), std::move(out_data));
  if (detail::should_record({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    Tape::active()->record(out, {an, bn}, [an, bn, mode, cols](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        detail::accumulate(an, i, g[i]);
        const std::size_t bi =
            mode == Mode::Same ? i : (mode == Mode::Scalar ? 0 : i % cols);
        detail::accumulate(bn, bi, g[i]);
      }
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("sub: shapes differ " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  std::vector<double> out_data(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out_data[i] = a[i] - b[i];
  Tensor out = make_result(a.shape(), std::move(out_data));
  if (detail::should_record({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    Tape::active()->record(out, {an, bn}, [an, bn](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        detail::accumulate(an, i, g[i]);
        detail::accumulate(bn, i, -g[i]);
      }
    });
  }
  return out;
}

/// Elementwise product of equally shaped tensors.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes differ " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  std::vector<double> out_data(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out_data[i] = a[i] * b[i];
  Tensor out = make_result(a.shape(), std::move(out_data));
  if (detail::should_record({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    Tape::active()->record(out, {an, bn}, [an, bn](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        detail::accumulate(an, i, g[i] * bn->data[i]);
        detail::accumulate(bn, i, g[i] * an->data[i]);
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out_data(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out_data[i] = a[i] * factor;
  Tensor out = make_result(a.shape(), std::move(out_data));
  if (detail::should_record({&a})) {
    auto an = a.node();
    Tape::active()->record(out, {an}, [an, factor](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * factor;
    });
  }
  return out;
}

inline double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out_data(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out_data[i] = sigmoid_value(a[i]);
  Tensor out = make_result(a.shape(), std::move(out_data));
  if (detail::should_record({&a})) {
    auto an = a.node();
    auto on = out.node().get();  // tape keeps the output alive
    Tape::active()->record(out, {an}, [an, on](const auto& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = on->data[i];
        an->grad[i] += g[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

/// Softmax of a vector, or of every row of a matrix.
inline Tensor softmax(const Tensor& a) {
  if (a.size() == 0 || a.rank() == 0 || a.rank() > 2) {
    throw DimensionError("softmax: needs a non-empty vector or matrix, got " +
                         shape_string(a.shape()));
  }
  const std::size_t width = a.rank() == 1 ? a.size() : a.shape()[1];
  const std::size_t rows = a.size() / width;
  std::vector<double> y(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * width;
    double mx = a[off];
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, a[off + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      y[off + j] = std::exp(a[off + j] - mx);
      z += y[off + j];
    }
    for (std::size_t j = 0; j < width; ++j) y[off + j] /= z;
  }
  Tensor out = make_result(a.shape(), std::move(y));
  if (detail::should_record({&a})) {
    auto an = a.node();
    auto on = out.node().get();
    Tape::active()->record(out, {an}, [an, on, rows, width](const auto& g) {
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * width;
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j)
          dot += g[off + j] * on->data[off + j];
        for (std::size_t j = 0; j < width; ++j)
          an->grad[off + j] += on->data[off + j] * (g[off + j] - dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = make_result({1}, {s});
  if (detail::should_record({&a})) {
    auto an = a.node();
    Tape::active()->record(out, {an}, [an](const auto& g) {
      for (auto& v : an->grad) v += g[0];
    });
  }
  return out;
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy. Predictions are clamped to [eps, 1-eps];
/// targets may be soft and never receive gradient.
inline Tensor binary_cross_entropy(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("binary_cross_entropy: shapes differ " +
                         shape_string(pred.shape()) + " and " +
                         shape_string(target.shape()));
  }
  if (pred.size() == 0) throw DimensionError("binary_cross_entropy of empty tensor");
  const double n = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double t = target[i];
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  Tensor out = make_result({1}, {total / n});
  if (detail::should_record({&pred})) {
    auto pn = pred.node();
    auto tn = target.node();
    Tape::active()->record(out, {pn}, [pn, tn, n](const auto& g) {
      for (std::size_t i = 0; i < pn->data.size(); ++i) {
        const double raw = pn->data[i];
        // zero slope where the clamp is active
        if (raw < kBceEpsilon || raw > 1.0 - kBceEpsilon) continue;
        const double t = tn->data[i];
        pn->grad[i] += g[0] * (-t / raw + (1.0 - t) / (1.0 - raw)) / n;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indexing

/// Rows `ids` of `table`, as a [ids.size(), cols] matrix.
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  if (table.rank() != 2) {
    throw DimensionError("gather_rows: expected matrix, got " +
                         shape_string(table.shape()));
  }
  const std::size_t cols = table.shape()[1];
  std::vector<double> out_data(ids.size() * cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= table.shape()[0]) {
      throw DimensionError("gather_rows: row " + std::to_string(ids[r]) +
                           " out of range for " + shape_string(table.shape()));
    }
    std::copy_n(&table.data()[ids[r] * cols], cols, &out_data[r * cols]);
  }
  Tensor out = make_result({ids.size(), cols}, std::move(out_data));
  if (detail::should_record({&table})) {
    auto tn = table.node();
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    Tape::active()->record(out, {tn}, [tn, idx = std::move(idx), cols](const auto& g) {
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
          tn->grad[idx[r] * cols + c] += g[r * cols + c];
    });
  }
  return out;
}

/// Mean of rows [first, last] (inclusive) of a matrix, as a vector.
inline Tensor mean_rows(const Tensor& m, std::size_t first, std::size_t last) {
  if (m.rank() != 2 || first > last || last >= m.shape()[0]) {
    throw ContractError("mean_rows: span (" + std::to_string(first) + "," +
                        std::to_string(last) + ") out of bounds for " +
                        shape_string(m.shape()));
  }
  const std::size_t cols = m.shape()[1];
  const double count = static_cast<double>(last - first + 1);
  std::vector<double> out_data(cols, 0.0);
  for (std::size_t r = first; r <= last; ++r)
    for (std::size_t c = 0; c < cols; ++c) out_data[c] += m.at(r, c);
  for (auto& v : out_data) v /= count;
  Tensor out = make_result({cols}, std::move(out_data));
  if (detail::should_record({&m})) {
    auto mn = m.node();
    Tape::active()->record(out, {mn}, [mn, first, last, cols, count](const auto& g) {
      for (std::size_t r = first; r <= last; ++r)
        for (std::size_t c = 0; c < cols; ++c) mn->grad[r * cols + c] += g[c] / count;
    });
  }
  return out;
}

/// Stacks equally sized vectors as the rows of a matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t cols = rows.front().size();
  std::vector<double> out_data;
  out_data.reserve(rows.size() * cols);
  bool record = false;
  for (const auto& r : rows) {
    if (r.size() != cols) {
      throw DimensionError("stack_rows: row of shape " + shape_string(r.shape()) +
                           " among rows of length " + std::to_string(cols));
    }
    out_data.insert(out_data.end(), r.data().begin(), r.data().end());
    record = record || r.requires_grad();
  }
  Tensor out = make_result({rows.size(), cols}, std::move(out_data));
  if (record && Tape::active() != nullptr) {
    std::vector<detail::NodePtr> nodes;
    for (const auto& r : rows) nodes.push_back(r.node());
    auto captured = nodes;
    Tape::active()->record(out, std::move(nodes), [captured, cols](const auto& g) {
      for (std::size_t r = 0; r < captured.size(); ++r) {
        if (!captured[r]->requires_grad) continue;
        for (std::size_t c = 0; c < cols; ++c) captured[r]->grad[c] += g[r * cols + c];
      }
    });
  }
  return out;
}

/// out[k] = source[indices[k]], reshaped to `shape`. Gradients scatter-add.
inline Tensor gather(const Tensor& source, std::vector<std::size_t> indices, Shape shape) {
  if (shape_numel(shape) != indices.size()) {
    throw DimensionError("gather: " + std::to_string(indices.size()) + " indices for shape " +
                         shape_string(shape));
  }
  std::vector<double> out_data(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= source.size()) {
      throw DimensionError("gather: index " + std::to_string(indices[k]) + " out of range for " +
                           shape_string(source.shape()));
    }
    out_data[k] = source[indices[k]];
  }
  Tensor out = make_result(std::move(shape), std::move(out_data));
  if (detail::should_record({&source})) {
    auto sn = source.node();
    Tape::active()->record(out, {sn}, [sn, idx = std::move(indices)](const auto& g) {
      for (std::size_t k = 0; k < idx.size(); ++k) sn->grad[idx[k]] += g[k];
    });
  }
  return out;
}

/// Selected rows of a matrix, in the given order.
inline Tensor select_rows(const Tensor& m, std::span<const std::size_t> rows) {
  return gather_rows(m, rows);
}

}  // namespace casaug
