#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acl/errors.hpp"

namespace acl {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;      // empty until first accumulation
  bool requires_grad = false;    // leaf parameter flag
  bool graph_result = false;     // produced by a recorded operation

  bool wants_grad() const { return requires_grad || graph_result; }
  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor of 64-bit floats.
///
/// A Tensor is a cheap handle; copies share storage. Results of recorded
/// operations carry a link to the Graph that produced them through the
/// graph's record list, not through the tensor itself.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const;
  std::size_t dim(std::size_t i) const;
  /// 2-D helpers; throw DimensionError when rank != 2.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  double item() const;  // requires size() == 1
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;

  bool has_grad() const;
  std::span<const double> grad() const;  // ContractError when unpopulated
  double grad_at(std::size_t i) const;
  /// Drops the gradient buffer; the next backward pass starts from zero.
  void reset_grad();

  /// Deep copy; the copy is a fresh leaf.
  Tensor clone() const;
  /// Copy of the values with no graph history and no gradient.
  Tensor detached() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Reverse-mode differentiation tape, rebuilt per forward pass.
///
/// Records are appended in execution order, so operands always precede the
/// operations that consume them. backward() walks the records exactly once
/// in reverse. Leaf gradients accumulate across backward calls until
/// reset_grad(); intermediate gradients are re-derived per call.
///
/// A Graph instance is confined to a single thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// loss must hold exactly one element (ContractError otherwise).
  void backward(const Tensor& loss);

  void clear();
  std::size_t num_records() const { return records_.size(); }

  /// Appends a record; vjp reads the result gradient and accumulates into
  /// the operands' buffers. Used by the op implementations.
  void record(const Tensor& result, std::function<void()> vjp);

 private:
  struct Record {
    std::shared_ptr<detail::TensorImpl> result;
    std::function<void()> vjp;
  };
  std::vector<Record> records_;
};

// ---- Differentiable operations ------------------------------------------

/// a[m×k] · b[k×n] -> [m×n]
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

/// Same-shape elementwise sum / difference / product.
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);

/// m[n×d] + bias[d] broadcast across rows.
Tensor add_rowwise(Graph& g, const Tensor& m, const Tensor& bias);

Tensor scale(Graph& g, const Tensor& x, double c);
Tensor relu(Graph& g, const Tensor& x);

/// 2-D transpose.
Tensor transpose(Graph& g, const Tensor& x);

/// Concatenation along the feature (last) axis of two matrices with equal
/// row counts; a occupies the leading columns.
Tensor concat_cols(Graph& g, const Tensor& a, const Tensor& b);

/// Columns [lo, hi) of a matrix.
Tensor slice_cols(Graph& g, const Tensor& x, std::size_t lo, std::size_t hi);

/// Sum of all elements -> scalar.
Tensor sum(Graph& g, const Tensor& x);

/// Mean (sum reduction available separately) of -log softmax(logits)[label]
/// per row, computed with max-subtraction. Backward: (softmax - onehot)/n.
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             std::span<const std::size_t> labels);
/// Sum-reduction variant; backward: (softmax - onehot).
Tensor softmax_cross_entropy_sum(Graph& g, const Tensor& logits,
                                 std::span<const std::size_t> labels);

/// Identity forward; multiplies the upstream gradient by -1 on the way back.
Tensor gradient_reversal(Graph& g, const Tensor& x);

// ---- Non-differentiable helpers ------------------------------------------

/// New leaf holding the selected rows of a matrix (gradients do not flow).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

/// New leaf stacking two matrices with equal column counts (a on top).
Tensor vstack_data(const Tensor& a, const Tensor& b);

}  // namespace acl
