#include "acl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acl {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

namespace {

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<double> values) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return impl;
}

// GEMM kernels, accumulate form. Row-major. The inner loops run over
// contiguous memory so the compiler can vectorize them without
// reassociation.

// c[m×n] += a[m×k] · b[k×n]
void gemm_nn_acc(const double* __restrict a, const double* __restrict b,
                 double* __restrict c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// d[k×n] += a[m×k]^T · g[m×n]
void gemm_tn_acc(const double* __restrict a, const double* __restrict g,
                 double* __restrict d, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* dp = d + p * n;
      for (std::size_t j = 0; j < n; ++j) dp[j] += av * gi[j];
    }
  }
}

// d[m×k] += g[m×n] · b[k×n]^T, via a transposed copy of b to keep the
// inner loop contiguous.
void gemm_nt_acc(const double* __restrict g, const double* __restrict b,
                 double* __restrict d, std::size_t m, std::size_t n, std::size_t k) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  gemm_nn_acc(g, bt.data(), d, m, n, k);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void check_matrix(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_str(x.shape()));
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("from_values: shape " + shape_str(shape) + " expects " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  return Tensor(make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from_values({}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
std::size_t Tensor::rank() const { return impl_->shape.size(); }

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank()) throw DimensionError("dim index out of range");
  return impl_->shape[i];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not a matrix: " + shape_str(shape()));
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not a matrix: " + shape_str(shape()));
  return impl_->shape[1];
}

std::span<const double> Tensor::values() const { return impl_->data; }
std::span<double> Tensor::values_mut() { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor has " + std::to_string(size()) + " elements");
  return impl_->data[0];
}

double Tensor::at(std::size_t i) const {
  if (i >= size()) throw DimensionError("at(i): index out of range");
  return impl_->data[i];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2 || r >= impl_->shape[0] || c >= impl_->shape[1])
    throw DimensionError("at(r,c): index out of range for " + shape_str(shape()));
  return impl_->data[r * impl_->shape[1] + c];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

bool Tensor::has_grad() const { return defined() && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad(): gradient not populated");
  return impl_->grad;
}

double Tensor::grad_at(std::size_t i) const {
  auto gspan = grad();
  if (i >= gspan.size()) throw DimensionError("grad_at: index out of range");
  return gspan[i];
}

void Tensor::reset_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  auto impl = make_impl(impl_->shape, impl_->data);
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detached() const {
  return Tensor(make_impl(impl_->shape, impl_->data));
}

// ---- Graph ----------------------------------------------------------------

void Graph::record(const Tensor& result, std::function<void()> vjp) {
  records_.push_back(Record{result.impl_ptr(), std::move(vjp)});
}

void Graph::clear() { records_.clear(); }

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward: loss must be a scalar tensor");
  // Intermediate gradients are per-pass; leaf gradients accumulate.
  for (auto& r : records_) {
    auto& buf = r.result->grad_buffer();
    std::fill(buf.begin(), buf.end(), 0.0);
  }
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->vjp) it->vjp();
  }
}

// ---- op helpers -----------------------------------------------------------

namespace {

using detail::TensorImpl;

// Whether backward should accumulate into this operand's buffer.
inline bool accum_target(const std::shared_ptr<TensorImpl>& t) { return t->wants_grad(); }

Tensor result_tensor(Shape shape, std::vector<double> values) {
  Tensor t = Tensor::from_values(std::move(shape), std::move(values));
  t.impl()->graph_result = true;
  return t;
}

}  // namespace

// ---- recorded operations ----------------------------------------------

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor r = result_tensor({m, n}, std::move(out));
  auto ra = a.impl_ptr(), rb = b.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [ra, rb, rr, m, k, n]() {
    const double* gr = rr->grad.data();
    if (accum_target(ra)) {
      gemm_nt_acc(gr, rb->data.data(), ra->grad_buffer().data(), m, n, k);
    }
    if (accum_target(rb)) {
      gemm_tn_acc(ra->data.data(), gr, rb->grad_buffer().data(), m, k, n);
    }
  });
  return r;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor r = result_tensor(a.shape(), std::move(out));
  auto ra = a.impl_ptr(), rb = b.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [ra, rb, rr]() {
    const auto& gr = rr->grad;
    if (accum_target(ra)) {
      auto& da = ra->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) da[i] += gr[i];
    }
    if (accum_target(rb)) {
      auto& db = rb->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) db[i] += gr[i];
    }
  });
  return r;
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Tensor r = result_tensor(a.shape(), std::move(out));
  auto ra = a.impl_ptr(), rb = b.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [ra, rb, rr]() {
    const auto& gr = rr->grad;
    if (accum_target(ra)) {
      auto& da = ra->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) da[i] += gr[i];
    }
    if (accum_target(rb)) {
      auto& db = rb->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) db[i] -= gr[i];
    }
  });
  return r;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor r = result_tensor(a.shape(), std::move(out));
  auto ra = a.impl_ptr(), rb = b.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [ra, rb, rr]() {
    const auto& gr = rr->grad;
    if (accum_target(ra)) {
      auto& da = ra->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) da[i] += gr[i] * rb->data[i];
    }
    if (accum_target(rb)) {
      auto& db = rb->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) db[i] += gr[i] * ra->data[i];
    }
  });
  return r;
}

Tensor add_rowwise(Graph& g, const Tensor& m, const Tensor& bias) {
  check_matrix(m, "add_rowwise");
  if (bias.rank() != 1 || bias.dim(0) != m.cols()) {
    throw DimensionError("add_rowwise: bias " + shape_str(bias.shape()) +
                         " does not match matrix " + shape_str(m.shape()));
  }
  const std::size_t n = m.rows(), d = m.cols();
  std::vector<double> out(n * d);
  auto mv = m.values(), bv = bias.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = mv[i * d + j] + bv[j];
  Tensor r = result_tensor(m.shape(), std::move(out));
  auto rm = m.impl_ptr(), rb = bias.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rm, rb, rr, n, d]() {
    const auto& gr = rr->grad;
    if (accum_target(rm)) {
      auto& dm = rm->grad_buffer();
      for (std::size_t i = 0; i < gr.size(); ++i) dm[i] += gr[i];
    }
    if (accum_target(rb)) {
      auto& db = rb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) db[j] += gr[i * d + j];
    }
  });
  return r;
}

Tensor scale(Graph& g, const Tensor& x, double c) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
  Tensor r = result_tensor(x.shape(), std::move(out));
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr, c]() {
    if (!accum_target(rx)) return;
    const auto& gr = rr->grad;
    auto& dx = rx->grad_buffer();
    for (std::size_t i = 0; i < gr.size(); ++i) dx[i] += c * gr[i];
  });
  return r;
}

Tensor relu(Graph& g, const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Tensor r = result_tensor(x.shape(), std::move(out));
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr]() {
    if (!accum_target(rx)) return;
    const auto& gr = rr->grad;
    auto& dx = rx->grad_buffer();
    // Gradient passes only where the input was strictly positive.
    for (std::size_t i = 0; i < gr.size(); ++i)
      if (rx->data[i] > 0.0) dx[i] += gr[i];
  });
  return r;
}

Tensor transpose(Graph& g, const Tensor& x) {
  check_matrix(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  Tensor r = result_tensor({n, m}, std::move(out));
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr, m, n]() {
    if (!accum_target(rx)) return;
    const auto& gr = rr->grad;
    auto& dx = rx->grad_buffer();
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i) dx[i * n + j] += gr[j * m + i];
  });
  return r;
}

Tensor concat_cols(Graph& g, const Tensor& a, const Tensor& b) {
  check_matrix(a, "concat_cols");
  check_matrix(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.rows(), da = a.cols(), db = b.cols();
  std::vector<double> out(n * (da + db));
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data() + i * da, da, out.data() + i * (da + db));
    std::copy_n(bv.data() + i * db, db, out.data() + i * (da + db) + da);
  }
  Tensor r = result_tensor({n, da + db}, std::move(out));
  auto ra = a.impl_ptr(), rb = b.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [ra, rb, rr, n, da, db]() {
    const auto& gr = rr->grad;
    const std::size_t d = da + db;
    if (accum_target(ra)) {
      auto& ga = ra->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < da; ++j) ga[i * da + j] += gr[i * d + j];
    }
    if (accum_target(rb)) {
      auto& gb = rb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < db; ++j) gb[i * db + j] += gr[i * d + da + j];
    }
  });
  return r;
}

Tensor slice_cols(Graph& g, const Tensor& x, std::size_t lo, std::size_t hi) {
  check_matrix(x, "slice_cols");
  if (lo >= hi || hi > x.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(lo) + "," +
                         std::to_string(hi) + ") invalid for " + shape_str(x.shape()));
  }
  const std::size_t n = x.rows(), d = x.cols(), w = hi - lo;
  std::vector<double> out(n * w);
  auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + i * d + lo, w, out.data() + i * w);
  Tensor r = result_tensor({n, w}, std::move(out));
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr, n, d, lo, w]() {
    if (!accum_target(rx)) return;
    const auto& gr = rr->grad;
    auto& dx = rx->grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) dx[i * d + lo + j] += gr[i * w + j];
  });
  return r;
}

Tensor sum(Graph& g, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor r = result_tensor({}, {s});
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr]() {
    if (!accum_target(rx)) return;
    const double gr = rr->grad[0];
    auto& dx = rx->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gr;
  });
  return r;
}

namespace {

Tensor softmax_ce_impl(Graph& g, const Tensor& logits,
                       std::span<const std::size_t> labels, bool mean) {
  check_matrix(logits, "softmax_cross_entropy");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (n == 0) throw ContractError("softmax_cross_entropy: empty batch");
  if (labels.size() != n) {
    throw ContractError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw LabelError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " out of range [0," + std::to_string(c) + ")");
    }
  }
  auto lv = logits.values();
  for (double v : lv) {
    if (!std::isfinite(v)) throw NumericError("softmax_cross_entropy: non-finite logit");
  }
  // Probabilities are cached for the backward closure.
  auto probs = std::make_shared<std::vector<double>>(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lv.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    const double log_denom = std::log(denom);
    total += log_denom - (row[labels[i]] - mx);
    double* prow = probs->data() + i * c;
    for (std::size_t j = 0; j < c; ++j) prow[j] = std::exp(row[j] - mx) / denom;
  }
  const double factor = mean ? 1.0 / static_cast<double>(n) : 1.0;
  Tensor r = result_tensor({}, {total * factor});
  auto rl = logits.impl_ptr(), rr = r.impl_ptr();
  std::vector<std::size_t> labels_copy(labels.begin(), labels.end());
  g.record(r, [rl, rr, probs, labels_copy, n, c, factor]() {
    if (!accum_target(rl)) return;
    const double gr = rr->grad[0] * factor;
    auto& dl = rl->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      const double* prow = probs->data() + i * c;
      double* drow = dl.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) drow[j] += gr * prow[j];
      drow[labels_copy[i]] -= gr;
    }
  });
  return r;
}

}  // namespace

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             std::span<const std::size_t> labels) {
  return softmax_ce_impl(g, logits, labels, /*mean=*/true);
}

Tensor softmax_cross_entropy_sum(Graph& g, const Tensor& logits,
                                 std::span<const std::size_t> labels) {
  return softmax_ce_impl(g, logits, labels, /*mean=*/false);
}

Tensor gradient_reversal(Graph& g, const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor r = result_tensor(x.shape(), std::move(out));
  auto rx = x.impl_ptr(), rr = r.impl_ptr();
  g.record(r, [rx, rr]() {
    if (!accum_target(rx)) return;
    const auto& gr = rr->grad;
    auto& dx = rx->grad_buffer();
    for (std::size_t i = 0; i < gr.size(); ++i) dx[i] -= gr[i];
  });
  return r;
}

// ---- non-differentiable helpers -------------------------------------------

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  check_matrix(x, "gather_rows");
  const std::size_t d = x.cols();
  std::vector<double> out(rows.size() * d);
  auto xv = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[i] * d, d, out.data() + i * d);
  }
  return Tensor::from_values({rows.size(), d}, std::move(out));
}

Tensor vstack_data(const Tensor& a, const Tensor& b) {
  check_matrix(a, "vstack_data");
  check_matrix(b, "vstack_data");
  if (a.cols() != b.cols()) {
    throw DimensionError("vstack_data: column counts differ: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return Tensor::from_values({a.rows() + b.rows(), a.cols()}, std::move(out));
}

}  // namespace acl
