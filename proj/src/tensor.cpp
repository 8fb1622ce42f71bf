#include "depgraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace depgraph {

namespace {

void require(bool ok, const char* op, const Tensor2& a, const Tensor2& b) {
  if (!ok) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{}: {}x{} vs {}x{}", op, a.rows(),
                                                      a.cols(), b.rows(), b.cols()));
  }
}

// out += a * b
void gemm_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * b(p, j);
    }
  }
}

// out += a^T * b
void gemm_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < k; ++i) {
      const double api = a(p, i);
      if (api == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += api * b(p, j);
    }
  }
}

// out += a * b^T
void gemm_nt_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(j, p);
      out(i, j) += s;
    }
  }
}

Tensor2 map(const Tensor2& a, double (*f)(double)) {
  Tensor2 out(a.rows(), a.cols());
  std::transform(a.data().begin(), a.data().end(), out.data().begin(), f);
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} values for a {}x{} tensor", data_.size(), rows_, cols_));
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto begin = col_index.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto end = col_index.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(begin, end, c);
  return (it != end && *it == c) ? values[static_cast<std::size_t>(it - col_index.begin())] : 0.0;
}

Tensor2 SparseMatrix::to_dense() const {
  Tensor2 d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d(r, col_index[k]) = values[k];
  }
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_index) ++t.row_ptr[c + 1];
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  t.col_index.resize(nnz());
  t.values.resize(nnz());
  auto next = t.row_ptr;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      auto slot = next[col_index[k]]++;
      t.col_index[slot] = r;
      t.values[slot] = values[k];
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor2 value) {
  if (!value.all_finite()) throw Error(ErrorCode::NonFiniteResult, "constant");
  Node n;
  n.grad = Tensor2(value.rows(), value.cols());
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor2 value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  nodes_.back().is_parameter = true;
  return v;
}

Var Tape::record(Tensor2 value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFiniteResult, fmt::format("{} produced a non-finite value", op));
  }
  Node n;
  n.grad = Tensor2(value.rows(), value.cols());
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.cols() == B.rows(), "matmul", A, B);
  Tensor2 out(A.rows(), B.cols());
  gemm_acc(A, B, out);
  return record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (t.node(a.id).requires_grad) gemm_nt_acc(g, t.node(b.id).value, t.node(a.id).grad);
    if (t.node(b.id).requires_grad) gemm_tn_acc(t.node(a.id).value, g, t.node(b.id).grad);
  }, "matmul");
}

Var Tape::spmm(const SparseMatrix& s, Var b) {
  const auto& B = value(b);
  if (s.cols != B.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("spmm: {}x{} vs {}x{}", s.rows, s.cols, B.rows(), B.cols()));
  }
  Tensor2 out(s.rows, B.cols());
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
      const double w = s.values[k];
      const auto src = s.col_index[k];
      for (std::size_t j = 0; j < B.cols(); ++j) out(r, j) += w * B(src, j);
    }
  }
  const SparseMatrix* sp = &s;
  return record(std::move(out), {b.id}, [sp, b](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gb = t.node(b.id).grad;
    for (std::size_t r = 0; r < sp->rows; ++r) {
      for (std::size_t k = sp->row_ptr[r]; k < sp->row_ptr[r + 1]; ++k) {
        const double w = sp->values[k];
        const auto src = sp->col_index[k];
        for (std::size_t j = 0; j < g.cols(); ++j) gb(src, j) += w * g(r, j);
      }
    }
  }, "spmm");
}

Var Tape::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.same_shape(B), "add", A, B);
  Tensor2 out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += B.data()[i];
  return record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad.data();
    for (auto in : {a.id, b.id}) {
      if (!t.node(in).requires_grad) continue;
      auto dst = t.node(in).grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  }, "add");
}

Var Tape::add_row(Var a, Var row) {
  const auto& A = value(a);
  const auto& R = value(row);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row", A, R);
  Tensor2 out = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += R(0, j);
  }
  return record(std::move(out), {a.id, row.id}, [a, row](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (t.node(a.id).requires_grad) {
      auto dst = t.node(a.id).grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
    }
    if (t.node(row.id).requires_grad) {
      auto& gr = t.node(row.id).grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    }
  }, "add_row");
}

Var Tape::hadamard(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.same_shape(B), "hadamard", A, B);
  Tensor2 out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = A.data()[i] * B.data()[i];
  return record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    if (t.node(a.id).requires_grad) {
      auto dst = t.node(a.id).grad.data();
      auto other = t.node(b.id).value.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
    if (t.node(b.id).requires_grad) {
      auto dst = t.node(b.id).grad.data();
      auto other = t.node(a.id).value.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
  }, "hadamard");
}

Var Tape::scale(Var a, double factor) {
  Tensor2 out = value(a);
  for (auto& v : out.data()) v *= factor;
  return record(std::move(out), {a.id}, [a, factor](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    auto dst = t.node(a.id).grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
  }, "scale");
}

Var Tape::sigmoid(Var a) {
  Tensor2 out = map(value(a), sigmoid_scalar);
  return record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    const auto y = t.node(self).value.data();
    auto dst = t.node(a.id).grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
  }, "sigmoid");
}

Var Tape::tanh(Var a) {
  Tensor2 out = map(value(a), [](double x) { return std::tanh(x); });
  return record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    const auto y = t.node(self).value.data();
    auto dst = t.node(a.id).grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
  }, "tanh");
}

Var Tape::log(Var a) {
  Tensor2 out = map(value(a), [](double x) {
    return x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
  });
  return record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    const auto x = t.node(a.id).value.data();
    auto dst = t.node(a.id).grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] / x[i];
  }, "log");
}

Var Tape::sum(Var a) {
  const auto& A = value(a);
  double s = std::accumulate(A.data().begin(), A.data().end(), 0.0);
  return record(Tensor2(1, 1, s), {a.id}, [a](Tape& t, std::size_t self) {
    const double g = t.node(self).grad(0, 0);
    for (auto& v : t.node(a.id).grad.data()) v += g;
  }, "sum");
}

Var Tape::softmax_rows(Var a) {
  const auto& A = value(a);
  Tensor2 out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto r = A.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) z += (out(i, j) = std::exp(A(i, j) - mx));
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) /= z;
  }
  return record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    auto& dst = t.node(a.id).grad;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dst(i, j) += y(i, j) * (g(i, j) - dot);
    }
  }, "softmax_rows");
}

Var Tape::layer_norm(Var x, Var gain, Var shift, double eps) {
  const auto& X = value(x);
  const auto& G = value(gain);
  const auto& B = value(shift);
  require(G.rows() == 1 && G.cols() == X.cols(), "layer_norm gain", X, G);
  require(B.rows() == 1 && B.cols() == X.cols(), "layer_norm shift", X, B);
  const std::size_t n = X.rows(), c = X.cols();

  Tensor2 normalized(n, c);
  std::vector<double> inv_std(n);
  Tensor2 out(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = X.row(i);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(c);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      normalized(i, j) = (X(i, j) - mean) * inv_std[i];
      out(i, j) = normalized(i, j) * G(0, j) + B(0, j);
    }
  }
  return record(
      std::move(out), {x.id, gain.id, shift.id},
      [x, gain, shift, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& G = t.node(gain.id).value;
        const std::size_t n = g.rows(), c = g.cols();
        if (t.node(gain.id).requires_grad || t.node(shift.id).requires_grad) {
          auto& gg = t.node(gain.id).grad;
          auto& gs = t.node(shift.id).grad;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              gg(0, j) += g(i, j) * normalized(i, j);
              gs(0, j) += g(i, j);
            }
          }
        }
        if (t.node(x.id).requires_grad) {
          auto& gx = t.node(x.id).grad;
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < n; ++i) {
            double mean_dy = 0.0, mean_dy_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dy = g(i, j) * G(0, j);
              mean_dy += dy;
              mean_dy_xhat += dy * normalized(i, j);
            }
            mean_dy *= inv_c;
            mean_dy_xhat *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double dy = g(i, j) * G(0, j);
              gx(i, j) += inv_std[i] * (dy - mean_dy - normalized(i, j) * mean_dy_xhat);
            }
          }
        }
      },
      "layer_norm");
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> rows) {
  const auto& A = value(a);
  Tensor2 out(rows.size(), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) {
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("gather_rows: row {} of {}", rows[i], A.rows()));
    }
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(rows[i], j);
  }
  return record(std::move(out), {a.id}, [a, rows = std::move(rows)](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& dst = t.node(a.id).grad;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) dst(rows[i], j) += g(i, j);
    }
  }, "gather_rows");
}

Var Tape::concat_cols(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.rows() == B.rows(), "concat_cols", A, B);
  Tensor2 out(A.rows(), A.cols() + B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(i, j);
    for (std::size_t j = 0; j < B.cols(); ++j) out(i, A.cols() + j) = B(i, j);
  }
  return record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const std::size_t ca = t.node(a.id).value.cols();
    if (t.node(a.id).requires_grad) {
      auto& ga = t.node(a.id).grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
      }
    }
    if (t.node(b.id).requires_grad) {
      auto& gb = t.node(b.id).grad;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ca + j);
      }
    }
  }, "concat_cols");
}

Var Tape::concat_rows(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.cols() == B.cols(), "concat_rows", A, B);
  std::vector<double> data(A.data().begin(), A.data().end());
  data.insert(data.end(), B.data().begin(), B.data().end());
  Tensor2 out(A.rows() + B.rows(), A.cols(), std::move(data));
  return record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto g = t.node(self).grad.data();
    const std::size_t split = t.node(a.id).value.size();
    if (t.node(a.id).requires_grad) {
      auto dst = t.node(a.id).grad.data();
      for (std::size_t i = 0; i < split; ++i) dst[i] += g[i];
    }
    if (t.node(b.id).requires_grad) {
      auto dst = t.node(b.id).grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[split + i];
    }
  }, "concat_rows");
}

Var Tape::transpose(Var a) {
  const auto& A = value(a);
  Tensor2 out(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
  }
  return record(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& dst = t.node(a.id).grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) dst(j, i) += g(i, j);
    }
  }, "transpose");
}

std::vector<Var> Tape::backward(Var loss) {
  auto& root = node(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward: loss must be 1x1");
  }
  for (auto& n : nodes_) std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
  root.grad(0, 0) = 1.0;

  std::vector<bool> reached(nodes_.size(), false);
  reached[loss.id] = true;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!reached[i]) continue;
    auto& n = nodes_[i];
    for (auto in : n.inputs) reached[in] = true;
    if (n.backward) n.backward(*this, i);
  }

  std::vector<Var> disconnected;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_parameter && !reached[i]) disconnected.push_back(Var{i});
  }
  return disconnected;
}

}  // namespace depgraph
