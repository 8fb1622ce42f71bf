#pragma once

// Dense row-major matrices of doubles and a reverse-mode tape over a small set
// of primitives. Every forward op rejects non-finite results.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "depgraph/error.hpp"

namespace depgraph {

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  bool all_finite() const;
  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Compressed sparse rows.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_index;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  double at(std::size_t r, std::size_t c) const;
  Tensor2 to_dense() const;
  SparseMatrix transposed() const;
};

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Records primitive ops in creation order; backward() replays them in
// reverse. Sparse matrices passed to spmm() must outlive the tape.
class Tape {
 public:
  Var constant(Tensor2 value);
  Var parameter(Tensor2 value);

  const Tensor2& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor2& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var spmm(const SparseMatrix& s, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcasts a 1 x c row over every row of a
  Var hadamard(Var a, Var b);
  Var scale(Var a, double factor);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var log(Var a);
  Var sum(Var a);
  Var softmax_rows(Var a);
  Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var transpose(Var a);

  // Gradients of a 1 x 1 `loss` for every recorded value. Returns the
  // parameters the loss does not depend on; their gradients stay zero.
  std::vector<Var> backward(Var loss);

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool requires_grad = false;
    bool is_parameter = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var record(Tensor2 value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);
  Node& node(std::size_t id) { return nodes_[id]; }

  std::vector<Node> nodes_;
};

}  // namespace depgraph
