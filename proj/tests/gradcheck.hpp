#pragma once

// Central finite-difference gradient checks against the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <random>
#include <vector>

#include "depgraph/ggnn.hpp"
#include "depgraph/tensor.hpp"

namespace gradcheck {

using namespace depgraph;

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;
// Entries whose magnitude is below this are compared absolutely.
inline constexpr double kFloor = 1e-3;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline Tensor2 random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -2.0,
                             double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(r, c);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Reduces any output to a scalar with fixed random weights so every output
// entry contributes a distinct amount.
inline Var weighted_sum(Tape& tape, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& v = tape.value(out);
  auto w = tape.constant(random_tensor(rng, v.rows(), v.cols(), 0.5, 1.5));
  return tape.sum(tape.hadamard(out, w));
}

// Largest relative error between the tape gradient and central differences
// over every entry of every input.
inline double max_error(const std::vector<Tensor2>& inputs, const Builder& f) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.parameter(t));
  tape.backward(f(tape, vars));

  auto eval = [&](const std::vector<Tensor2>& xs) {
    Tape t;
    std::vector<Var> vs;
    for (const auto& x : xs) vs.push_back(t.constant(x));
    return t.value(f(t, vs))(0, 0);
  };

  double worst = 0.0;
  auto xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& g = tape.grad(vars[k]);
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k].data()[i];
      xs[k].data()[i] = orig + kStep;
      const double up = eval(xs);
      xs[k].data()[i] = orig - kStep;
      const double down = eval(xs);
      xs[k].data()[i] = orig;
      worst = std::max(worst, relative_error(g.data()[i], (up - down) / (2 * kStep)));
    }
  }
  return worst;
}

inline SparseMatrix random_sparse(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  SparseMatrix s;
  s.rows = r;
  s.cols = c;
  s.row_ptr = {0};
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (rng() % 3 == 0) {
        s.col_index.push_back(j);
        s.values.push_back(random_tensor(rng, 1, 1)(0, 0));
      }
    }
    s.row_ptr.push_back(s.col_index.size());
  }
  return s;
}

struct Primitive {
  const char* name;
  std::size_t n_inputs;
  std::function<std::vector<Tensor2>(std::mt19937_64&)> make;
  Builder op;
};

// Every differentiable tape operation on random shapes. spmm differentiates
// only its dense operand; the sparse one is a constant.
inline std::vector<Primitive> primitives() {
  auto shape = [](std::mt19937_64& rng) { return std::pair{1 + rng() % 4, 1 + rng() % 4}; };
  return {
      {"matmul", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, k] = shape(rng);
         auto c = 1 + rng() % 4;
         return std::vector{random_tensor(rng, r, k), random_tensor(rng, k, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); }},
      {"add", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); }},
      {"add_row", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, 1, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.add_row(v[0], v[1]); }},
      {"hadamard", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.hadamard(v[0], v[1]); }},
      {"scale", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -1.7); }},
      {"sigmoid", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.sigmoid(v[0]); }},
      {"tanh", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.tanh(v[0]); }},
      {"log", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c, 0.1, 2.0)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.log(v[0]); }},
      {"sum", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.sum(v[0]); }},
      {"softmax_rows", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.softmax_rows(v[0]); }},
      {"layer_norm", 3,
       [shape](std::mt19937_64& rng) {
         auto r = 1 + rng() % 4;
         auto c = 2 + rng() % 5;
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, 1, c), random_tensor(rng, 1, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); }},
      {"gather_rows", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) {
         const auto r = t.value(v[0]).rows();
         return t.gather_rows(v[0], {r - 1, 0, r - 1});
       }},
      {"concat_cols", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, r, 1 + rng() % 3)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.concat_cols(v[0], v[1]); }},
      {"concat_rows", 2,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c), random_tensor(rng, 1 + rng() % 3, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.concat_rows(v[0], v[1]); }},
      {"transpose", 1,
       [shape](std::mt19937_64& rng) {
         auto [r, c] = shape(rng);
         return std::vector{random_tensor(rng, r, c)};
       },
       [](Tape& t, const std::vector<Var>& v) { return t.transpose(v[0]); }},
      {"spmm", 1,
       [](std::mt19937_64& rng) { return std::vector{random_tensor(rng, 4, 1 + rng() % 4)}; },
       [](Tape& t, const std::vector<Var>& v) {
         // The tape keeps a reference to the sparse operand.
         static const SparseMatrix s = [] {
           std::mt19937_64 rng(6);
           return random_sparse(rng, 5, 4);
         }();
         return t.spmm(s, v[0]);
       }},
  };
}

// Worst error of `trials` seeded draws of one primitive.
inline double worst_primitive_error(const Primitive& p, int trials) {
  std::mt19937_64 rng(std::hash<std::string>{}(p.name));
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto inputs = p.make(rng);
    if (inputs.size() != p.n_inputs) return std::numeric_limits<double>::infinity();
    const auto seed = rng();
    worst = std::max(worst, max_error(inputs, [&](Tape& tape, const std::vector<Var>& v) {
                       return weighted_sum(tape, p.op(tape, v), seed);
                     }));
  }
  return worst;
}

inline double loss_value(const GgnnParameters& params, const PreparedGraph& g) {
  Tape tape;
  auto bound = bind(tape, params);
  return tape.value(listwise_loss(tape, bound, g))(0, 0);
}

// Same comparison for the full model loss over every parameter tensor.
inline double max_model_error(const GgnnParameters& params, const PreparedGraph& g) {
  Tape tape;
  auto bound = bind(tape, params);
  tape.backward(listwise_loss(tape, bound, g));

  double worst = 0.0;
  auto p = params;
  p.visit(
      [&](const std::string&, Tensor2& value, const Var& var) {
        const auto& grad = tape.grad(var);
        for (std::size_t i = 0; i < value.size(); ++i) {
          const double orig = value.data()[i];
          value.data()[i] = orig + kStep;
          const double up = loss_value(p, g);
          value.data()[i] = orig - kStep;
          const double down = loss_value(p, g);
          value.data()[i] = orig;
          worst = std::max(worst, relative_error(grad.data()[i], (up - down) / (2 * kStep)));
        }
      },
      bound);
  return worst;
}

}  // namespace gradcheck
