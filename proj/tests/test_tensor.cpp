#include <doctest.h>

#include <cmath>
#include <random>

#include "depgraph/tensor.hpp"
#include "gradcheck.hpp"

using namespace depgraph;
using gradcheck::max_error;
using gradcheck::random_tensor;
using gradcheck::weighted_sum;

namespace {

constexpr int kTrials = 100;

}  // namespace

TEST_CASE("forward examples") {
  std::mt19937_64 rng(1);
  Tape tape;
  auto m = random_tensor(rng, 3, 5);
  auto prod = tape.matmul(tape.constant(Tensor2::identity(3)), tape.constant(m));
  CHECK(tape.value(prod) == m);

  auto sm = tape.softmax_rows(tape.constant(Tensor2(1, 3, 0.0)));
  for (double p : tape.value(sm).data()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto zero = tape.constant(Tensor2(1, 1, 0.0));
  CHECK(tape.value(tape.sigmoid(zero))(0, 0) == 0.5);
  CHECK(tape.value(tape.tanh(zero))(0, 0) == 0.0);
}

TEST_CASE("softmax rows sum to one and stay positive") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    Tape tape;
    auto x = random_tensor(rng, 1 + rng() % 4, 1 + rng() % 9, -30, 30);
    const auto& p = tape.value(tape.softmax_rows(tape.constant(x)));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0;
      for (double v : p.row(r)) {
        CHECK(v > 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("layer norm output has zero mean and unit variance before the affine part") {
  std::mt19937_64 rng(3);
  Tape tape;
  auto x = tape.constant(random_tensor(rng, 4, 8));
  auto y = tape.layer_norm(x, tape.constant(Tensor2(1, 8, 1.0)), tape.constant(Tensor2(1, 8, 0.0)));
  const auto& v = tape.value(y);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (double e : v.row(r)) mean += e;
    mean /= 8;
    for (double e : v.row(r)) var += (e - mean) * (e - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("errors") {
  Tape tape;
  auto a = tape.constant(Tensor2(2, 3, 1.0));
  auto b = tape.constant(Tensor2(2, 3, 1.0));
  auto expect = [](ErrorCode code, auto&& fn) {
    try {
      fn();
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect(ErrorCode::ShapeMismatch, [&] { tape.matmul(a, b); });
  expect(ErrorCode::ShapeMismatch, [&] { tape.add(a, tape.transpose(b)); });
  expect(ErrorCode::NonFiniteResult, [&] { tape.log(tape.constant(Tensor2(1, 1, 0.0))); });
  expect(ErrorCode::NonFiniteResult, [&] { tape.log(tape.constant(Tensor2(1, 1, -1.0))); });
  expect(ErrorCode::ShapeMismatch, [&] { tape.backward(a); });
}

TEST_CASE("forward passes are bit-identical") {
  std::mt19937_64 rng(4);
  auto x = random_tensor(rng, 5, 6);
  auto w = random_tensor(rng, 6, 6);
  auto run = [&] {
    Tape tape;
    auto h = tape.tanh(tape.matmul(tape.constant(x), tape.constant(w)));
    return tape.value(tape.softmax_rows(h));
  };
  CHECK(run() == run());
}

TEST_CASE("disconnected parameters keep a zero gradient") {
  Tape tape;
  auto used = tape.parameter(Tensor2(1, 2, 1.0));
  auto unused = tape.parameter(Tensor2(2, 2, 3.0));
  auto loss = tape.sum(tape.hadamard(used, used));
  auto disconnected = tape.backward(loss);
  REQUIRE(disconnected.size() == 1);
  CHECK(disconnected.front().id == unused.id);
  for (double g : tape.grad(unused).data()) CHECK(g == 0.0);
}

TEST_CASE("closed-form gradients") {
  std::mt19937_64 rng(5);
  SUBCASE("sum of squares") {
    auto x0 = random_tensor(rng, 4, 4);
    Tape tape;
    auto x = tape.parameter(x0);
    tape.backward(tape.sum(tape.hadamard(x, x)));
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(tape.grad(x).data()[i] == doctest::Approx(2 * x0.data()[i]).epsilon(1e-14));
    }
    CHECK(max_error({x0}, [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.hadamard(v[0], v[0]));
          }) < gradcheck::kTolerance);
  }
  SUBCASE("softmax with log likelihood gives p minus one-hot") {
    auto y0 = random_tensor(rng, 1, 5);
    Tensor2 onehot(1, 5, 0.0);
    onehot(0, 2) = 1.0;
    Tape tape;
    auto y = tape.parameter(y0);
    auto p = tape.softmax_rows(y);
    auto loss = tape.scale(tape.sum(tape.hadamard(tape.log(p), tape.constant(onehot))), -1.0);
    tape.backward(loss);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(tape.grad(y)(0, j) ==
            doctest::Approx(tape.value(p)(0, j) - onehot(0, j)).epsilon(1e-12));
    }
  }
  SUBCASE("layer norm of a constant row has no gradient along the mean direction") {
    Tensor2 x0(1, 6, 0.7);
    auto gain = random_tensor(rng, 1, 6);
    auto shift = random_tensor(rng, 1, 6);
    const auto seed = rng();
    auto f = [&](Tape& t, const std::vector<Var>& v) {
      return weighted_sum(t, t.layer_norm(v[0], v[1], v[2]), seed);
    };
    Tape tape;
    auto x = tape.parameter(x0);
    tape.backward(f(tape, {x, tape.constant(gain), tape.constant(shift)}));
    double along_mean = 0;
    for (double g : tape.grad(x).data()) along_mean += g;
    CHECK(std::abs(along_mean) < 1e-9);
    CHECK(max_error({x0, gain, shift}, f) < gradcheck::kTolerance);
  }
}

TEST_CASE("every primitive passes the finite-difference check") {
  for (const auto& p : gradcheck::primitives()) {
    INFO(std::string(p.name));
    CHECK(gradcheck::worst_primitive_error(p, kTrials) < gradcheck::kTolerance);
  }
}

TEST_CASE("spmm passes the finite-difference check") {
  // The sparse operand is a constant; only the dense side is differentiated.
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    auto s = gradcheck::random_sparse(rng, 1 + rng() % 5, 4);
    auto b = random_tensor(rng, 4, 1 + rng() % 4);
    const auto seed = rng();
    worst = std::max(worst, max_error({b}, [&](Tape& tape, const std::vector<Var>& v) {
                       return weighted_sum(tape, tape.spmm(s, v[0]), seed);
                     }));
  }
  CHECK(worst < gradcheck::kTolerance);
}

TEST_CASE("spmm equals the dense product") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    auto s = gradcheck::random_sparse(rng, 1 + rng() % 6, 5);
    auto b = random_tensor(rng, 5, 3);
    Tape tape;
    auto sparse = tape.value(tape.spmm(s, tape.constant(b)));
    auto dense = tape.value(tape.matmul(tape.constant(s.to_dense()), tape.constant(b)));
    for (std::size_t i = 0; i < sparse.size(); ++i) {
      CHECK(sparse.data()[i] == doctest::Approx(dense.data()[i]).epsilon(1e-14));
    }
    CHECK(s.transposed().transposed().to_dense() == s.to_dense());
  }
}
