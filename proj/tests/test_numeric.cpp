#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"

using namespace dgs;
using dgs::oracle::gradient_check;

namespace {

constexpr double kGradTol = 1e-4;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) { return rng.uniform_matrix(r, c, -1.0, 1.0); }

}  // namespace

TEST(Matrix, MultiplyByIdentity) {
  const Matrix a{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul(a, Matrix::identity(2)), a);
}

TEST(Matrix, MultiplyAnnihilatedByZeros) {
  EXPECT_EQ(matmul(Matrix{{1, 0}, {0, 0}}, Matrix{{0}, {5}}), (Matrix{{0}, {0}}));
}

TEST(Matrix, HandMultiplication) {
  EXPECT_EQ(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{5, 6}, {7, 8}}), (Matrix{{19, 22}, {43, 50}}));
}

TEST(Matrix, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matrix, TransposedProductsAgreeWithNaive) {
  Rng rng(3);
  const Matrix a = random_matrix(rng, 4, 3), b = random_matrix(rng, 4, 5), c = random_matrix(rng, 6, 3);
  EXPECT_LT(oracle::max_abs_diff(matmul_tn(a, b), oracle::naive_matmul(transpose(a), b)), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(matmul_nt(a, c), oracle::naive_matmul(a, transpose(c))), 1e-12);
}

TEST(Matrix, NonFiniteEntriesAreRejected) {
  EXPECT_THROW(softmax_rows(Matrix{{0.0, std::nan("")}}), NumericError);
  Tape tape;
  EXPECT_THROW(tape.constant(Matrix{{std::numeric_limits<double>::infinity()}}), NumericError);
}

TEST(Softmax, EqualLogits) {
  EXPECT_EQ(softmax_rows(Matrix{{0, 0}}), (Matrix{{0.5, 0.5}}));
}

TEST(Softmax, LargeEqualLogitsAreStable) {
  EXPECT_EQ(softmax_rows(Matrix{{1000, 1000}}), (Matrix{{0.5, 0.5}}));
}

TEST(Softmax, ClosedForm) {
  const Matrix s = softmax_rows(Matrix{{0, std::log(3.0)}});
  EXPECT_NEAR(s(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(s(0, 1), 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndIgnoreRowShift) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = rng.uniform_matrix(3, 5, -20.0, 20.0);
    const Matrix s = softmax_rows(m);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double total = 0.0;
      for (double v : s.row(i)) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
      const double shift = rng.uniform(-50.0, 50.0);
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += shift;
    }
    EXPECT_LT(oracle::max_abs_diff(softmax_rows(m), s), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(s, oracle::naive_softmax_rows(m)), 1e-12);
  }
}

TEST(Backward, SumGivesAllOnes) {
  Parameter p("p", Matrix{{1, -2, 3}, {4, 5, -6}});
  Tape tape;
  tape.backward(ad::sum(tape.param(p)));
  EXPECT_EQ(p.grad, Matrix::ones(2, 3));
}

TEST(Backward, HalfSquaredNorm) {
  Parameter p("p", Matrix{{3}});
  Tape tape;
  tape.backward(ad::scale(ad::squared_frobenius(tape.param(p)), 0.5));
  EXPECT_EQ(p.grad, (Matrix{{3}}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Parameter p("p", Matrix(2, 2, 1.0));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(p)), ContractError);
}

TEST(Backward, UnreachedParameterGetsZero) {
  Parameter used("used", Matrix(1, 2, 1.0)), unused("unused", Matrix(2, 2, 4.0));
  Tape tape;
  tape.param(unused);
  tape.backward(ad::sum(tape.param(used)));
  EXPECT_EQ(unused.grad, Matrix(2, 2));
}

TEST(Backward, RepeatedPassAfterResetIsIdentical) {
  Rng rng(5);
  Parameter a("a", random_matrix(rng, 3, 4)), b("b", random_matrix(rng, 4, 2));
  const auto run = [&] {
    zero_grad({&a, &b});
    Tape tape;
    const Var h = ad::sigmoid(ad::matmul(tape.param(a), tape.param(b)));
    tape.backward(ad::squared_frobenius(h));
    return std::pair{a.grad, b.grad};
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second, second.second);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Parameter p("p", Matrix{{2}});
  Tape tape;
  const Var x = tape.param(p);
  tape.backward(ad::sum(ad::hadamard(x, x)));  // d/dp p^2 = 2p
  EXPECT_EQ(p.grad, (Matrix{{4}}));
}

// Each primitive is checked through loss = sum(op(P) .* R) with a fixed
// random R so every output entry contributes a distinct weight.
class PrimitiveGradient : public ::testing::Test {
 protected:
  Rng rng{2024};
  Parameter a{"a", random_matrix(rng, 3, 4)};
  Parameter b{"b", random_matrix(rng, 3, 4)};
  Matrix weights = random_matrix(rng, 3, 4);

  double check_unary(const std::function<Var(const Var&)>& op, const Matrix& w) {
    const Matrix r = w;
    return gradient_check({&a}, [&](Tape& t) { return ad::sum(ad::hadamard(op(t.param(a)), t.constant(r))); }).worst;
  }
  double check_unary(const std::function<Var(const Var&)>& op) { return check_unary(op, weights); }
};

TEST_F(PrimitiveGradient, Matmul) {
  Parameter c("c", random_matrix(rng, 4, 2));
  const Matrix r = random_matrix(rng, 3, 2);
  const auto res = gradient_check(
      {&a, &c}, [&](Tape& t) { return ad::sum(ad::hadamard(ad::matmul(t.param(a), t.param(c)), t.constant(r))); });
  EXPECT_LT(res.worst, kGradTol) << res.worst_name;
}

TEST_F(PrimitiveGradient, AddSubHadamard) {
  const auto res = gradient_check({&a, &b}, [&](Tape& t) {
    const Var x = t.param(a), y = t.param(b);
    return ad::sum(ad::hadamard(ad::add(ad::hadamard(x, y), ad::sub(x, y)), t.constant(weights)));
  });
  EXPECT_LT(res.worst, kGradTol) << res.worst_name;
}

TEST_F(PrimitiveGradient, Relu) { EXPECT_LT(check_unary([](const Var& x) { return ad::relu(x); }), kGradTol); }

TEST_F(PrimitiveGradient, LeakyRelu) {
  EXPECT_LT(check_unary([](const Var& x) { return ad::leaky_relu(x, 0.1); }), kGradTol);
}

TEST_F(PrimitiveGradient, Sigmoid) { EXPECT_LT(check_unary([](const Var& x) { return ad::sigmoid(x); }), kGradTol); }

TEST_F(PrimitiveGradient, Exp) { EXPECT_LT(check_unary([](const Var& x) { return ad::exp(x); }), kGradTol); }

TEST_F(PrimitiveGradient, SoftmaxRows) {
  EXPECT_LT(check_unary([](const Var& x) { return ad::softmax_rows(x); }), kGradTol);
}

TEST_F(PrimitiveGradient, Transpose) {
  EXPECT_LT(check_unary([](const Var& x) { return ad::transpose(x); }, transpose(weights)), kGradTol);
}

TEST_F(PrimitiveGradient, RowMean) {
  EXPECT_LT(check_unary([](const Var& x) { return ad::row_mean(x); }, Matrix{{0.3, -1.2, 0.7, 2.0}}), kGradTol);
}

TEST_F(PrimitiveGradient, SquaredFrobenius) {
  const auto res = gradient_check({&a}, [&](Tape& t) { return ad::squared_frobenius(t.param(a)); });
  EXPECT_LT(res.worst, kGradTol);
}

TEST_F(PrimitiveGradient, ScaleAddScalarClampSlice) {
  const auto res = gradient_check({&a}, [&](Tape& t) {
    const Var x = ad::add_scalar(ad::scale(t.param(a), 1.7), 0.2);
    const Var left = ad::slice_cols(ad::clamp(x, -0.9, 0.9), 0, 2);
    return ad::sum(ad::hadamard(left, t.constant(Matrix{{1, 2}, {3, 4}, {5, 6}})));
  });
  EXPECT_LT(res.worst, kGradTol);
}

TEST_F(PrimitiveGradient, ConcatAndReshape) {
  const Matrix r = random_matrix(rng, 4, 6);
  const auto res = gradient_check({&a, &b}, [&](Tape& t) {
    const std::vector<Var> parts{t.param(a), ad::scale(t.param(b), -2.0)};
    const Var joined = ad::reshape(ad::concat_cols(parts), 4, 6);
    return ad::sum(ad::hadamard(joined, t.constant(r)));
  });
  EXPECT_LT(res.worst, kGradTol);
}

TEST(Adam, ZeroGradientZeroDecayLeavesParameters) {
  Parameter p("p", Matrix{{1.5, -2.0}});
  Adam opt({&p}, {.learning_rate = 0.1});
  for (int i = 0; i < 5; ++i) {
    p.zero_grad();
    opt.step();
  }
  EXPECT_EQ(p.value, (Matrix{{1.5, -2.0}}));
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(Adam, ConstantGradientMovesAgainstItsSign) {
  Parameter p("p", Matrix{{0.0, 0.0}});
  Adam opt({&p}, {.learning_rate = 0.01});
  for (int i = 0; i < 50; ++i) {
    p.grad = Matrix{{2.0, -3.0}};
    opt.step();
  }
  EXPECT_LT(p.value(0, 0), 0.0);
  EXPECT_GT(p.value(0, 1), 0.0);
}

TEST(Adam, SingleStepOnSquare) {
  Parameter x("x", Matrix{{1.0}});
  Adam opt({&x}, {.learning_rate = 0.1});
  Tape tape;
  tape.backward(ad::squared_frobenius(tape.param(x)));
  opt.step();
  EXPECT_LT(std::abs(x.value[0]), 1.0);
  EXPECT_NEAR(x.value[0], 0.9, 1e-6);  // bias-corrected first step moves by lr
}

TEST(Adam, MomentsMatchParameterShapesAndStepsIncrease) {
  Parameter a("a", Matrix(2, 3)), b("b", Matrix(4, 1));
  Adam opt({&a, &b}, {});
  for (std::size_t i = 1; i <= 3; ++i) {
    opt.step();
    EXPECT_EQ(opt.steps(), i);
  }
  EXPECT_TRUE(opt.first_moment(0).same_shape(a.value));
  EXPECT_TRUE(opt.second_moment(1).same_shape(b.value));
}

TEST(Adam, DecoupledDecayShrinksWithoutGradient) {
  Parameter p("p", Matrix{{2.0}});
  Adam opt({&p}, {.learning_rate = 0.1, .weight_decay = 0.5});
  p.zero_grad();
  opt.step();
  EXPECT_NEAR(p.value[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
}

TEST(Rng, SeededSequencesRepeat) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_EQ(Rng(9).uniform_matrix(3, 3, -1, 1), Rng(9).uniform_matrix(3, 3, -1, 1));
}
