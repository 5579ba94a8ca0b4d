#include <gtest/gtest.h>

#include "matcomp/autodiff.hpp"
#include "matcomp/nn.hpp"
#include "test_util.hpp"

using namespace matcomp;
using namespace matcomp::nn;
using test::grad_check;
using test::random_matrix;

namespace {

constexpr double kTol = 1e-4;

// Values bounded away from 0 so relu-like kinks stay out of the finite-difference window.
Matrix away_from_zero(int r, int c, Rng& rng) {
  Matrix m = random_matrix(r, c, rng);
  for (auto& v : m.data) v = v < 0 ? v - 0.1 : v + 0.1;
  return m;
}

// Reduces any output to a scalar with fixed random weights so every entry matters.
Var weighted_sum(Tape& tape, Var out, const Matrix& w) { return sum(mul(out, tape.constant(w))); }

struct OpCase {
  Rng rng{17};
  Param a{"a", Matrix(), kHead};
  Param b{"b", Matrix(), kHead};
  Matrix w;

  void init(Matrix av, Matrix bv, int out_r, int out_c) {
    a = Param("a", std::move(av), kHead);
    b = Param("b", std::move(bv), kHead);
    w = random_matrix(out_r, out_c, rng);
  }
};

#define EXPECT_GRAD_OK(result) EXPECT_LE((result).max_rel_error, kTol) << (result).worst

}  // namespace

TEST(Tape, BackwardTwiceThrows) {
  Tape tape;
  Param p("p", Matrix(1, 1, 2.0), kHead);
  Var loss = sum(tape.param(p));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), std::logic_error);
}

TEST(Tape, GradientsAccumulateAcrossTapes) {
  Param p("p", Matrix(1, 1, 3.0), kHead);
  for (int k = 0; k < 2; ++k) {
    Tape tape;
    tape.backward(scale(tape.param(p), 2.0));
  }
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 4.0);
}

TEST(GradCheck, Matmul) {
  OpCase c;
  c.init(random_matrix(3, 5, c.rng), random_matrix(5, 4, c.rng), 3, 4);
  auto r = grad_check({&c.a, &c.b}, [&](Tape& t) { return weighted_sum(t, matmul(t.param(c.a), t.param(c.b)), c.w); });
  EXPECT_GRAD_OK(r);
}

TEST(GradCheck, AddSubMulWithBroadcast) {
  OpCase c;
  c.init(random_matrix(4, 3, c.rng), random_matrix(1, 3, c.rng), 4, 3);
  for (auto op : {add, sub, mul}) {
    auto r = grad_check({&c.a, &c.b}, [&](Tape& t) { return weighted_sum(t, op(t.param(c.a), t.param(c.b)), c.w); });
    EXPECT_GRAD_OK(r);
  }
  c.init(random_matrix(4, 3, c.rng), random_matrix(4, 3, c.rng), 4, 3);
  for (auto op : {add, sub, mul}) {
    auto r = grad_check({&c.a, &c.b}, [&](Tape& t) { return weighted_sum(t, op(t.param(c.a), t.param(c.b)), c.w); });
    EXPECT_GRAD_OK(r);
  }
}

TEST(GradCheck, ScaleAndAddScalar) {
  OpCase c;
  c.init(random_matrix(3, 3, c.rng), Matrix(1, 1), 3, 3);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, scale(t.param(c.a), -1.7), c.w); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, add_scalar(t.param(c.a), 0.3), c.w); }));
}

TEST(GradCheck, Activations) {
  OpCase c;
  c.init(away_from_zero(4, 5, c.rng), Matrix(1, 1), 4, 5);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, elu(t.param(c.a)), c.w); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, leaky_relu(t.param(c.a), 0.2), c.w); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, relu(t.param(c.a)), c.w); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, sigmoid(t.param(c.a)), c.w); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, exp(t.param(c.a)), c.w); }));
}

TEST(GradCheck, Log) {
  OpCase c;
  c.init(random_matrix(3, 4, c.rng, 0.2, 2.0), Matrix(1, 1), 3, 4);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, log(t.param(c.a)), c.w); }));
}

TEST(GradCheck, Reductions) {
  OpCase c;
  c.init(random_matrix(3, 4, c.rng), Matrix(1, 1), 1, 1);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return scale(sum(t.param(c.a)), 1.3); }));
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return scale(mean(t.param(c.a)), 1.3); }));
}

TEST(GradCheck, SoftmaxRows) {
  OpCase c;
  c.init(random_matrix(4, 5, c.rng, -2, 2), Matrix(1, 1), 4, 5);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, softmax_rows(t.param(c.a)), c.w); }));
}

TEST(GradCheck, ConcatAndGather) {
  OpCase c;
  c.init(random_matrix(3, 2, c.rng), random_matrix(3, 4, c.rng), 3, 6);
  EXPECT_GRAD_OK(grad_check({&c.a, &c.b}, [&](Tape& t) {
    return weighted_sum(t, concat_cols({t.param(c.a), t.param(c.b)}), c.w);
  }));
  c.init(random_matrix(2, 3, c.rng), random_matrix(4, 3, c.rng), 6, 3);
  EXPECT_GRAD_OK(grad_check({&c.a, &c.b}, [&](Tape& t) {
    return weighted_sum(t, concat_rows({t.param(c.a), t.param(c.b)}), c.w);
  }));
  c.init(random_matrix(4, 3, c.rng), Matrix(1, 1), 6, 3);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) {
    return weighted_sum(t, gather_rows(t.param(c.a), {3, 0, 0, 2, 1, 3}), c.w);
  }));
}

TEST(GradCheck, SegmentOps) {
  OpCase c;
  const std::vector<int> seg = {0, 2, 0, 1, 2, 2, 0};
  c.init(random_matrix(7, 3, c.rng), Matrix(1, 1), 3, 3);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, segment_sum(t.param(c.a), seg, 3), c.w); }));
  c.w = random_matrix(7, 3, c.rng);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, segment_softmax(t.param(c.a), seg, 3), c.w); }));
}

TEST(GradCheck, HeadOps) {
  OpCase c;
  c.init(random_matrix(3, 8, c.rng), random_matrix(3, 2, c.rng), 3, 2);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, head_reduce(t.param(c.a), 2), c.w); }));
  c.w = random_matrix(3, 8, c.rng);
  EXPECT_GRAD_OK(grad_check({&c.b}, [&](Tape& t) { return weighted_sum(t, head_expand(t.param(c.b), 4), c.w); }));
  c.w = random_matrix(3, 4, c.rng);
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, head_mean(t.param(c.a), 2), c.w); }));
}

TEST(GradCheck, MulConst) {
  OpCase c;
  c.init(random_matrix(3, 4, c.rng), Matrix(1, 1), 3, 4);
  Matrix mask(3, 4, 0.0);
  for (std::size_t k = 0; k < mask.size(); k += 2) mask.data[k] = 1.25;
  EXPECT_GRAD_OK(grad_check({&c.a}, [&](Tape& t) { return weighted_sum(t, mul_const(t.param(c.a), mask), c.w); }));
}

TEST(GradCheck, EmbeddingBagMean) {
  Rng rng(5);
  Param table("emb", random_matrix(6, 4, rng), kEncoder);
  const Matrix w = random_matrix(3, 4, rng);
  const std::vector<std::vector<int>> bags = {{0, 2, 2}, {}, {5, 1}};
  EXPECT_GRAD_OK(grad_check({&table}, [&](Tape& t) { return weighted_sum(t, embedding_bag_mean(t, table, bags), w); }));
}

TEST(EmbeddingBag, EmptyBagIsZero) {
  Rng rng(5);
  Param table("emb", random_matrix(3, 2, rng), kEncoder);
  Tape t;
  Var out = embedding_bag_mean(t, table, {{}, {1}});
  EXPECT_EQ(out.value()(0, 0), 0.0);
  EXPECT_EQ(out.value()(1, 1), table.value(1, 1));
}

TEST(GradCheck, BatchNorm) {
  Rng rng(6);
  Param x("x", random_matrix(5, 3, rng), kHead);
  Param gamma("gamma", random_matrix(1, 3, rng, 0.5, 1.5), kHead);
  Param beta("beta", random_matrix(1, 3, rng), kHead);
  const Matrix w = random_matrix(5, 3, rng);
  EXPECT_GRAD_OK(grad_check({&x, &gamma, &beta}, [&](Tape& t) {
    return weighted_sum(t, batch_norm_train(t.param(x), t.param(gamma), t.param(beta), 1e-5, nullptr, nullptr), w);
  }));
  Matrix mu = random_matrix(1, 3, rng), var = random_matrix(1, 3, rng, 0.5, 2.0);
  EXPECT_GRAD_OK(grad_check({&x, &gamma, &beta}, [&](Tape& t) {
    return weighted_sum(t, batch_norm_eval(t.param(x), t.param(gamma), t.param(beta), mu, var, 1e-5), w);
  }));
}

TEST(BatchNorm, SingleRowIsAffineOnly) {
  Tape t;
  Var x = t.constant(Matrix::from_rows({{3.0, -1.0}}));
  Var g = t.constant(Matrix::from_rows({{2.0, 2.0}}));
  Var b = t.constant(Matrix::from_rows({{0.5, 0.5}}));
  Var y = batch_norm_train(x, g, b, 1e-5, nullptr, nullptr);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 6.5);
  EXPECT_DOUBLE_EQ(y.value()(0, 1), -1.5);
}

TEST(GradCheck, Losses) {
  Rng rng(9);
  Param logit("logit", random_matrix(5, 1, rng, -3, 3), kHead);
  EXPECT_GRAD_OK(grad_check({&logit}, [&](Tape& t) {
    return bce_with_logits(t.param(logit), {1, 0, 1, 1, 0}, {0.5, 2, 1, 1, 3});
  }));
  Param logits("logits", random_matrix(5, 4, rng, -2, 2), kHead);
  EXPECT_GRAD_OK(grad_check({&logits}, [&](Tape& t) {
    return cross_entropy(t.param(logits), {0, 3, 1, 1, 2}, {1.0, 0.5, 2.0, 1.5});
  }));
}

TEST(Losses, KnownValues) {
  Tape t;
  Var z = t.constant(Matrix::from_rows({{0.0}, {0.0}}));
  EXPECT_NEAR(bce_with_logits(z, {1, 0}).scalar(), std::log(2.0), 1e-12);
  Var l = t.constant(Matrix::from_rows({{0.0, 0.0, 0.0, 0.0}}));
  EXPECT_NEAR(cross_entropy(l, {2}).scalar(), std::log(4.0), 1e-12);
  // Extreme logits stay finite.
  Var big = t.constant(Matrix::from_rows({{800.0}, {-800.0}}));
  EXPECT_NEAR(bce_with_logits(big, {1, 0}).scalar(), 0.0, 1e-12);
}

TEST(GradCheck, ComposedExpression) {
  Rng rng(12);
  Param a("a", random_matrix(4, 3, rng), kHead);
  Param w1("w1", random_matrix(3, 5, rng), kHead);
  const Matrix w = random_matrix(4, 5, rng);
  EXPECT_GRAD_OK(grad_check({&a, &w1}, [&](Tape& t) {
    Var h = sigmoid(matmul(t.param(a), t.param(w1)));
    return weighted_sum(t, softmax_rows(add(h, scale(h, 0.5))), w);
  }));
}
