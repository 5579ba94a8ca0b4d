#include <gtest/gtest.h>

#include <sstream>

#include "matcomp/nn.hpp"
#include "test_util.hpp"

using namespace matcomp;
using namespace matcomp::nn;
using test::grad_check;
using test::random_matrix;

TEST(Backward, SquareAtThree) {
  Param w("w", Matrix(1, 1, 3.0), kHead);
  Param unused("u", Matrix(1, 1, 1.0), kHead);
  Tape t;
  Var x = t.param(w);
  t.param(unused);
  t.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(unused.grad(0, 0), 0.0);
}

TEST(Schedule, TriangularExamples) {
  TriangularSchedule s{100, 0.1};
  EXPECT_DOUBLE_EQ(s.factor(0), 0.0);
  EXPECT_DOUBLE_EQ(s.factor(5), 0.5);
  EXPECT_DOUBLE_EQ(s.factor(10), 1.0);
  EXPECT_DOUBLE_EQ(s.factor(55), 45.0 / 90.0);
  EXPECT_DOUBLE_EQ(s.factor(100), 0.0);
}

TEST(Adam, FirstStepMatchesClosedForm) {
  Param p("p", Matrix::from_rows({{1.0, -2.0}}), kHead);
  Param e("e", Matrix::from_rows({{1.0}}), kEncoder);
  Param buf("b", Matrix::from_rows({{5.0}}), kBuffer);
  p.grad = Matrix::from_rows({{0.5, -4.0}});
  e.grad = Matrix::from_rows({{2.0}});
  buf.grad = Matrix::from_rows({{1.0}});
  Adam adam;
  adam.step({&p, &e, &buf}, {0.01, 0.1});
  // With bias correction the first step is lr * g / (|g| + eps').
  EXPECT_NEAR(p.value(0, 0), 1.0 - 0.1, 1e-7);
  EXPECT_NEAR(p.value(0, 1), -2.0 + 0.1, 1e-7);
  EXPECT_NEAR(e.value(0, 0), 1.0 - 0.01, 1e-7);
  EXPECT_EQ(buf.value(0, 0), 5.0);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, SecondStepAgainstReference) {
  Param p("p", Matrix(1, 1, 0.0), kHead);
  Adam adam;
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 1.0 : -3.0;
    p.grad(0, 0) = g;
    adam.step({&p}, {0.0, 0.05});
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.value(0, 0), x, 1e-12);
}

TEST(Rng, Deterministic) {
  Rng a(42), b(42), c(43);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(42).next(), c.next());
  Rng r(1);
  for (int k = 0; k < 1000; ++k) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(Encoder, Tokens) {
  CellEncoderConfig cfg;
  EXPECT_EQ(encode_tokens("", cfg), std::vector<int>{cfg.buckets});
  EXPECT_EQ(encode_tokens("SiO2", cfg), encode_tokens("SiO2", cfg));
  EXPECT_NE(encode_tokens("SiO2", cfg), encode_tokens("GeO2", cfg));
  for (int id : encode_tokens("Glass compositions (mol%)", cfg)) {
    EXPECT_GE(id, 0);
    EXPECT_LT(id, cfg.buckets);
  }
  // "^SiO2$" has 5 bigrams and 4 trigrams.
  EXPECT_EQ(encode_tokens("SiO2", cfg).size(), 9u);
}

TEST(Encoder, EmbeddingsOfDifferentTextsDiffer) {
  Rng rng(3);
  CellEncoderConfig cfg;
  Param table("tok", random_matrix(cfg.buckets + 1, 8, rng), kEncoder);
  Tape t;
  Var v = embedding_bag_mean(t, table, {encode_tokens("SiO2", cfg), encode_tokens("GeO2", cfg), encode_tokens("SiO2", cfg)});
  bool differ = false;
  for (int j = 0; j < 8; ++j) {
    differ = differ || v.value()(0, j) != v.value()(1, j);
    EXPECT_EQ(v.value()(0, j), v.value()(2, j));
  }
  EXPECT_TRUE(differ);
}

namespace {

EdgeList small_graph() {
  // 5 nodes, a few directed edges plus self-loops.
  EdgeList e;
  e.num_nodes = 5;
  const std::vector<std::pair<int, int>> pairs = {{0, 1}, {1, 0}, {2, 1}, {3, 1}, {4, 2}, {0, 3}, {2, 4}};
  for (auto [s, d] : pairs) {
    e.src.push_back(s);
    e.dst.push_back(d);
  }
  for (int n = 0; n < 5; ++n) {
    e.src.push_back(n);
    e.dst.push_back(n);
  }
  return e;
}

}  // namespace

TEST(Gat, AttentionIsADistributionPerNode) {
  Rng rng(4);
  ParamStore store;
  GatConfig cfg{{8, 6}, {2, 2}, 0.2, true};
  Gat gat(store, "gat", 5, cfg, rng);
  const auto edges = small_graph();
  Tape t;
  Var x = t.constant(random_matrix(5, 5, rng));
  {
    const Matrix& a = gat.attention(t, x, edges, 0).value();
    std::vector<std::vector<double>> sums(5, std::vector<double>(2, 0.0));
    for (std::size_t k = 0; k < edges.src.size(); ++k)
      for (int h = 0; h < 2; ++h) {
        EXPECT_GE(a(static_cast<int>(k), h), 0.0);
        sums[edges.dst[k]][h] += a(static_cast<int>(k), h);
      }
    for (auto& s : sums)
      for (double v : s) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(Gat, SingleNodeAttendsOnlyToItself) {
  Rng rng(4);
  ParamStore store;
  Gat gat(store, "gat", 3, GatConfig{{4}, {2}, 0.2, true}, rng);
  EdgeList e;
  e.num_nodes = 1;
  e.src = {0};
  e.dst = {0};
  Tape t;
  Var x = t.constant(random_matrix(1, 3, rng));
  const Matrix& a = gat.attention(t, x, e, 0).value();
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(a(0, 1), 1.0);
  EXPECT_EQ(gat.forward(t, x, e).cols(), 4);
}

TEST(Gat, GradientCheck) {
  Rng rng(21);
  ParamStore store;
  Gat gat(store, "gat", 4, GatConfig{{6, 4}, {2, 2}, 0.2, true}, rng);
  // Non-zero biases so the check sees every term.
  for (Param* p : store.all())
    for (auto& v : p->value.data) v += rng.uniform(-0.3, 0.3);
  Param x("x", random_matrix(5, 4, rng), kHead);
  const Matrix w = random_matrix(5, 4, rng);
  const auto edges = small_graph();
  std::vector<Param*> params = store.all();
  params.push_back(&x);
  const auto r = grad_check(params, [&](Tape& t) {
    return sum(mul(gat.forward(t, t.param(x), edges), t.constant(w)));
  });
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Gat, PermutingEquivalentNodesPermutesOutputs) {
  Rng rng(8);
  ParamStore store;
  Gat gat(store, "gat", 3, GatConfig{{6, 4}, {2, 2}, 0.2, true}, rng);
  // Star: nodes 1 and 2 both feed node 0. Swapping them must swap their outputs.
  EdgeList e;
  e.num_nodes = 3;
  e.src = {1, 2, 0, 1, 2};
  e.dst = {0, 0, 0, 1, 2};
  Matrix x = random_matrix(3, 3, rng);
  Matrix xs = x;
  for (int j = 0; j < 3; ++j) std::swap(xs(1, j), xs(2, j));
  Tape t;
  const Matrix h = gat.forward(t, t.constant(x), e).value();
  const Matrix hs = gat.forward(t, t.constant(xs), e).value();
  for (int j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(h(0, j), hs(0, j));
    EXPECT_DOUBLE_EQ(h(1, j), hs(2, j));
    EXPECT_DOUBLE_EQ(h(2, j), hs(1, j));
  }
}

TEST(Mlp, ZeroWeightsGiveZeroLogits) {
  Rng rng(2);
  ParamStore store;
  Mlp mlp(store, "mlp", 4, 8, 2, 0.2, rng);
  for (Param* p : store.all())
    if (p->name.find("bn_var") == std::string::npos && p->name.find("bn_gamma") == std::string::npos)
      std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  Tape t;
  const Matrix out = mlp.forward(t, t.constant(random_matrix(3, 4, rng)), false, nullptr).value();
  for (double v : out.data) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(nn::sigmoid(0.0), 0.5);
}

TEST(Mlp, InferenceIsDeterministic) {
  Rng rng(2);
  ParamStore store;
  Mlp mlp(store, "mlp", 4, 8, 3, 0.2, rng);
  const Matrix x = random_matrix(5, 4, rng);
  Tape t;
  const Matrix a = mlp.forward(t, t.constant(x), false, nullptr).value();
  const Matrix b = mlp.forward(t, t.constant(x), false, nullptr).value();
  EXPECT_EQ(a, b);
}

TEST(Mlp, TrainingForwardDeterministicPerDropoutSeed) {
  Rng rng(2);
  ParamStore store;
  Mlp mlp(store, "mlp", 4, 8, 3, 0.2, rng);
  const Matrix x = random_matrix(5, 4, rng);
  Tape t;
  Rng d1(9), d2(9);
  const Matrix a = mlp.forward(t, t.constant(x), true, &d1).value();
  const Matrix b = mlp.forward(t, t.constant(x), true, &d2).value();
  EXPECT_EQ(a, b);
}

TEST(Mlp, SingleRowBatchStillWorks) {
  Rng rng(2);
  ParamStore store;
  Mlp mlp(store, "mlp", 4, 8, 1, 0.0, rng);
  Tape t;
  Rng d(1);
  const Matrix out = mlp.forward(t, t.constant(random_matrix(1, 4, rng)), true, &d).value();
  EXPECT_TRUE(std::isfinite(out(0, 0)));
}

TEST(Mlp, GradientCheckTrainingMode) {
  Rng rng(31);
  ParamStore store;
  Mlp mlp(store, "mlp", 5, 7, 3, 0.2, rng);
  Param x("x", random_matrix(6, 5, rng), kHead);
  const Matrix w = random_matrix(6, 3, rng);
  std::vector<Param*> params;
  for (Param* p : store.all())
    if (p->group != kBuffer) params.push_back(p);
  params.push_back(&x);
  const auto r = grad_check(params, [&](Tape& t) {
    Rng dropout(77);  // same mask on every evaluation
    return sum(mul(mlp.forward(t, t.param(x), true, &dropout), t.constant(w)));
  }, 1e-6, 1e-5);  // units dropped by the mask have exactly zero gradient
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(5);
  ParamStore store;
  store.add("a", random_matrix(3, 4, rng));
  store.add("b", Matrix::from_rows({{1e-310, -0.0, 1.0 / 3.0}}), kEncoder);
  Checkpoint ck;
  ck.meta["preset"] = "desk";
  ck.add_store("m.", store);
  std::stringstream ss;
  ck.write(ss);
  const Checkpoint back = Checkpoint::read(ss);
  EXPECT_EQ(back.meta, ck.meta);
  ParamStore other;
  other.add("a", Matrix(3, 4));
  other.add("b", Matrix(1, 3), kEncoder);
  back.restore_store("m.", other);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(other.get("a").value.data[k], store.get("a").value.data[k]);
  EXPECT_TRUE(std::signbit(other.get("b").value(0, 1)));
  EXPECT_EQ(other.get("b").value(0, 0), 1e-310);
  std::stringstream again;
  back.write(again);
  std::stringstream first;
  ck.write(first);
  EXPECT_EQ(again.str(), first.str());
}

TEST(Checkpoint, ShapeMismatchAndMissingTensorThrow) {
  ParamStore store;
  store.add("a", Matrix(2, 2, 1.0));
  Checkpoint ck;
  ck.add_store("", store);
  ParamStore wrong;
  wrong.add("a", Matrix(2, 3));
  EXPECT_THROW(ck.restore_store("", wrong), std::runtime_error);
  ParamStore missing;
  missing.add("zzz", Matrix(2, 2));
  EXPECT_THROW(ck.restore_store("", missing), std::runtime_error);
  std::stringstream junk("not a checkpoint\n");
  EXPECT_THROW(Checkpoint::read(junk), std::runtime_error);
}
