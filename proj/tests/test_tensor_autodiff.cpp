#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "alignve/gradcheck.hpp"
#include "alignve/init.hpp"
#include "alignve/ops.hpp"
#include "alignve/rng.hpp"
#include "oracles.hpp"

using namespace alignve;
using TD = Tensor<double>;

namespace {

TD random_tensor(std::mt19937_64& gen, Shape shape) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  TD t(std::move(shape));
  for (auto& v : t.data()) v = dist(gen);
  return t;
}

// sum(op(x) * w) for a fixed random weighting w, so every output entry
// contributes a distinct amount to the gradient.
double check_unary(const std::function<TD(const TD&)>& op, TD x, std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  const TD probe = op(x);
  const TD w = random_tensor(gen, probe.shape());
  ParamStore<double> store;
  store.add("x", std::move(x));
  return finite_difference_check([&](const ParamSet<double>& p) { return sum(mul(op(p.get("x")), w)); }, store);
}

}  // namespace

TEST(Matmul, IdentityAndSmallProduct) {
  const auto a = TD::matrix({{1, 2}, {3, 4}});
  const auto eye = TD::matrix({{1, 0}, {0, 1}});
  EXPECT_EQ(matmul(a, eye).values(), a.values());
  const auto r = matmul(a, TD::matrix({{5}, {6}}));
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_EQ(r.values(), (std::vector<double>{17, 39}));
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(TD({2, 3}), TD({2, 3})), ShapeError);
}

TEST(Matmul, MatchesTripleLoopExactlyIn64Bit) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_mat(gen, 8, 8), b = oracle::random_mat(gen, 8, 8);
    const auto got = matmul(oracle::to_tensor<double>(a), oracle::to_tensor<double>(b));
    EXPECT_EQ(oracle::max_abs_diff(got, oracle::matmul(a, b)), 0.0);
  }
}

TEST(Matmul, Float32WithinRelativeTolerance) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_mat(gen, 8, 8), b = oracle::random_mat(gen, 8, 8);
    const auto got = matmul(oracle::to_tensor<float>(a), oracle::to_tensor<float>(b));
    const auto want = oracle::matmul(oracle::from(oracle::to_tensor<float>(a)), oracle::from(oracle::to_tensor<float>(b)));
    for (std::size_t i = 0; i < want.v.size(); ++i) {
      EXPECT_LE(std::abs(got[i] - want.v[i]), 1e-5 * std::max(1.0, std::abs(want.v[i])));
    }
  }
}

TEST(Softmax, ExamplesFromHand) {
  auto s = softmax_rows(TD::matrix({{0, 0, 0}}));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  s = softmax_rows(TD::matrix({{1000, 1000}}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  s = softmax_rows(TD::matrix({{std::log(2.0), 0}}));
  EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOneAndIgnoreRowShift) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    TD x = random_tensor(gen, {4, 6});
    TD shifted = x;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 6; ++j) shifted(i, j) += 10.0 * static_cast<double>(i) - 7.0;
    const auto a = softmax_rows(x), b = softmax_rows(shifted);
    for (std::size_t i = 0; i < 4; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < 6; ++j) {
        total += a(i, j);
        EXPECT_NEAR(a(i, j), b(i, j), 1e-6);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(LayerNorm, ConstantRowAndZeroGamma) {
  const auto ones = TD::vector({1, 1, 1}), zeros = TD::vector({0, 0, 0});
  const auto flat = layer_norm(TD::matrix({{5, 5, 5}}), ones, zeros, 1e-5);
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
  const auto out = layer_norm(TD::matrix({{1, 4}, {-2, 9}}), TD::vector({0, 0}), TD::vector({7, 7}), 1e-5);
  for (double v : out.values()) EXPECT_EQ(v, 7.0);
}

TEST(LayerNorm, TwoElementRow) {
  // mean 2, biased variance 1: (x - 2) / sqrt(1 + 1e-5)
  const auto out = layer_norm(TD::matrix({{1, 3}}), TD::vector({1, 1}), TD::vector({0, 0}), 1e-5);
  EXPECT_NEAR(out[0], -0.999995000037, 1e-9);
  EXPECT_NEAR(out[1], 0.999995000037, 1e-9);
}

TEST(LayerNorm, NormalisedRowStatistics) {
  std::mt19937_64 gen(11);
  const TD x = random_tensor(gen, {5, 16});
  const auto out = layer_norm(x, TD({16}, 1.0), TD({16}, 0.0), 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < 16; ++j) mean += out(i, j);
    mean /= 16;
    for (std::size_t j = 0; j < 16; ++j) var += (out(i, j) - mean) * (out(i, j) - mean);
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(var / 16, 1.0, 1e-4);
  }
}

TEST(LayerNorm, RejectsNonPositiveEps) {
  EXPECT_THROW(layer_norm(TD::matrix({{1, 2}}), TD::vector({1, 1}), TD::vector({0, 0}), 0.0), ConfigError);
}

TEST(Relu, ForwardAndSubgradientAtZero) {
  EXPECT_EQ(relu(TD::vector({-1, 0, 2})).values(), (std::vector<double>{0, 0, 2}));
  const auto negative = relu(TD::vector({-3, -0.5, -1e-9}));
  for (double v : negative.values()) EXPECT_EQ(v, 0.0);

  Tape<double> tape;
  const auto x = tape.variable(TD::vector({-1, 2}));
  const auto g = tape.backward(sum(relu(x))).of(x);
  EXPECT_EQ(g.values(), (std::vector<double>{0, 1}));

  Tape<double> tape0;
  const auto z = tape0.variable(TD::vector({0}));
  EXPECT_EQ(tape0.backward(sum(relu(z))).of(z)[0], 0.0);
}

TEST(Backward, SumAndSquare) {
  Tape<double> tape;
  const auto x = tape.variable(TD::vector({0.5, -2, 3}));
  EXPECT_EQ(tape.backward(sum(x)).of(x).values(), (std::vector<double>{1, 1, 1}));

  Tape<double> tape2;
  const auto y = tape2.variable(TD::vector({0.5, -2, 3}));
  EXPECT_EQ(tape2.backward(sum(mul(y, y))).of(y).values(), (std::vector<double>{1, -4, 6}));
}

TEST(Backward, UnreachedLeafIsZeroAndInteriorNodesAreRejected) {
  Tape<double> tape;
  const auto x = tape.variable(TD::vector({1, 2}));
  const auto unused = tape.variable(TD::vector({3, 4}));
  const auto y = scale(x, 2.0);
  const auto grads = tape.backward(sum(y));
  EXPECT_EQ(grads.of(unused).values(), (std::vector<double>{0, 0}));
  EXPECT_THROW(grads.of(y), Error);
}

TEST(Backward, MixingTapesThrows) {
  Tape<double> a, b;
  const auto x = a.variable(TD::vector({1}));
  const auto y = b.variable(TD::vector({2}));
  EXPECT_THROW(add(x, y), Error);
}

TEST(Backward, RandomChainMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  ParamStore<double> store;
  store.add("a", random_tensor(gen, {3, 4}));
  store.add("b", random_tensor(gen, {4, 2}));
  store.add("c", random_tensor(gen, {2}));
  const TD w = random_tensor(gen, {3, 2});
  const double err = finite_difference_check(
      [&](const ParamSet<double>& p) {
        return sum(mul(softmax_rows(add_row_bias(matmul(p.get("a"), p.get("b")), p.get("c"))), w));
      },
      store);
  EXPECT_LT(err, 1e-4);
}

TEST(Backward, EveryPrimitiveMatchesFiniteDifferences) {
  std::mt19937_64 gen(9);
  const TD m = random_tensor(gen, {3, 4});
  const TD other = random_tensor(gen, {3, 4});
  const TD right = random_tensor(gen, {4, 2});
  const TD bias = random_tensor(gen, {4});
  const TD gamma = random_tensor(gen, {4}), beta = random_tensor(gen, {4});

  EXPECT_LT(check_unary([&](const TD& x) { return matmul(x, right); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return matmul(transpose(right), transpose(x)); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return add(x, other); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return mul(x, x); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return add_row_bias(other, x); }, bias), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return scale(x, -1.7); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return relu(x); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return softmax_rows(x); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return layer_norm(x, gamma, beta, 1e-5); }, m), 1e-4);
  EXPECT_LT(check_unary([&](const TD& g) { return layer_norm(m, g, beta, 1e-5); }, gamma), 1e-4);
  EXPECT_LT(check_unary([&](const TD& b) { return layer_norm(m, gamma, b, 1e-5); }, beta), 1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return reshape(x, {2, 6}); }, m), 1e-4);
  EXPECT_LT(check_unary(
                [&](const TD& x) {
                  const std::vector<TD> parts{x, other};
                  return concat_cols<double>(parts);
                },
                m),
            1e-4);
  EXPECT_LT(check_unary(
                [&](const TD& x) {
                  const std::vector<TD> parts{other, x};
                  return concat_flat<double>(parts);
                },
                m),
            1e-4);
  EXPECT_LT(check_unary([&](const TD& x) { return cross_entropy(reshape(x, {12}), 5); }, m), 1e-4);
}

TEST(Backward, ReusedTensorAccumulates) {
  Tape<double> tape;
  const auto x = tape.variable(TD::vector({3}));
  const auto y = add(mul(x, x), scale(x, 4.0));  // d/dx = 2x + 4
  EXPECT_EQ(tape.backward(sum(y)).of(x)[0], 10.0);
}

TEST(FiniteDifference, DetectsScaledGradient) {
  // y = 2x with a backward that reports 2.2: relative error 0.2 / 2.2.
  const auto doubled_wrong = [](const TD& x) {
    TD out = scale(x.detach(), 2.0);
    if (!x.tape()) return out;
    return x.tape()->record(std::move(out), {&x}, [](std::span<const double> g, auto in) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += 2.2 * g[i];
    });
  };
  ParamStore<double> store;
  store.add("x", TD::vector({0.3, -1.2, 2.0}));
  const auto report =
      finite_difference_report([&](const ParamSet<double>& p) { return sum(doubled_wrong(p.get("x"))); }, store);
  EXPECT_NEAR(report.max_relative_error, 0.2 / 2.2, 1e-6);
  EXPECT_GT(report.max_relative_error, 1e-2);
  EXPECT_EQ(report.worst_parameter, "x");
}

TEST(FiniteDifference, EmptyStoreIsZero) {
  ParamStore<double> store;
  EXPECT_EQ(finite_difference_check([](const ParamSet<double>&) { return TD::scalar(1.0); }, store), 0.0);
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(TD::vector({0.4, 0.4, 0.4}), 1).item(), std::log(3.0), 1e-12);
  EXPECT_NEAR(cross_entropy(TD::vector({30, -30, -30}), 0).item(), 0.0, 1e-12);
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  EXPECT_NEAR(cross_entropy(TD::vector({1, 2, 3}), 1).item(), -std::log(e2 / (e1 + e2 + e3)), 1e-12);
  EXPECT_THROW(cross_entropy(TD::vector({1, 2, 3}), 3), DataError);
}

TEST(TensorShape, ZeroDimensionRejected) {
  EXPECT_THROW(TD({3, 0}), ShapeError);
  EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(reshape(TD({2, 3}), {4}), ShapeError);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(RngTest, BoundedDrawsAndShuffle) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(rng.below(7), 7u);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  std::vector<int> items(50);
  std::iota(items.begin(), items.end(), 0);
  rng.shuffle(std::span<int>(items));
  EXPECT_EQ(std::set<int>(items.begin(), items.end()).size(), 50u);
}

TEST(Params, StoreRejectsDuplicatesAndUnknownNames) {
  ParamStore<float> store;
  store.add("w", Tensor<float>({2}));
  EXPECT_THROW(store.add("w", Tensor<float>({2})), ConfigError);
  EXPECT_THROW(store.get("missing"), ShapeError);
  EXPECT_EQ(store.total_elements(), 2u);
}

TEST(Params, GlorotInitialisationWithinLimit) {
  Rng rng(12345);
  const std::vector<ParamSpec> specs{
      {"w", {30, 20}, Init::glorot_uniform}, {"b", {20}, Init::zeros}, {"g", {20}, Init::ones}};
  const auto store = initialize_params(specs, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (float v : store.get("w").data()) EXPECT_LE(std::abs(v), limit);
  for (float v : store.get("b").data()) EXPECT_EQ(v, 0.0f);
  for (float v : store.get("g").data()) EXPECT_EQ(v, 1.0f);
  EXPECT_NO_THROW(validate_params(store, specs));

  Rng again(12345);
  EXPECT_EQ(initialize_params(specs, again).get("w").values(), store.get("w").values());

  auto wrong = specs;
  wrong[0].shape = {30, 21};
  EXPECT_THROW(validate_params(store, wrong), ShapeError);
}
