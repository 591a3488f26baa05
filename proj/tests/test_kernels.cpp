#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "ppn/adam.hpp"
#include "ppn/grad_check.hpp"
#include "ppn/kernels.hpp"

using namespace ppn;
using T = Tensor<double>;

namespace {

T random_tensor(const Shape& shape, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  T t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

T from_list(const Shape& shape, std::initializer_list<double> v) {
  T t(shape);
  Index i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

double dot(const T& a, const T& b) { return (a.values() * b.values()).sum(); }

}  // namespace

TEST_CASE("ConvSpec output sizes") {
  const ConvSpec s{1, 1, 3, 3, 2, 1};
  CHECK(s.conv_output(8, 3) == 4);
  CHECK(s.conv_output(7, 3) == 4);
  CHECK(s.transposed_output(4, 3) == 7);
  CHECK_THROWS_AS((ConvSpec{1, 1, 5, 5, 1, 0}.conv_output(3, 5)), ShapeError);
}

TEST_CASE("conv2d small cases") {
  const T x = from_list({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const T id = conv2d(x, ConvSpec{1, 1, 1, 1, 1, 0}, from_list({1, 1, 1, 1}, {1}), T({1}));
  CHECK((id.values() == x.values()).all());

  const T y = conv2d(from_list({1, 2, 2}, {1, 2, 3, 4}), ConvSpec{1, 1, 2, 2, 1, 0}, T({1, 1, 2, 2}, 1.0), T({1}));
  CHECK(y.shape() == Shape{1, 1, 1});
  CHECK(y[0] == 10.0);
}

TEST_CASE("conv2d matches the loop oracle") {
  std::mt19937 rng(1);
  for (const auto& [stride, pad] : {std::pair<Index, Index>{1, 1}, {1, 0}, {2, 1}, {2, 0}}) {
    const ConvSpec spec{2, 4, 3, 3, stride, pad};
    const T x = random_tensor({2, 8, 8}, rng);
    const T w = random_tensor({4, 2, 3, 3}, rng);
    const T b = random_tensor({4}, rng);
    const T got = conv2d(x, spec, w, b);
    const T want = oracle::conv2d(x, w, b, stride, pad);
    REQUIRE(got.shape() == want.shape());
    CHECK((got.values() - want.values()).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conv2d rejects mismatched inputs") {
  CHECK_THROWS_AS(conv2d(T({3, 4, 4}), ConvSpec{2, 1, 3, 3, 1, 1}, T({1, 2, 3, 3}), T({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(T({2, 4, 4}), ConvSpec{2, 1, 3, 3, 1, 1}, T({1, 2, 2, 2}), T({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(T({2, 2, 2}), ConvSpec{2, 1, 3, 3, 1, 0}, T({1, 2, 3, 3}), T({1})), ShapeError);
}

TEST_CASE("conv_transpose2d small cases") {
  const T y = conv_transpose2d(from_list({1, 1, 1}, {5}), ConvSpec{1, 1, 2, 2, 2, 0},
                               from_list({1, 1, 2, 2}, {1, 0, 0, 1}), T({1}));
  CHECK(y.shape() == Shape{1, 2, 2});
  CHECK(y(0, 0, 0) == 5.0);
  CHECK(y(0, 0, 1) == 0.0);
  CHECK(y(0, 1, 0) == 0.0);
  CHECK(y(0, 1, 1) == 5.0);

  std::mt19937 rng(2);
  const T x = random_tensor({1, 3, 3}, rng);
  const T id = conv_transpose2d(x, ConvSpec{1, 1, 1, 1, 1, 0}, from_list({1, 1, 1, 1}, {1}), T({1}));
  CHECK((id.values() == x.values()).all());
}

TEST_CASE("conv_transpose2d matches the scatter oracle and is the adjoint of conv2d") {
  std::mt19937 rng(3);
  // Sizes chosen so the forward conv drops no remainder and the shapes match.
  for (const auto& [k, stride, pad, h, w] : {std::tuple<Index, Index, Index, Index, Index>{2, 2, 0, 8, 6},
                                             {3, 2, 1, 9, 7}, {3, 1, 1, 6, 5}, {4, 2, 1, 8, 10}}) {
    const ConvSpec spec{3, 2, k, k, stride, pad};
    const T x = random_tensor({3, h, w}, rng);
    const T wt = random_tensor({2, 3, k, k}, rng);
    const T y_fwd = conv2d(x, spec, wt, T({2}));
    const T y = random_tensor(y_fwd.shape(), rng);

    // The same weight buffer read as [in=2, out=3, k, k] gives the adjoint.
    const ConvSpec tspec{2, 3, k, k, stride, pad};
    const T back = conv_transpose2d(y, tspec, wt, T({3}));
    REQUIRE(back.shape() == x.shape());
    CHECK(std::abs(dot(y_fwd, y) - dot(x, back)) <= 1e-10);

    const T b = random_tensor({3}, rng);
    const T got = conv_transpose2d(y, tspec, wt, b);
    const T want = oracle::conv_transpose2d(y, wt, b, stride, pad);
    REQUIRE(got.shape() == want.shape());
    CHECK((got.values() - want.values()).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conv backward passes are adjoints of their forwards") {
  std::mt19937 rng(4);
  const ConvSpec spec{2, 3, 3, 3, 2, 1};
  const T x = random_tensor({2, 7, 6}, rng);
  const T w = random_tensor({3, 2, 3, 3}, rng);
  const T dx = random_tensor(x.shape(), rng);
  const T g = random_tensor(conv2d(x, spec, w, T({3})).shape(), rng);
  const ConvGrads<double> grads = conv2d_backward(x, spec, w, g);
  CHECK(std::abs(dot(conv2d(dx, spec, w, T({3})), g) - dot(dx, grads.input)) <= 1e-10);
  CHECK(grads.bias[0] == doctest::Approx(g.plane(0).sum()).epsilon(1e-12));
}

TEST_CASE("batchnorm2d") {
  SUBCASE("constant channels normalize to zero") {
    BatchNormState<double> s(2);
    T x({2, 3, 3});
    x.plane(0).setConstant(4.0);
    x.plane(1).setConstant(-2.0);
    CHECK(batchnorm2d(x, s).values().abs().maxCoeff() == 0.0);
  }
  SUBCASE("training mode yields zero mean and unit variance") {
    std::mt19937 rng(6);
    BatchNormState<double> s(3);
    T x = random_tensor({3, 8, 8}, rng);
    x.values() = x.values() * 50.0 + 2.0;
    const T y = batchnorm2d(x, s);
    for (Index c = 0; c < 3; ++c) {
      const auto p = y.plane(c).array();
      const double mean = p.mean();
      CHECK(std::abs(mean) <= 1e-6);
      CHECK(std::abs((p - mean).square().mean() - 1.0) <= 1e-6);
    }
    // Running stats move one momentum step toward the batch stats.
    CHECK(s.running_mean[0] == doctest::Approx(0.1 * x.plane(0).mean()));
  }
  SUBCASE("inference mode is the closed-form affine map") {
    BatchNormState<double> s(1);
    s.mode = NormMode::kInference;
    s.gamma[0] = 2.0;
    s.beta_shift[0] = 1.0;
    const T x = from_list({1, 1, 3}, {-1.0, 0.0, 3.0});
    const T y = batchnorm2d(x, s);
    const double k = 1.0 / std::sqrt(1.0 + 1e-5);
    for (Index i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(2 * k * x[i] + 1).epsilon(1e-14));
    CHECK(s.running_mean[0] == 0.0);
    const T z = batchnorm2d_inference(x, s);
    CHECK((z.values() == y.values()).all());
  }
  SUBCASE("rank 4 pools statistics over the batch") {
    std::mt19937 rng(7);
    BatchNormState<double> s(2);
    const T x = random_tensor({3, 2, 4, 4}, rng);
    const T y = batchnorm2d(x, s);
    CHECK(y.shape() == x.shape());
    double sum = 0;
    for (Index n = 0; n < 3; ++n) {
      for (Index i = 0; i < 16; ++i) sum += y[(n * 2 + 1) * 16 + i];
    }
    CHECK(std::abs(sum) <= 1e-9);
  }
  SUBCASE("channel mismatch") {
    BatchNormState<double> s(2);
    CHECK_THROWS_AS(batchnorm2d(T({3, 2, 2}), s), ShapeError);
  }
}

TEST_CASE("leaky_relu") {
  const T y = leaky_relu(from_list({3}, {-1, 0, 2}), 0.1);
  CHECK(y[0] == doctest::Approx(-0.1));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
  const T pos = from_list({3}, {0.5, 1, 7});
  CHECK((leaky_relu(pos, 0.1).values() == pos.values()).all());
  const T g = leaky_relu_backward(from_list({1}, {-3.0}), from_list({1}, {1.0}), 0.1);
  CHECK(g[0] == doctest::Approx(0.1));
}

TEST_CASE("maxpool2d") {
  const PoolResult<double> r = maxpool2d(from_list({1, 2, 2}, {1, 2, 3, 4}));
  CHECK(r.output.shape() == Shape{1, 1, 1});
  CHECK(r.output[0] == 4.0);
  CHECK(r.argmax[0] == 3);

  const PoolResult<double> flat = maxpool2d(T({1, 4, 4}, 2.5));
  CHECK((flat.output.values() == 2.5).all());
  const std::vector<Index> corners{0, 2, 8, 10};
  CHECK(flat.argmax == corners);

  std::mt19937 rng(8);
  const T x = random_tensor({2, 8, 8}, rng);
  const PoolResult<double> p = maxpool2d(x);
  CHECK((p.output.values() == oracle::maxpool2d(x).values()).all());

  const T g = maxpool2d_backward(p, T(p.output.shape(), 1.0));
  CHECK(g.values().sum() == doctest::Approx(32.0));
  CHECK_THROWS_AS(maxpool2d(T({1, 3, 4})), ShapeError);
}

TEST_CASE("concat_channels") {
  const T a = from_list({1, 2, 2}, {1, 2, 3, 4});
  const T b = from_list({1, 2, 2}, {5, 6, 7, 8});
  const T ab = concat_channels(a, b);
  CHECK(ab.shape() == Shape{2, 2, 2});
  for (Index i = 0; i < 8; ++i) CHECK(ab[i] == static_cast<double>(i + 1));

  const auto [ga, gb] = split_channels(concat_channels(a, T({3, 2, 2})), 1);
  CHECK((ga.values() == a.values()).all());
  CHECK(gb.shape() == Shape{3, 2, 2});

  const auto [ones_a, ones_b] = split_channels(T(ab.shape(), 1.0), 1);
  CHECK((ones_a.values() == 1.0).all());
  CHECK(ones_a.shape() == a.shape());
  CHECK_THROWS_AS(concat_channels(a, T({1, 2, 3})), ShapeError);
}

TEST_CASE("activations") {
  const T zero({1}, 0.0);
  const T s = activation_map(zero, Activation::kSigmoid);
  CHECK(s[0] == 0.5);
  CHECK(activation_map(zero, Activation::kTanh)[0] == 0.0);
  CHECK(activation_backward(s, T({1}, 1.0), Activation::kSigmoid)[0] == 0.25);
  CHECK(activation_backward(T({1}, 0.0), T({1}, 1.0), Activation::kTanh)[0] == 1.0);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    T p({3}, 1.5);
    p.zero_grad();
    AdamState<double> st;
    std::vector<T*> ps{&p};
    adam_step<double>(ps, st);
    CHECK((p.values() == 1.5).all());
    CHECK(st.step_count == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    T p = from_list({3}, {0.0, 1.0, -2.0});
    p.grad() << 0.3, -2.0, 1e-3;
    AdamState<double> st;
    st.lr = 1e-2;
    std::vector<T*> ps{&p};
    adam_step<double>(ps, st);
    CHECK(p[0] == doctest::Approx(-1e-2).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1.0 + 1e-2).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(-2.0 - 1e-2).epsilon(1e-4));
  }
  SUBCASE("two steps match a scalar reference") {
    T p({1}, 0.7);
    AdamState<double> st;
    st.lr = 0.05;
    std::vector<T*> ps{&p};
    double ref = 0.7, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
      const double g = 2 * ref - 0.3;
      p.grad()[0] = g;
      adam_step<double>(ps, st);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mhat = m / (1 - std::pow(0.9, t));
      const double vhat = v / (1 - std::pow(0.999, t));
      ref -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
      CHECK(std::abs(p[0] - ref) <= 1e-12);
    }
  }
}

TEST_CASE("grad_check on a quadratic") {
  std::mt19937 rng(9);
  const T x = random_tensor({4, 5}, rng);
  const Objective<double> f = [](const T& p, T* g) {
    if (g) {
      *g = p;
      g->values() *= 2.0;
    }
    return p.values().square().sum();
  };
  CHECK(grad_check<double>(f, x, 1e-5) <= 1e-7);

  const Objective<double> wrong = [](const T& p, T* g) {
    if (g) *g = p;
    return p.values().square().sum();
  };
  CHECK(grad_check<double>(wrong, x, 1e-5) > 0.1);
}
