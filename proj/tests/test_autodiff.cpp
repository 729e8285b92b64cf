#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "autodiff.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace loga;

namespace {

Tensor<double> randt(std::vector<long> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// weighted-sum head so every output element contributes to the scalar root
NodePtr<double> weighted_head(const NodePtr<double>& out, const Tensor<double>& w) {
  return reduce_sum(mul(flatten(out), constant(w)));
}

}  // namespace

TEST_CASE("backward: sum of leaf gives ones") {
  auto a = param(Tensor<double>({4}, {1, 2, 3, 4}));
  backward(reduce_sum(a));
  REQUIRE(a->has_grad);
  for (long i = 0; i < 4; ++i) CHECK(a->grad[i] == doctest::Approx(1.0));
}

TEST_CASE("backward: dot(a,a) gives 2a") {
  auto a = param(Tensor<double>({3}, {1.5, -2.0, 0.5}));
  backward(reduce_sum(mul(a, a)));
  for (long i = 0; i < 3; ++i) CHECK(a->grad[i] == doctest::Approx(2 * a->value[i]));
}

TEST_CASE("backward: non-scalar root is a contract error") {
  auto a = param(Tensor<double>({3}, {1, 2, 3}));
  auto out = add(a, a);
  try {
    backward(out);
    FAIL("expected contract error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::contract);
  }
}

TEST_CASE("backward: repeated calls accumulate") {
  auto a = param(Tensor<double>({2}, {3, 4}));
  auto root = reduce_sum(mul(a, a));
  backward(root);
  backward(root);
  for (long i = 0; i < 2; ++i) CHECK(a->grad[i] == doctest::Approx(4 * a->value[i]));
  zero_grad(a);
  backward(root);
  for (long i = 0; i < 2; ++i) CHECK(a->grad[i] == doctest::Approx(2 * a->value[i]));
}

TEST_CASE("backward: grad shape equals value shape for every node") {
  Rng rng(3);
  auto a = param(randt({3, 2}, rng));
  auto b = param(randt({2, 4}, rng));
  auto prod = matmul(a, b);
  auto act = relu(prod);
  auto root = reduce_sum(act);
  backward(root);
  for (const NodePtr<double>& n : {a, b, prod, act, root}) {
    REQUIRE(n->has_grad);
    CHECK(n->grad.same_shape(n->value));
  }
}

TEST_CASE("backward: relu subgradient at 0 is 0") {
  auto a = param(Tensor<double>({3}, {-1.0, 0.0, 2.0}));
  backward(reduce_sum(relu(a)));
  CHECK(a->grad[0] == 0.0);
  CHECK(a->grad[1] == 0.0);
  CHECK(a->grad[2] == 1.0);
}

TEST_CASE("gradients match finite differences for every op") {
  Rng rng(1234);

  SUBCASE("add/sub/mul/scale/add_scalar") {
    auto a = param(randt({5}, rng));
    auto b = param(randt({5}, rng));
    Tensor<double> w = randt({5}, rng);
    double err = oracles::fd_gradcheck({a, b}, [&] {
      return weighted_head(mul(sub(add(a, b), scale(b, 0.3)), add_scalar(a, 0.7)), w);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("matmul") {
    auto a = param(randt({3, 4}, rng));
    auto b = param(randt({4, 2}, rng));
    Tensor<double> w = randt({6}, rng);
    double err = oracles::fd_gradcheck({a, b}, [&] { return weighted_head(matmul(a, b), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("conv1d") {
    auto x = param(randt({3, 12}, rng));
    auto k = param(randt({2, 3, 4}, rng));
    Tensor<double> w = randt({2 * 3}, rng);
    double err =
        oracles::fd_gradcheck({x, k}, [&] { return weighted_head(conv1d(x, k, 4), w); });
    CHECK(err < 1e-6);
    Tensor<double> w2 = randt({2 * 9}, rng);
    err = oracles::fd_gradcheck({x, k}, [&] { return weighted_head(conv1d(x, k, 1), w2); });
    CHECK(err < 1e-6);
  }

  SUBCASE("conv2d") {
    auto x = param(randt({2, 6, 5}, rng));
    auto k = param(randt({3, 2, 3, 3}, rng));
    Tensor<double> w = randt({3 * 2 * 2}, rng);
    double err =
        oracles::fd_gradcheck({x, k}, [&] { return weighted_head(conv2d(x, k, 2), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("relu away from kink") {
    auto a = param(Tensor<double>({4}, {-1.2, 0.8, 2.0, -0.4}));
    Tensor<double> w = randt({4}, rng);
    double err = oracles::fd_gradcheck({a}, [&] { return weighted_head(relu(a), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("softmax") {
    auto a = param(randt({7}, rng, -2, 2));
    Tensor<double> w = randt({7}, rng);
    double err = oracles::fd_gradcheck({a}, [&] { return weighted_head(softmax_vec(a), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("log/exp") {
    auto a = param(randt({5}, rng, 0.5, 2.0));
    Tensor<double> w = randt({5}, rng);
    double err =
        oracles::fd_gradcheck({a}, [&] { return weighted_head(log_el(exp_el(log_el(a))), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("mean_axis both axes") {
    auto a = param(randt({4, 6}, rng));
    Tensor<double> w0 = randt({6}, rng);
    Tensor<double> w1 = randt({4}, rng);
    CHECK(oracles::fd_gradcheck({a}, [&] { return weighted_head(mean_axis(a, 0), w0); }) < 1e-6);
    CHECK(oracles::fd_gradcheck({a}, [&] { return weighted_head(mean_axis(a, 1), w1); }) < 1e-6);
  }

  SUBCASE("reshape/transpose/concat/slice") {
    auto a = param(randt({2, 3}, rng));
    auto b = param(randt({2, 2}, rng));
    Tensor<double> w = randt({6}, rng);
    double err = oracles::fd_gradcheck({a, b}, [&] {
      auto cat = concat2d<double>({a, b}, 1);
      auto back = transpose2d(transpose2d(cat));
      auto sl = slice_cols(back, 1, 3);
      return weighted_head(reshape(sl, {3, 2}), w);
    });
    CHECK(err < 1e-6);
  }

  SUBCASE("select") {
    auto c = param(randt({3}, rng));
    Tensor<double> w1 = randt({1}, rng);
    CHECK(oracles::fd_gradcheck({c}, [&] { return weighted_head(select(c, 1), w1); }) < 1e-6);
  }

  SUBCASE("add_bias_cols") {
    auto x = param(randt({3, 4}, rng));
    auto b = param(randt({3}, rng));
    Tensor<double> w = randt({12}, rng);
    double err =
        oracles::fd_gradcheck({x, b}, [&] { return weighted_head(add_bias_cols(x, b), w); });
    CHECK(err < 1e-6);
  }

  SUBCASE("batchnorm train and eval") {
    auto x = param(randt({3, 5}, rng));
    auto gamma = param(randt({3}, rng, 0.5, 1.5));
    auto beta = param(randt({3}, rng));
    Tensor<double> rm = randt({3}, rng);
    Tensor<double> rv = randt({3}, rng, 0.5, 2.0);
    Tensor<double> w = randt({15}, rng);
    for (Mode mode : {Mode::train, Mode::eval}) {
      Tensor<double> rm_copy = rm, rv_copy = rv;
      double err = oracles::fd_gradcheck({x, gamma, beta}, [&] {
        return weighted_head(batchnorm(x, gamma, beta, &rm_copy, &rv_copy, mode), w);
      });
      CHECK(err < 1e-6);
    }
  }

  SUBCASE("batchnorm N=1 train mode is epsilon-guarded") {
    auto x = param(randt({3, 1}, rng));
    auto gamma = param(randt({3}, rng, 0.5, 1.5));
    auto beta = param(randt({3}, rng));
    Tensor<double> rm({3}), rv = Tensor<double>::full({3}, 1.0);
    auto out = batchnorm(x, gamma, beta, &rm, &rv, Mode::train);
    CHECK(out->value.all_finite());
    for (long i = 0; i < 3; ++i) CHECK(out->value[i] == doctest::Approx(beta->value[i]));
  }

  SUBCASE("euclidean / l2 / cosine") {
    auto a = param(randt({6}, rng));
    auto b = param(randt({6}, rng));
    Tensor<double> w1 = randt({1}, rng);
    CHECK(oracles::fd_gradcheck({a, b}, [&] {
            return weighted_head(euclidean_distance(a, b), w1);
          }) < 1e-6);
    CHECK(oracles::fd_gradcheck({a}, [&] { return weighted_head(l2_norm(a), w1); }) < 1e-6);
    CHECK(oracles::fd_gradcheck({a, b}, [&] {
            return weighted_head(cosine_similarity(a, b), w1);
          }) < 1e-6);
  }
}

TEST_CASE("gradient through relu at listed points") {
  auto x = param(Tensor<double>({2}, {-1.0, 2.0}));
  backward(reduce_sum(relu(x)));
  CHECK(x->grad[0] == 0.0);
  CHECK(x->grad[1] == 1.0);
}

TEST_CASE("euclidean distance at coincident points has zero subgradient") {
  auto a = param(Tensor<double>({3}, {1, 2, 3}));
  auto b = param(Tensor<double>({3}, {1, 2, 3}));
  backward(euclidean_distance(a, b));
  REQUIRE(a->has_grad);
  for (long i = 0; i < 3; ++i) CHECK(a->grad[i] == 0.0);
}

TEST_CASE("constants do not receive gradients") {
  auto a = param(Tensor<double>({3}, {1, 2, 3}));
  auto c = constant(Tensor<double>({3}, {4, 5, 6}));
  backward(reduce_sum(mul(a, c)));
  CHECK(!c->has_grad);
  for (long i = 0; i < 3; ++i) CHECK(a->grad[i] == doctest::Approx(c->value[i]));
}
