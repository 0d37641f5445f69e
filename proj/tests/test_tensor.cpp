#include <doctest.h>

#include <cmath>

#include "gmg/errors.hpp"
#include "gmg/optim.hpp"
#include "gmg/tensor.hpp"
#include "test_util.hpp"

using namespace gmg;
using gmg::test::gradient_error;
using gmg::test::random_tensor;

TEST_CASE("matmul values") {
  const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor id = matmul(Tensor::eye(2), m);
  CHECK(std::vector<double>(id.data().begin(), id.data().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})).item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(a.b) is ones . b^T") {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng, false);
  sum(matmul(a, b)).backward();
  // Expected: row i of grad = sum over j of b[k, j] for each k.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.grad()[i * 4 + k] == doctest::Approx(b.at({k, 0}) + b.at({k, 1})));
  // Finite-difference oracle at h = 1e-6.
  CHECK(gradient_error({a}, [&](const auto& in) { return sum(matmul(in[0], b)); }) < 1e-6);
}

TEST_CASE("elementwise examples") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor m = mean(x);
  CHECK(m.item() == 2.0);
  m.backward();
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0 / 3.0));

  Tensor two = Tensor::scalar(2.0, true);
  Tensor y = log(square(two));
  CHECK(y.item() == doctest::Approx(std::log(4.0)));
  CHECK(gradient_error({two}, [](const auto& in) { return log(square(in[0])); }) < 1e-6);
  two.zero_grad();
  y.backward();
  CHECK(two.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("every differentiable op matches finite differences") {
  std::mt19937_64 rng(7);
  const double tol = 1e-4;
  auto pos = [&](Shape s) { return random_tensor(std::move(s), rng, true, 0.5, 2.0); };

  CHECK(gradient_error({random_tensor({2, 3}, rng), random_tensor({3}, rng)},
                       [](const auto& in) { return sum(square(in[0] + in[1])); }) < tol);
  CHECK(gradient_error({random_tensor({2, 3}, rng), random_tensor({2, 1}, rng)},
                       [](const auto& in) { return sum(square(in[0] - in[1])); }) < tol);
  CHECK(gradient_error({random_tensor({4}, rng), random_tensor({4}, rng)},
                       [](const auto& in) { return sum(in[0] * in[1] * in[0]); }) < tol);
  CHECK(gradient_error({random_tensor({3}, rng), pos({3})}, [](const auto& in) { return sum(in[0] / in[1]); }) < tol);
  CHECK(gradient_error({pos({5})}, [](const auto& in) { return sum(sqrt(in[0])); }) < tol);
  CHECK(gradient_error({random_tensor({5}, rng)}, [](const auto& in) { return sum(exp(in[0])); }) < tol);
  CHECK(gradient_error({pos({5})}, [](const auto& in) { return sum(log(in[0])); }) < tol);
  CHECK(gradient_error({random_tensor({5}, rng)}, [](const auto& in) { return sum(sigmoid(in[0]) * in[0]); }) < tol);
  CHECK(gradient_error({random_tensor({5}, rng, true, 0.1, 1.0)}, [](const auto& in) { return sum(relu(in[0])); }) < tol);
  CHECK(gradient_error({random_tensor({5}, rng, true, -3, 3)}, [](const auto& in) { return sum(softplus(in[0])); }) < tol);
  CHECK(gradient_error({random_tensor({2, 4}, rng)}, [](const auto& in) {
          return sum(log_softmax(in[0]) * Tensor::from({2, 4}, {1, 0, 0, 2, 0, 1, 0, 0}));
        }) < tol);
  CHECK(gradient_error({random_tensor({2, 3, 4}, rng)}, [](const auto& in) { return sum(square(sum_axis(in[0], 1))); }) < tol);
  CHECK(gradient_error({random_tensor({2, 3, 4}, rng)}, [](const auto& in) { return sum(square(mean_axis(in[0], 2))); }) < tol);
  CHECK(gradient_error({random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)},
                       [](const auto& in) { return sum(square(concat({in[0], in[1]}, 1))); }) < tol);
  CHECK(gradient_error({random_tensor({6}, rng)}, [](const auto& in) { return sum(square(reshape(in[0], {2, 3}) * 3.0)); }) < tol);
  CHECK(gradient_error({random_tensor({4, 4}, rng), random_tensor({3, 4, 2}, rng)},
                       [](const auto& in) { return sum(square(node_mix(in[0], in[1]))); }) < tol);
  CHECK(gradient_error({random_tensor({2, 3, 2, 3}, rng), random_tensor({3, 3, 2}, rng)},
                       [](const auto& in) { return sum(square(temporal_conv(in[0], in[1], 1))); }) < tol);
}

TEST_CASE("broadcast rejects misaligned trailing dimensions") {
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  CHECK_NOTHROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3})));
  CHECK_NOTHROW(add(Tensor::zeros({2, 3}), Tensor::zeros({2, 1})));
}

TEST_CASE("division policies") {
  const Tensor one = Tensor::scalar(1.0);
  const Tensor zero = Tensor::scalar(0.0);
  CHECK(std::isinf(div(one, zero).item()));
  CHECK_THROWS_AS(div(one, zero, DivPolicy::strict), NumericError);
}

TEST_CASE("backward accumulates and needs a scalar") {
  Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  Tensor loss = sum(square(x));
  loss.backward();
  const std::vector<double> once(x.grad().begin(), x.grad().end());
  loss.backward();
  CHECK(x.grad()[0] == 2 * once[0]);
  CHECK(x.grad()[1] == 2 * once[1]);
  CHECK_THROWS_AS(square(x).backward(), ShapeError);
}

TEST_CASE("backward visits a shared node once") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = square(x);
  Tensor z = y + y;  // dz/dx = 4x
  z.backward();
  CHECK(x.grad()[0] == 12.0);
}

TEST_CASE("backward is linear in the loss scale") {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor b = random_tensor({3, 2}, rng);
  auto loss = [&] { return sum(sigmoid(matmul(a, b))); };
  loss().backward();
  const std::vector<double> g1(a.grad().begin(), a.grad().end());
  a.zero_grad();
  b.zero_grad();
  scale(loss(), 4.0).backward();
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(a.grad()[i] == doctest::Approx(4.0 * g1[i]).epsilon(1e-15));
}

TEST_CASE("ops are deterministic") {
  std::mt19937_64 r1(5), r2(5);
  Tensor a1 = random_tensor({4, 4}, r1), a2 = random_tensor({4, 4}, r2);
  const Tensor y1 = log_softmax(matmul(a1, a1));
  const Tensor y2 = log_softmax(matmul(a2, a2));
  CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

TEST_CASE("log_softmax survives large logits") {
  const Tensor y = log_softmax(Tensor::from({2}, {1000.0, 0.0}));
  CHECK(y.data()[0] == doctest::Approx(0.0));
  CHECK(std::isfinite(y.data()[1]));
}

TEST_CASE("temporal_conv zero padding") {
  // One node, one channel, three steps, kernel of ones: edges see one zero tap.
  const Tensor x = Tensor::from({1, 3, 1, 1}, {1, 1, 1});
  const Tensor k = Tensor::from({3, 1, 1}, {1, 1, 1});
  const Tensor y = temporal_conv(x, k, 1);
  CHECK(y.shape() == Shape{1, 3, 1, 1});
  CHECK(y.data()[0] == 2.0);
  CHECK(y.data()[1] == 3.0);
  CHECK(y.data()[2] == 2.0);
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
  Tensor p = Tensor::scalar(0.0, true);
  Adam opt({{"p", p}}, AdamOptions{.lr = 0.1});
  p.grad_mut()[0] = 1.0;
  opt.step();
  CHECK(p.item() == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam leaves a zero-gradient parameter alone") {
  Tensor p = Tensor::scalar(0.25, true);
  Adam opt({{"p", p}}, AdamOptions{.lr = 0.1});
  p.grad_mut()[0] = 0.0;
  opt.step();
  CHECK(p.item() == 0.25);
}

TEST_CASE("adam consecutive identical gradients match a scalar hand simulation") {
  Tensor p = Tensor::scalar(1.0, true);
  const AdamOptions o{.lr = 0.05};
  Adam opt({{"p", p}}, o);
  double m = 0, v = 0, expected = 1.0, previous = 1.0;
  for (int t = 1; t <= 2; ++t) {
    p.grad_mut()[0] = 0.5;
    opt.step();
    m = o.beta1 * m + (1 - o.beta1) * 0.5;
    v = o.beta2 * v + (1 - o.beta2) * 0.25;
    expected -= o.lr * (m / (1 - std::pow(o.beta1, t))) / (std::sqrt(v / (1 - std::pow(o.beta2, t))) + o.eps);
    CHECK(p.item() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(p.item() < previous);
    previous = p.item();
    p.zero_grad();
  }
}

TEST_CASE("adam names the parameter without a gradient") {
  Tensor a = Tensor::scalar(0.0, true);
  Tensor b = Tensor::scalar(0.0, true);
  Adam opt({{"alpha", a}, {"beta_param", b}});
  a.grad_mut()[0] = 1.0;
  try {
    opt.step();
    FAIL("expected error");
  } catch (const std::logic_error& e) {
    CHECK(std::string(e.what()).find("beta_param") != std::string::npos);
  }
}
