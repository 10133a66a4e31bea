#include <doctest.h>

#include <cmath>
#include <random>

#include "mat/error.hpp"
#include "mat/numerics/adam.hpp"
#include "mat/numerics/ops.hpp"
#include "support/gradcheck.hpp"

using namespace mat;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor64 random_tensor(std::mt19937_64& rng, Shape shape, bool grad = true, double lo = -1.0, double hi = 1.0) {
  const auto n = shape_size(shape);
  return Tensor64(std::move(shape), random_values(rng, n, lo, hi), grad);
}

// Values bounded away from zero so finite differences never straddle a kink.
Tensor64 random_tensor_off_zero(std::mt19937_64& rng, Shape shape) {
  auto t = random_tensor(rng, std::move(shape), true, 0.05, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.mutable_data()) v = flip(rng) ? -v : v;
  return t;
}

// sum(f(x) * R) with a fixed random R exercises a non-trivial upstream grad.
Tensor64 weighted_sum(const Tensor64& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, Tensor64(y.shape(), random_values(rng, y.size()))));
}

}  // namespace

TEST_CASE("matmul: identity and projector cases") {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor b = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto c = matmul(eye, b);
  CHECK(std::vector<float>(c.data().begin(), c.data().end()) == std::vector<float>{1, 2, 3, 4});

  Tensor proj = Tensor::matrix(2, 2, {1, 0, 0, 0});
  auto d = matmul(proj, Tensor::matrix(2, 2, {5, 6, 7, 8}));
  CHECK(std::vector<float>(d.data().begin(), d.data().end()) == std::vector<float>{5, 6, 0, 0});
}

TEST_CASE("matmul: random 3x4 by 4x2 matches a triple-loop oracle exactly") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> dist(-2.f, 2.f);
  std::vector<float> a(12), b(8);
  for (auto& v : a) v = dist(rng);
  for (auto& v : b) v = dist(rng);
  auto c = matmul(Tensor::matrix(3, 4, a), Tensor::matrix(4, 2, b));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += static_cast<double>(a[i * 4 + k]) * b[k * 2 + j];
      CHECK(c.at(i, j) == static_cast<float>(acc));
    }
  }
}

TEST_CASE("matmul: inner-extent mismatch names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax: analytic cases") {
  auto s = softmax(Tensor(Shape{3}, {0, 0, 0}), 0);
  for (float v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-7));

  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    auto t = softmax(Tensor64(Shape{2}, {c, c + std::log(2.0)}), 0);
    CHECK(t[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(t[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  auto big = softmax(Tensor(Shape{2}, {1000, 0}), 0);
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax: rows sum to one for large-magnitude inputs along any axis") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> v(2 * 3 * 4);
    std::uniform_real_distribution<float> dist(-1000.f, 1000.f);
    for (auto& x : v) x = dist(rng);
    Tensor x(Shape{2, 3, 4}, v);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto s = softmax(x, axis);
      const Shape& sh = s.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
      for (std::size_t i = axis + 1; i < 3; ++i) inner *= sh[i];
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          double total = 0.0;
          for (std::size_t i = 0; i < sh[axis]; ++i) {
            const float p = s[(o * sh[axis] + i) * inner + in];
            CHECK(p >= 0.f);
            total += p;
          }
          CHECK(std::abs(total - 1.0) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("non-finite values raise instead of propagating") {
  CHECK_THROWS_AS(Tensor(Shape{2}, {1.f, std::nanf("")}), NumericError);
  CHECK_THROWS_AS(scale(Tensor(Shape{1}, {1e30f}), 1e30), NumericError);
  CHECK_THROWS_AS(log(Tensor(Shape{2}, {1.f, 0.f})), NumericError);
}

TEST_CASE("layer_norm: analytic cases and statistics") {
  auto ones = Tensor::full({3}, 1.f);
  auto zeros = Tensor::zeros({3});
  auto c = layer_norm(Tensor(Shape{1, 3}, {5, 5, 5}), ones, zeros);
  for (float v : c.data()) CHECK(v == 0.f);

  auto s = layer_norm(Tensor64(Shape{1, 2}, {1, -1}), Tensor64::full({2}, 1.0), Tensor64::zeros({2}), 0.0);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(-1.0));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> v(16);
    std::uniform_real_distribution<float> dist(-10.f, 10.f);
    for (auto& x : v) x = dist(rng);
    auto y = layer_norm(Tensor(Shape{1, 16}, v), Tensor::full({16}, 1.f), Tensor::zeros({16}));
    double m = 0.0, var = 0.0;
    for (float x : y.data()) m += x;
    m /= 16.0;
    for (float x : y.data()) var += (x - m) * (x - m);
    var /= 16.0;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }

  CHECK_THROWS_AS(layer_norm(Tensor::zeros({2, 4}), Tensor::zeros({3}), Tensor::zeros({3})), DimensionError);
}

TEST_CASE("relu: values and subgradient") {
  auto y = relu(Tensor(Shape{3}, {-1, 0, 2}));
  CHECK(std::vector<float>(y.data().begin(), y.data().end()) == std::vector<float>{0, 0, 2});
  auto z = relu(Tensor(Shape{3}, {-1, -2, -3}));
  for (float v : z.data()) CHECK(v == 0.f);

  Tensor x(Shape{3}, {3, -3, 0}, true);
  sum(relu(x)).backward();
  CHECK(x.grad()[0] == 1.f);
  CHECK(x.grad()[1] == 0.f);
  CHECK(x.grad()[2] == 0.f);
}

TEST_CASE("backward: sum of squares") {
  Tensor w(Shape{2}, {1, 2}, true);
  sum(mul(w, w)).backward();
  CHECK(w.grad()[0] == 2.f);
  CHECK(w.grad()[1] == 4.f);
}

TEST_CASE("backward: softmax cross-entropy matches the analytic Jacobian") {
  // d/dz [-log softmax(z)_label] = softmax(z) - onehot(label)
  const double z0 = 0.3, z1 = -1.2;
  Tensor64 z(Shape{2}, {z0, z1}, true);
  Tensor64 onehot(Shape{2}, {0.0, 1.0});
  scale(sum(mul(onehot, log(softmax(z, 0)))), -1.0).backward();
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  CHECK(z.grad()[0] == doctest::Approx(p0).epsilon(1e-12));
  CHECK(z.grad()[1] == doctest::Approx((1.0 - p0) - 1.0).epsilon(1e-12));
}

TEST_CASE("backward: usage errors, accumulation, linearity") {
  Tensor w(Shape{2}, {1, 2}, true);
  CHECK_THROWS_AS(mul(w, w).backward(), UsageError);

  sum(mul(w, w)).backward();
  sum(mul(w, w)).backward();
  CHECK(w.grad()[0] == 4.f);
  CHECK(w.grad()[1] == 8.f);

  std::mt19937_64 rng(9);
  auto a = random_tensor(rng, {3, 4});
  auto b = random_tensor(rng, {4, 2});
  auto loss1 = [&] { return weighted_sum(relu(matmul(a, b)), 1); };
  auto loss2 = [&] { return weighted_sum(softmax(matmul(a, b), 1), 2); };
  loss1().backward();
  loss2().backward();
  std::vector<double> separate(a.grad().begin(), a.grad().end());
  a.zero_grad();
  b.zero_grad();
  add(loss1(), loss2()).backward();
  for (std::size_t i = 0; i < separate.size(); ++i) CHECK(a.grad()[i] == doctest::Approx(separate[i]).epsilon(1e-12));
}

TEST_CASE("backward: tape is released after the sweep") {
  Tensor w(Shape{2}, {1, 2}, true);
  auto y = mul(w, w);
  auto loss = sum(y);
  loss.backward();
  CHECK(y.node()->parents.empty());
  CHECK(loss.node()->parents.empty());
}

TEST_CASE("no-grad guard skips taping") {
  Tensor w(Shape{2}, {1, 2}, true);
  NoGradGuard guard;
  auto y = mul(w, w);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite differences agree with the tape for every differentiable op") {
  using mat::testing::check_gradients;
  using Fn = std::function<Tensor64(std::mt19937_64&, std::vector<Tensor64>&)>;
  // Each builder draws fresh inputs (<= 8 per axis) and returns the loss closure's inputs.
  struct Case {
    const char* name;
    std::function<std::function<Tensor64()>(std::mt19937_64&, std::vector<Tensor64>&)> build;
  };
  std::vector<Case> cases = {
      {"matmul", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 5}), random_tensor(rng, {5, 4})};
         return [&ps] { return weighted_sum(matmul(ps[0], ps[1]), 1); };
       }},
      {"transpose", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 5})};
         return [&ps] { return weighted_sum(transpose(ps[0]), 2); };
       }},
      {"add/sub/mul", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {4, 3}), random_tensor(rng, {4, 3})};
         return [&ps] { return weighted_sum(mul(add(ps[0], ps[1]), sub(ps[0], ps[1])), 3); };
       }},
      {"scale/add_bias", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {4, 3}), random_tensor(rng, {3})};
         return [&ps] { return weighted_sum(add_bias(scale(ps[0], -1.7), ps[1]), 4); };
       }},
      {"softmax axis 1", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {4, 6}, true, -3, 3)};
         return [&ps] { return weighted_sum(softmax(ps[0], 1), 5); };
       }},
      {"softmax 3d axis 0", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 2, 4}, true, -3, 3)};
         return [&ps] { return weighted_sum(softmax(ps[0], 0), 6); };
       }},
      {"layer_norm", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 8}, true, -2, 2), random_tensor(rng, {8}), random_tensor(rng, {8})};
         return [&ps] { return weighted_sum(layer_norm(ps[0], ps[1], ps[2]), 7); };
       }},
      {"relu", [](auto& rng, auto& ps) {
         ps = {random_tensor_off_zero(rng, {4, 5})};
         return [&ps] { return weighted_sum(relu(ps[0]), 8); };
       }},
      {"log", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {6}, true, 0.5, 2.0)};
         return [&ps] { return weighted_sum(log(ps[0]), 9); };
       }},
      {"mask_logits+softmax", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 3}, true, -2, 2)};
         return [&ps] {
           return weighted_sum(softmax(mask_logits(ps[0], {1, 0, 0, 1, 1, 0, 1, 1, 1}), 1), 10);
         };
       }},
      {"mean/sum", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {2, 7})};
         return [&ps] { return add(mean(mul(ps[0], ps[0])), scale(sum(ps[0]), 0.3)); };
       }},
      {"reshape/slices", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {4, 6})};
         return [&ps] {
           auto r = reshape(ps[0], {6, 4});
           return add(weighted_sum(slice_rows(r, 1, 5), 11), weighted_sum(slice_cols(ps[0], 2, 5), 12));
         };
       }},
      {"concat", [](auto& rng, auto& ps) {
         ps = {random_tensor(rng, {3, 2}), random_tensor(rng, {3, 4}), random_tensor(rng, {2, 6})};
         return [&ps] { return weighted_sum(concat_rows<double>({concat_cols<double>({ps[0], ps[1]}), ps[2]}), 13); };
       }},
  };

  for (const auto& c : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed * 7919 + 1);
      std::vector<Tensor64> params;
      auto loss = c.build(rng, params);
      worst = std::max(worst, check_gradients(params, loss).max_rel_err);
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<Tensor> ps{Tensor(Shape{3}, {0.5f, -1.f, 2.f}, true)};
  ps[0].mutable_grad();  // zeros
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step(ps, st);
  CHECK(std::vector<float>(ps[0].data().begin(), ps[0].data().end()) == std::vector<float>{0.5f, -1.f, 2.f});
  CHECK(st.step == 5);
}

TEST_CASE("adam: first step with unit gradient moves by lr") {
  std::vector<Tensor64> ps{Tensor64(Shape{1}, {1.0}, true)};
  ps[0].mutable_grad()[0] = 1.0;
  AdamState st;
  adam_step(ps, st);
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  CHECK(ps[0][0] == doctest::Approx(1.0 - 1e-4 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam: ten steps on theta^2 match a scalar reference") {
  // Scalar reference Adam, written out independently.
  double theta = 1.0, m = 0.0, v = 0.0;
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> expected;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * theta;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    expected.push_back(theta);
  }

  std::vector<Tensor> ps{Tensor(Shape{1}, {1.f}, true)};
  AdamState st(AdamConfig{lr, b1, b2, eps});
  for (int t = 0; t < 10; ++t) {
    ps[0].zero_grad();
    sum(mul(ps[0], ps[0])).backward();
    adam_step(ps, st);
    CHECK(std::abs(ps[0][0] - expected[t]) < 1e-6);
  }
}

TEST_CASE("adam: misaligned state is a dimension error") {
  std::vector<Tensor> ps{Tensor::zeros({2}, true)};
  AdamState st;
  adam_step(ps, st);
  std::vector<Tensor> other{Tensor::zeros({3}, true)};
  CHECK_THROWS_AS(adam_step(other, st), DimensionError);
}
