#include <doctest.h>

#include <random>

#include "shadow.hpp"
#include "support.hpp"
#include "tractshape/autodiff.hpp"

using namespace tractshape;
using shadow::Mat;

namespace {

using shadow::mat_of;
using shadow::random_values;
using shadow::tensor_of;
using ad::Tensor;

}  // namespace

TEST_CASE("relu derivative at 2 and -1") {
  const auto x = Tensor::from({2}, {2.0f, -1.0f}, true);
  const auto y = ad::relu(x);
  CHECK(y.values()[0] == 2.0f);
  CHECK(y.values()[1] == 0.0f);
  ad::mse(y, Tensor::from({2}, {1.5f, 0.0f})).backward();
  // d/dy mse = (y - t); chain through relu' = (1, 0).
  CHECK(x.grad()[0] == doctest::Approx(0.5));
  CHECK(x.grad()[1] == 0.0f);
}

TEST_CASE("mse gradient is 2(x - c)/n") {
  const std::vector<float> xs = {0.5f, -1.25f, 3.0f, 2.0f};
  const std::vector<float> cs = {1.0f, 1.0f, -1.0f, 2.0f};
  const auto x = Tensor::from({4}, xs, true);
  const auto loss = ad::mse(x, Tensor::from({4}, cs));
  CHECK(loss.item() == doctest::Approx((0.25 + 5.0625 + 16 + 0) / 4));
  loss.backward();
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * (xs[i] - cs[i]) / 4.0));
}

TEST_CASE("every op passes the finite-difference check") {
  for (const auto& [name, op] : shadow::op_cases()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CAPTURE(name);
      CAPTURE(seed);
      CHECK(shadow::check_op(op, seed) < 1e-4);
    }
  }
}
TEST_CASE("dense_relu_max matches the unfused composition") {
  std::mt19937_64 rng(4);
  for (const auto [r, k, c] : {std::array<std::size_t, 3>{1, 3, 4}, {70, 8, 33}, {200, 16, 130}}) {
    const auto xv = random_values(r * k, rng), wv = random_values(k * c, rng), bv = random_values(c, rng, -2, 0.5);
    const auto x1 = tensor_of({r, k}, xv), w1 = tensor_of({k, c}, wv), b1 = tensor_of({c}, bv);
    const auto x2 = tensor_of({r, k}, xv), w2 = tensor_of({k, c}, wv), b2 = tensor_of({c}, bv);
    const auto fused = ad::dense_relu_max(x1, w1, b1);
    const auto plain = ad::max_rows(ad::relu(ad::add_bias(ad::matmul(x2, w2), b2)));
    for (std::size_t j = 0; j < c; ++j) {
      CHECK(fused.values.values()[j] == doctest::Approx(plain.values.values()[j]).epsilon(1e-5));
      if (plain.values.values()[j] > 1e-4f) CHECK(fused.argmax[j] == plain.argmax[j]);
    }
    const auto target = tensor_of({1, c}, random_values(c, rng), false);
    ad::mse(fused.values, target).backward();
    ad::mse(plain.values, target).backward();
    for (const auto& [a, b] : {std::pair{x1, x2}, std::pair{w1, w2}, std::pair{b1, b2}}) {
      for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.grad()[i] == doctest::Approx(b.grad()[i]).epsilon(1e-4));
    }
  }
}

TEST_CASE("max_rows ties go to the lowest row") {
  const auto x = Tensor::from({3, 2}, {1, 5, 4, 5, 4, 2}, true);
  const auto m = ad::max_rows(x);
  CHECK(m.argmax[0] == 1);
  CHECK(m.argmax[1] == 0);
  ad::mse(m.values, Tensor::from({1, 2}, {0, 0})).backward();
  CHECK(x.grad()[2] == 4.0f);
  CHECK(x.grad()[4] == 0.0f);
  CHECK(x.grad()[1] == 5.0f);
  CHECK(x.grad()[3] == 0.0f);
}

TEST_CASE("dft magnitude examples") {
  const auto impulse = ad::dft_magnitude(Tensor::from({5}, {1, 0, 0, 0, 0}));
  for (const float v : impulse.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-7));
  const auto dc = ad::dft_magnitude(Tensor::from({5}, {2.5f, 2.5f, 2.5f, 2.5f, 2.5f}));
  CHECK(dc.values()[0] == doctest::Approx(12.5));
  for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(dc.values()[k]) < 1e-6);
}

TEST_CASE("dft magnitude agrees with complex arithmetic on random vectors") {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_values(5, rng, -3, 3);
    const auto got = ad::dft_magnitude(tensor_of({5}, x, false));
    const auto want = shadow::dft_magnitude(mat_of(1, 5, x));
    const auto dbl = ad::dft_magnitude_values(x);
    for (std::size_t k = 0; k < 5; ++k) {
      worst = std::max(worst, std::abs(got.values()[k] - want.v[k]));
      CHECK(dbl[k] == doctest::Approx(want.v[k]).epsilon(1e-12));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("zero spectrum has zero subgradient") {
  const auto x = Tensor::from({5}, {0, 0, 0, 0, 0}, true);
  ad::mse(ad::dft_magnitude(x), Tensor::from({5}, {1, 1, 1, 1, 1})).backward();
  for (const float g : x.grad()) CHECK(g == 0.0f);
}

TEST_CASE("shape and finiteness errors") {
  const auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_ERROR_CODE(ad::matmul(a, b), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(ad::add(a, b), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(ad::mse(a, b), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(ad::add_bias(a, Tensor::from({2}, {1, 2})), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(ad::dense_relu_max(a, b, Tensor::from({2}, {1, 2})), ErrorCode::ShapeMismatch);
  CHECK_ERROR_CODE(ad::relu(a).backward(), ErrorCode::ShapeMismatch);
  const auto big = Tensor::from({1, 1}, {1e30f});
  CHECK_ERROR_CODE(ad::matmul(big, big), ErrorCode::NonFiniteValue);
  CHECK_ERROR_CODE(ad::scale(big, 1e10f), ErrorCode::NonFiniteValue);
  CHECK_ERROR_CODE(ad::dense_relu_max(big, big, Tensor::from({1}, {0})), ErrorCode::NonFiniteValue);
}

TEST_CASE("backward is linear and shared tensors accumulate") {
  std::mt19937_64 rng(6);
  const auto wv = random_values(6, rng), xv = random_values(8, rng);
  const auto t1 = tensor_of({4, 3}, random_values(12, rng), false);
  const auto t2 = tensor_of({4, 3}, random_values(12, rng), false);
  auto run = [&](int which) {
    const auto w = tensor_of({2, 3}, wv), x = tensor_of({4, 2}, xv, false);
    const auto y = ad::relu(ad::matmul(x, w));
    if (which == 1) ad::mse(y, t1).backward();
    if (which == 2) ad::mse(y, t2).backward();
    if (which == 3) ad::add(ad::mse(y, t1), ad::mse(y, t2)).backward();
    return std::vector<float>(w.grad().begin(), w.grad().end());
  };
  const auto g1 = run(1), g2 = run(2), g12 = run(3);
  for (std::size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-6));

  // One parameter used twice gets both contributions.
  auto w = Tensor::from({1}, {2.0f}, true);
  ad::add(ad::scale(w, 3.0f), ad::scale(w, 4.0f)).backward();
  CHECK(w.grad()[0] == 7.0f);
  w.zero_grad();
  CHECK(w.grad()[0] == 0.0f);
}

TEST_CASE("ops are bitwise deterministic") {
  auto run = [] {
    std::mt19937_64 rng(10);
    const auto x = tensor_of({50, 3}, random_values(150, rng), true);
    const auto w = tensor_of({3, 40}, random_values(120, rng), true);
    const auto b = tensor_of({40}, random_values(40, rng), true);
    const auto h = ad::dense_relu_max(x, w, b).values;
    ad::mse(ad::dft_magnitude(h), tensor_of({1, 40}, random_values(40, rng), false)).backward();
    std::vector<float> out(h.values().begin(), h.values().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}
