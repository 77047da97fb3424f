#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <doctest.h>

#include "hgcl/rng.hpp"
#include "hgcl/tensor.hpp"
#include "testutil.hpp"

using namespace hgcl;

namespace {

// Random tensor with entries kept away from activation kinks at 0.
Tensor away_from_kinks(int r, int c, Rng& rng, bool grad = true) {
  Tensor t = Tensor::zeros(r, c, grad);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(0.2, 1.0);
    t.data()[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("factories produce the documented shapes and values") {
  const Tensor z = Tensor::zeros(2, 3);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  CHECK(z.size() == 6);
  CHECK(z.at(1, 2) == 0.0);
  const Tensor f = Tensor::full(2, 2, 7.5);
  CHECK(f.at(0, 1) == 7.5);
  const Tensor s = Tensor::scalar(-2.0);
  CHECK(s.value() == -2.0);
  CHECK_THROWS_AS(Tensor::zeros(0, 3), std::runtime_error);
  CHECK_THROWS_AS(Tensor::from_data(2, 2, {1.0, 2.0}), std::runtime_error);
  CHECK_THROWS_AS(f.value(), std::runtime_error);
}

TEST_CASE("copies share storage") {
  Tensor a = Tensor::zeros(2, 2);
  Tensor b = a;
  b.data()[3] = 5.0;
  CHECK(a.at(1, 1) == 5.0);
  CHECK(a.storage_id() == b.storage_id());
}

TEST_CASE("matmul forward matches the reference and validates shapes") {
  Rng rng(21);
  Tensor a = away_from_kinks(3, 4, rng, false);
  Tensor b = away_from_kinks(4, 2, rng, false);
  const Tensor c = matmul(a, b);
  const auto expect = testutil::ref::matmul(
      std::vector<double>(a.data(), a.data() + a.size()),
      std::vector<double>(b.data(), b.data() + b.size()), 3, 4, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(c.at(i, j) == doctest::Approx(expect[i * 2 + j]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(matmul(a, a), std::runtime_error);
}

TEST_CASE("elementwise forward values") {
  const Tensor x = Tensor::from_data(1, 4, {-2.0, -0.5, 0.5, 2.0});
  CHECK(relu(x).at(0, 0) == 0.0);
  CHECK(relu(x).at(0, 3) == 2.0);
  CHECK(leaky_relu(x, 0.2).at(0, 0) == doctest::Approx(-0.4));
  CHECK(leaky_relu(x, 0.2).at(0, 3) == 2.0);
  CHECK(elu(x).at(0, 0) == doctest::Approx(std::expm1(-2.0)));
  CHECK(elu(x).at(0, 3) == 2.0);
  CHECK(tanh(x).at(0, 1) == doctest::Approx(std::tanh(-0.5)));
  CHECK(exp(x).at(0, 2) == doctest::Approx(std::exp(0.5)));
  CHECK(neg(x).at(0, 3) == -2.0);
  CHECK(scale(x, 3.0).at(0, 1) == doctest::Approx(-1.5));
  CHECK(add_scalar(x, 1.0).at(0, 0) == -1.0);
  const Tensor pos = Tensor::from_data(1, 2, {1.0, std::exp(1.0)});
  CHECK(log(pos).at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("broadcasting covers equal, scalar and row cases and rejects the rest") {
  const Tensor m = Tensor::from_data(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor row = Tensor::from_data(1, 3, {10, 20, 30});
  const Tensor s = Tensor::scalar(100);
  CHECK(add(m, row).at(1, 2) == 36.0);
  CHECK(add(row, m).at(1, 2) == 36.0);
  CHECK(add(m, s).at(0, 0) == 101.0);
  CHECK(sub(m, row).at(0, 1) == -18.0);
  CHECK(mul(m, row).at(1, 0) == 40.0);
  const Tensor col = Tensor::from_data(2, 1, {1, 2});
  CHECK_THROWS_AS(add(m, col), std::runtime_error);
}

TEST_CASE("reductions and structure ops") {
  const Tensor m = Tensor::from_data(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(sum(m).value() == 21.0);
  CHECK(mean(m).value() == 3.5);
  CHECK(sum_cols(m).at(0, 0) == 6.0);
  CHECK(sum_cols(m).at(1, 0) == 15.0);
  CHECK(transpose(m).at(2, 1) == 6.0);
  CHECK(reshape(m, 3, 2).at(2, 0) == 5.0);
  CHECK_THROWS_AS(reshape(m, 4, 2), std::runtime_error);
  const Tensor sq = Tensor::from_data(2, 2, {1, 2, 3, 4});
  CHECK(diag_part(sq).at(1, 0) == 4.0);
  CHECK_THROWS_AS(diag_part(m), std::runtime_error);
  CHECK(gather_rows(m, {1, 0, 1}).at(0, 0) == 4.0);
  CHECK_THROWS_AS(gather_rows(m, {2}), std::runtime_error);
  CHECK(concat_cols({m, m}).cols() == 6);
  CHECK(concat_rows({m, m}).rows() == 4);
}

TEST_CASE("row_softmax rows sum to one and masked variant zeroes off-mask") {
  const Tensor x = Tensor::from_data(2, 3, {1, 2, 3, -1, 0, 1});
  const Tensor p = row_softmax(x);
  CHECK(p.at(0, 0) + p.at(0, 1) + p.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  const Tensor mask = Tensor::from_data(2, 3, {1, 0, 1, 0, 1, 1});
  const Tensor q = masked_row_softmax(x, mask);
  CHECK(q.at(0, 1) == 0.0);
  CHECK(q.at(0, 0) + q.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  // exp(1)/(exp(1)+exp(3)) on the mask
  CHECK(q.at(0, 0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + std::exp(3.0))));
  const Tensor empty_row = Tensor::from_data(2, 3, {1, 0, 1, 0, 0, 0});
  CHECK_THROWS_AS(masked_row_softmax(x, empty_row), std::runtime_error);
  const Tensor bad = Tensor::from_data(2, 3, {1, 0.5, 1, 0, 1, 1});
  CHECK_THROWS_AS(masked_row_softmax(x, bad), std::runtime_error);
  const Tensor grad_mask = Tensor::from_data(2, 3, {1, 0, 1, 0, 1, 1}, true);
  CHECK_THROWS_AS(masked_row_softmax(x, grad_mask), std::runtime_error);
}

TEST_CASE("l2_normalize_rows yields unit rows and rejects zero rows") {
  const Tensor x = Tensor::from_data(2, 2, {3, 4, 0.5, 0});
  const Tensor y = l2_normalize_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(0.6));
  CHECK(y.at(0, 1) == doctest::Approx(0.8));
  CHECK(y.at(1, 0) == doctest::Approx(1.0));
  const Tensor zero = Tensor::from_data(1, 2, {0, 0});
  CHECK_THROWS_AS(l2_normalize_rows(zero), std::runtime_error);
}

TEST_CASE("non-finite results abort with a diagnostic") {
  const Tensor neg1 = Tensor::from_data(1, 1, {-1.0});
  CHECK_THROWS_WITH_AS(log(neg1), "log: non-finite result", std::runtime_error);
  const Tensor huge = Tensor::from_data(1, 1, {1e308});
  CHECK_THROWS_AS(exp(huge), std::runtime_error);
  CHECK_THROWS_AS(mul(huge, huge), std::runtime_error);
}

TEST_CASE("gradients of every primitive match finite differences") {
  Rng rng(22);
  Tensor a = away_from_kinks(3, 4, rng);
  Tensor b = away_from_kinks(4, 3, rng);
  Tensor c = away_from_kinks(3, 4, rng);
  Tensor row = away_from_kinks(1, 4, rng);

  const std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
      {"matmul", [&] { return sum(matmul(a, b)); }},
      {"transpose", [&] { return sum(matmul(transpose(a), transpose(b))); }},
      {"add", [&] { return sum(mul(add(a, c), a)); }},
      {"sub", [&] { return sum(mul(sub(a, c), c)); }},
      {"mul", [&] { return sum(mul(a, c)); }},
      {"add_row_broadcast", [&] { return sum(tanh(add(a, row))); }},
      {"mul_row_broadcast", [&] { return sum(mul(a, row)); }},
      {"scale", [&] { return sum(scale(a, -1.7)); }},
      {"add_scalar", [&] { return sum(exp(add_scalar(scale(a, 0.1), -0.2))); }},
      {"neg", [&] { return sum(neg(mul(a, a))); }},
      {"relu", [&] { return sum(relu(a)); }},
      {"leaky_relu", [&] { return sum(leaky_relu(a, 0.2)); }},
      {"elu", [&] { return sum(elu(a)); }},
      {"tanh", [&] { return sum(tanh(a)); }},
      {"exp", [&] { return sum(exp(scale(a, 0.5))); }},
      {"log", [&] { return sum(log(add_scalar(mul(a, a), 0.5))); }},
      {"mean", [&] { return mean(mul(a, a)); }},
      {"sum_cols", [&] { return sum(tanh(sum_cols(a))); }},
      {"row_softmax", [&] { return sum(mul(row_softmax(a), c)); }},
      {"gather_rows", [&] { return sum(gather_rows(a, {2, 0, 2})); }},
      {"reshape", [&] { return sum(tanh(reshape(a, 4, 3))); }},
      {"concat_cols", [&] { return sum(mul(concat_cols({a, c}), concat_cols({c, a}))); }},
      {"concat_rows", [&] { return sum(tanh(concat_rows({a, c})));}},
      {"diag_part", [&] { return sum(diag_part(matmul(a, b))); }},
      {"l2_normalize", [&] { return sum(mul(l2_normalize_rows(a), c)); }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    CHECK(testutil::fd_check(fn, {a, b, c, row}) < 1e-6);
  }
}

TEST_CASE("masked softmax gradient matches finite differences") {
  Rng rng(23);
  Tensor a = away_from_kinks(4, 4, rng);
  Tensor c = away_from_kinks(4, 4, rng);
  const Tensor mask =
      Tensor::from_data(4, 4, {1, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1});
  const auto fn = [&] { return sum(mul(masked_row_softmax(a, mask), c)); };
  CHECK(testutil::fd_check(fn, {a, c}) < 1e-6);
}

TEST_CASE("leaf gradients accumulate across backward calls") {
  Tensor a = Tensor::from_data(1, 2, {1.0, 2.0}, true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    Tensor loss = sum(mul(a, a));
    tape.backward(loss);
  }
  CHECK(a.grad()[0] == doctest::Approx(4.0));  // 2 * (2 * a0)
  CHECK(a.grad()[1] == doctest::Approx(8.0));
  a.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("intermediate gradients reset between backward calls on one tape") {
  Tensor a = Tensor::from_data(1, 1, {3.0}, true);
  Tape tape;
  Tensor mid = mul(a, a);
  Tensor loss = sum(mid);
  tape.backward(loss);
  tape.backward(loss);  // replay; mid's grad must not double
  CHECK(mid.grad()[0] == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(12.0));  // leaf: two passes accumulate
}

TEST_CASE("backward rejects non-scalar losses and empty tapes") {
  Tensor a = Tensor::from_data(2, 2, {1, 2, 3, 4}, true);
  {
    Tape tape;
    Tensor y = mul(a, a);
    CHECK_THROWS_AS(tape.backward(y), std::runtime_error);
  }
  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0, true)), std::runtime_error);
  }
}

TEST_CASE("no tape means no recording") {
  Tensor a = Tensor::from_data(1, 1, {2.0}, true);
  Tensor y = mul(a, a);  // outside any tape
  CHECK_FALSE(y.requires_grad());
  Tape tape;
  CHECK(tape.num_ops() == 0);
  Tensor z = mul(a, a);
  CHECK(z.requires_grad());
  CHECK(tape.num_ops() == 1);
}

TEST_CASE("adam first step matches the closed form") {
  // With bias correction the first update is exactly -lr * sign(g) when
  // eps is negligible: m_hat = g, v_hat = g^2.
  Tensor p = Tensor::from_data(1, 2, {1.0, -2.0}, true);
  std::vector<Tensor> params = {p};
  AdamState st = adam_init(params, 0.01, 0.9, 0.999, 1e-12);
  p.grad()[0] = 0.5;
  p.grad()[1] = -3.0;
  adam_step(params, st);
  CHECK(p.at(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
  CHECK(p.at(0, 1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
}

TEST_CASE("adam trajectory matches a straight-line reimplementation") {
  Rng rng(24);
  Tensor p = away_from_kinks(2, 3, rng);
  std::vector<Tensor> params = {p};
  const double lr = 0.005, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  AdamState st = adam_init(params, lr, b1, b2, eps);
  std::vector<double> x(p.data(), p.data() + p.size());
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
  for (int step = 1; step <= 5; ++step) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sin(0.3 * step + 0.7 * i);
    std::copy(g.begin(), g.end(), p.grad());
    adam_step(params, st);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, step));
      const double vh = v[i] / (1 - std::pow(b2, step));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
      CHECK(p.data()[i] == doctest::Approx(x[i]).epsilon(1e-14));
    }
    zero_grads(params);
  }
}

TEST_CASE("adam validates parameter lists") {
  Tensor p = Tensor::from_data(1, 1, {1.0}, true);
  Tensor frozen = Tensor::from_data(1, 1, {1.0}, false);
  std::vector<Tensor> params = {p};
  AdamState st = adam_init(params, 0.01, 0.9, 0.999, 1e-8);
  std::vector<Tensor> wrong = {p, p};
  CHECK_THROWS_AS(adam_step(wrong, st), std::runtime_error);
  std::vector<Tensor> bad = {frozen};
  CHECK_THROWS_AS(adam_step(bad, st), std::runtime_error);
}

}  // TEST_SUITE
