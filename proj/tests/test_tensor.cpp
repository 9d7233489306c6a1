#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

using tclsta::Tensor;

namespace {

Tensor random_tensor(tclsta::Rng& rng, tclsta::Shape shape, double scale = 1.0,
                     bool requires_grad = false) {
  std::vector<double> v(tclsta::detail::shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("softmax basics") {
  auto uniform = tclsta::softmax(Tensor::from_values({3}, {0.0, 0.0, 0.0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(uniform.value(i) == Catch::Approx(1.0 / 3.0).margin(1e-15));

  auto single = tclsta::softmax(Tensor::from_values({1}, {5.0}));
  CHECK(single.value(0) == 1.0);

  // exp(ln 3) / (exp(ln 3) + exp(0)) = 3/4
  auto two = tclsta::softmax(Tensor::from_values({2}, {std::log(3.0), 0.0}));
  CHECK(two.value(0) == Catch::Approx(0.75).margin(1e-12));
  CHECK(two.value(1) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("softmax sums to one and ignores constant shifts") {
  tclsta::Rng rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t n = 1 + rng.index(12);
    Tensor v = random_tensor(rng, {n}, 10.0);
    Tensor y = tclsta::softmax(v);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y.value(i) >= 0.0);
      total += y.value(i);
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));

    double shift = rng.uniform(-50.0, 50.0);
    Tensor shifted = tclsta::add_scalar(v, shift);
    Tensor ys = tclsta::softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(ys.value(i) == Catch::Approx(y.value(i)).margin(1e-12));

    // against the long-double oracle
    auto ref = oracle::softmax(v.values());
    for (std::size_t i = 0; i < n; ++i) CHECK(y.value(i) == Catch::Approx(ref[i]).margin(1e-14));
  }
}

TEST_CASE("softmax of empty vector fails") {
  Tensor empty = Tensor::zeros({0});
  CHECK_THROWS_MATCHES(tclsta::softmax(empty), tclsta::Error,
                       Catch::Matchers::Predicate<tclsta::Error>(
                           [](const tclsta::Error& e) { return e.category() == "empty-vector"; }));
}

TEST_CASE("cross entropy on known distributions") {
  // one-hot at the label: -ln(1) = 0
  auto hot = tclsta::cross_entropy(Tensor::from_values({3}, {0.0, 1.0, 0.0}), 1);
  CHECK(hot.scalar_value() == 0.0);

  // uniform over c classes: ln c
  auto flat = tclsta::cross_entropy(Tensor::from_values({4}, {0.25, 0.25, 0.25, 0.25}), 2);
  CHECK(flat.scalar_value() == Catch::Approx(std::log(4.0)).margin(1e-12));

  // p = (0.75, 0.25), label 1: -ln(0.25) = ln 4
  auto quarter = tclsta::cross_entropy(Tensor::from_values({2}, {0.75, 0.25}), 1);
  CHECK(quarter.scalar_value() == Catch::Approx(std::log(4.0)).margin(1e-12));

  CHECK_THROWS_MATCHES(tclsta::cross_entropy(Tensor::from_values({2}, {0.5, 0.5}), 2), tclsta::Error,
                       Catch::Matchers::Predicate<tclsta::Error>(
                           [](const tclsta::Error& e) { return e.category() == "bad-label"; }));
}

TEST_CASE("cross entropy stays finite on degenerate input") {
  auto loss = tclsta::cross_entropy(Tensor::from_values({2}, {1.0, 0.0}), 1);
  CHECK(std::isfinite(loss.scalar_value()));
  CHECK(loss.scalar_value() == Catch::Approx(-std::log(1e-12)).margin(1e-6));
}

TEST_CASE("gradient through softmax + cross entropy equals probs minus one-hot") {
  tclsta::Rng rng(202);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = 2 + rng.index(8);
    Tensor logits = random_tensor(rng, {n}, 4.0, true);
    std::size_t label = rng.index(n);
    Tensor probs = tclsta::softmax(logits);
    Tensor loss = tclsta::cross_entropy(probs, label);
    loss.backward();
    for (std::size_t i = 0; i < n; ++i) {
      double expected = probs.value(i) - (i == label ? 1.0 : 0.0);
      CHECK(logits.grad()[i] == Catch::Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("conv2d_3x3 basics") {
  // zero kernels and bias: output all zero
  Tensor in = Tensor::from_values({2, 2, 1}, {1.0, 2.0, 3.0, 4.0});
  Tensor zk = Tensor::zeros({3, 3, 1, 1});
  Tensor zb = Tensor::zeros({1});
  Tensor out = tclsta::conv2d_3x3(in, zk, zb);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.value(i) == 0.0);

  // identity kernel (single center tap) reproduces the input
  std::vector<double> ident(9, 0.0);
  ident[4] = 1.0;  // center of the 3x3 window
  Tensor ik = Tensor::from_values({3, 3, 1, 1}, ident);
  Tensor same = tclsta::conv2d_3x3(in, ik, zb);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(same.value(i) == in.value(i));
}

TEST_CASE("conv2d_3x3 matches the brute-force oracle") {
  tclsta::Rng rng(303);
  for (auto [h, w, cin, cout] : {std::array<std::size_t, 4>{4, 4, 2, 3},
                                 std::array<std::size_t, 4>{8, 8, 4, 4},
                                 std::array<std::size_t, 4>{3, 5, 1, 2}}) {
    Tensor in = random_tensor(rng, {h, w, cin});
    Tensor ker = random_tensor(rng, {3, 3, cin, cout});
    Tensor bias = random_tensor(rng, {cout});
    Tensor out = tclsta::conv2d_3x3(in, ker, bias);
    auto ref = oracle::conv3x3(in.values(), ker.values(), bias.values(), h, w, cin, cout);
    REQUIRE(out.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(out.value(i) == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("conv2d_3x3 rejects mismatched shapes") {
  Tensor in = Tensor::zeros({2, 2, 3});
  CHECK_THROWS_MATCHES(
      tclsta::conv2d_3x3(in, Tensor::zeros({3, 3, 2, 1}), Tensor::zeros({1})), tclsta::Error,
      Catch::Matchers::Predicate<tclsta::Error>(
          [](const tclsta::Error& e) { return e.category() == "shape-mismatch"; }));
  CHECK_THROWS_MATCHES(
      tclsta::conv2d_3x3(in, Tensor::zeros({3, 3, 3, 2}), Tensor::zeros({5})), tclsta::Error,
      Catch::Matchers::Predicate<tclsta::Error>(
          [](const tclsta::Error& e) { return e.category() == "shape-mismatch"; }));
}

TEST_CASE("matmul matches oracle and rejects bad inner dims") {
  tclsta::Rng rng(404);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {4, 5});
  Tensor c = tclsta::matmul(a, b);
  auto ref = oracle::matmul(a.values(), b.values(), 3, 4, 5);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.value(i) == Catch::Approx(ref[i]).margin(1e-12));

  CHECK_THROWS_MATCHES(tclsta::matmul(a, Tensor::zeros({3, 2})), tclsta::Error,
                       Catch::Matchers::Predicate<tclsta::Error>(
                           [](const tclsta::Error& e) { return e.category() == "shape-mismatch"; }));
}

TEST_CASE("reductions and reshaping agree with direct sums") {
  tclsta::Rng rng(505);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor cols = tclsta::sum_axis(a, 0);
  Tensor rows = tclsta::sum_axis(a, 1);
  for (std::size_t j = 0; j < 4; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 3; ++i) acc += a.value(i * 4 + j);
    CHECK(cols.value(j) == acc);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 4; ++j) acc += a.value(i * 4 + j);
    CHECK(rows.value(i) == acc);
  }

  Tensor grid = random_tensor(rng, {2, 2, 3});
  Tensor pooled = tclsta::avg_pool_spatial(grid);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (std::size_t cell = 0; cell < 4; ++cell) acc += grid.value(cell * 3 + ch);
    CHECK(pooled.value(ch) == Catch::Approx(acc / 4.0).margin(1e-15));
  }

  Tensor flat = tclsta::reshape(grid, {12});
  CHECK(flat.shape() == tclsta::Shape{12});
  for (std::size_t i = 0; i < 12; ++i) CHECK(flat.value(i) == grid.value(i));
  CHECK_THROWS_AS(tclsta::reshape(grid, {5}), tclsta::Error);
}

TEST_CASE("transpose, stack_cols, slice_col, concat round trips") {
  tclsta::Rng rng(606);
  Tensor a = random_tensor(rng, {3, 5});
  Tensor at = tclsta::transpose(a);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(at.value(j * 3 + i) == a.value(i * 5 + j));

  std::vector<Tensor> cols;
  for (int t = 0; t < 4; ++t) cols.push_back(random_tensor(rng, {3}));
  Tensor stacked = tclsta::stack_cols(cols);
  REQUIRE(stacked.shape() == tclsta::Shape{3, 4});
  for (std::size_t t = 0; t < 4; ++t) {
    Tensor back = tclsta::slice_col(stacked, t);
    for (std::size_t i = 0; i < 3; ++i) CHECK(back.value(i) == cols[t].value(i));
  }

  Tensor joined = tclsta::concat({cols[0], cols[1]});
  REQUIRE(joined.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(joined.value(i) == cols[0].value(i));
    CHECK(joined.value(3 + i) == cols[1].value(i));
  }
}

TEST_CASE("finite_diff_check on simple functions") {
  tclsta::Rng rng(707);

  // sum of squares: analytic gradient is 2x
  Tensor x = random_tensor(rng, {6}, 2.0);
  double err = tclsta::finite_diff_check(
      [](const Tensor& t) { return tclsta::sum(tclsta::mul(t, t)); }, x, 1e-6);
  CHECK(err <= 1e-8);

  // cross entropy of softmax at random logits
  Tensor logits = random_tensor(rng, {5}, 3.0);
  err = tclsta::finite_diff_check(
      [](const Tensor& t) { return tclsta::cross_entropy(tclsta::softmax(t), 2); }, logits, 1e-6);
  CHECK(err <= 1e-6);

  // constant function: zero everywhere
  err = tclsta::finite_diff_check([](const Tensor&) { return Tensor::scalar(3.5); }, x, 1e-6);
  CHECK(err == 0.0);

  // non-finite value surfaces as a category
  CHECK_THROWS_MATCHES(
      tclsta::finite_diff_check(
          [](const Tensor& t) { return tclsta::exp(tclsta::mul_scalar(tclsta::sum(t), 1e6)); },
          Tensor::from_values({2}, {500.0, 500.0}), 1e-6),
      tclsta::Error, Catch::Matchers::Predicate<tclsta::Error>([](const tclsta::Error& e) {
        return e.category() == "nonfinite-function";
      }));

  CHECK_THROWS_AS(tclsta::finite_diff_check(
                      [](const Tensor& t) { return tclsta::sum(t); }, x, 0.0),
                  tclsta::Error);
}

TEST_CASE("every differentiable op passes a finite-difference spot check") {
  // a random linear functional turns vector-valued ops into scalars
  tclsta::Rng rng(808);
  const double eps = 1e-5;
  const double tol = 1e-4;

  auto probe_with = [&](const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    double err = tclsta::finite_diff_check(f, x, eps);
    CHECK(err <= tol);
  };

  for (int seed = 0; seed < 5; ++seed) {
    tclsta::Rng local(900 + seed);
    Tensor v = random_tensor(local, {5}, 1.5);
    Tensor v2 = random_tensor(local, {5}, 1.5);
    Tensor m = random_tensor(local, {3, 4}, 1.0);
    Tensor m2 = random_tensor(local, {4, 2}, 1.0);
    Tensor grid = random_tensor(local, {3, 3, 2}, 1.0);
    Tensor ker = random_tensor(local, {3, 3, 2, 2}, 0.5);
    Tensor bias = random_tensor(local, {2}, 0.5);
    Tensor weigh = random_tensor(local, {5}, 1.0);

    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::add(t, v2)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::sub(v2, t)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::mul(t, v2)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::mul_scalar(t, -1.7)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::add_scalar(t, 2.3)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::tanh(t)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::sigmoid(t)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::exp(t)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::mul(tclsta::softmax(t), weigh)); }, v);
    probe_with([&](const Tensor& t) { return tclsta::mean(t); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::matmul(t, m2)); }, m);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::matmul(m, tclsta::transpose(t))); },
               random_tensor(local, {2, 4}, 1.0));
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::matvec(m, t)); },
               random_tensor(local, {4}, 1.0));
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::sum_axis(t, 0)); }, m);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::sum_axis(t, 1)); }, m);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::avg_pool_spatial(t)); }, grid);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::conv2d_3x3(t, ker, bias)); }, grid);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::conv2d_3x3(grid, t, bias)); }, ker);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::conv2d_3x3(grid, ker, t)); }, bias);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::concat({t, v2})); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::add_n({t, v2, t})); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::stack_cols({t, v2})); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::slice_col(t, 1)); }, m);
    probe_with([&](const Tensor& t) { return tclsta::element(t, 3); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::scale(t, Tensor::scalar(1.3, true))); }, v);
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::scale(v2, tclsta::element(t, 0))); }, v);
    probe_with(
        [&](const Tensor& t) { return tclsta::sum(tclsta::add_col_broadcast(m, tclsta::matvec(t, v2))); },
        random_tensor(local, {3, 5}, 1.0));
    probe_with([&](const Tensor& t) { return tclsta::sum(tclsta::reshape(t, {12})); }, m);
    probe_with([&](const Tensor& t) { return tclsta::cross_entropy(tclsta::softmax(t), 1); }, v);
  }
}

TEST_CASE("backward accumulates through shared sub-expressions") {
  // y = (x * x) summed twice through different paths; d/dx = 4x
  Tensor x = Tensor::from_values({3}, {1.0, -2.0, 0.5}, true);
  Tensor sq = tclsta::mul(x, x);
  Tensor y = tclsta::add(tclsta::sum(sq), tclsta::sum(sq));
  y.backward();
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(x.grad()[i] == Catch::Approx(4.0 * x.value(i)).margin(1e-12));
}

TEST_CASE("identical graphs give bit-identical values and gradients") {
  auto build = [] {
    tclsta::Rng rng(909);
    Tensor a = random_tensor(rng, {4, 4}, 1.0, true);
    Tensor b = random_tensor(rng, {4, 4}, 1.0, true);
    Tensor y = tclsta::sum(tclsta::tanh(tclsta::matmul(a, b)));
    y.backward();
    return std::make_tuple(y.scalar_value(), a.grad(), b.grad());
  };
  auto [y1, ga1, gb1] = build();
  auto [y2, ga2, gb2] = build();
  CHECK(y1 == y2);
  CHECK(ga1 == ga2);
  CHECK(gb1 == gb2);
}
