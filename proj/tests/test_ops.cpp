#include "tvt/ops.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace tvt;
using doctest::Approx;

namespace {
Var cvar(Tape& t, Tensor v) { return t.constant(std::move(v)); }
}  // namespace

TEST_CASE("softmax rows match the reference values and sum to one") {
  Tape t;
  Var p = softmax_rows(cvar(t, Tensor::from_rows({{1, 2, 3}, {3, 2, 1}})));
  const auto m = p.tensor().matrix();
  CHECK(m(0, 0) == Approx(0.09003057317038046).epsilon(1e-14));
  CHECK(m(0, 1) == Approx(0.24472847105479764).epsilon(1e-14));
  CHECK(m(0, 2) == Approx(0.6652409557748219).epsilon(1e-14));
  // mirrored logits give mirrored probabilities
  CHECK(m(1, 2) == Approx(m(0, 0)).epsilon(1e-15));
  CHECK(m.row(0).sum() == Approx(1.0).epsilon(1e-12));
  CHECK(m.row(1).sum() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and stable for large logits") {
  Tape t;
  Var a = softmax_rows(cvar(t, Tensor::from_rows({{1001, 1002, 1003}})));
  CHECK(a.tensor().matrix()(0, 0) == Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(a.tensor().all_finite());
}

TEST_CASE("softmax of equal logits is exactly uniform") {
  Tape t;
  Var p = softmax_rows(cvar(t, Tensor::row_vector({0, 0, 0, 0})));
  for (Index i = 0; i < 4; ++i) CHECK(p.tensor().values()(i) == 0.25);
}

TEST_CASE("cross entropy with logits matches the reference value") {
  Tape t;
  Var ce = cross_entropy_with_logits(cvar(t, Tensor::from_rows({{1, 2, 3}})), {2});
  CHECK(ce.scalar_value() == Approx(0.4076059644443803).epsilon(1e-14));

  Var uniform = cross_entropy_with_logits(cvar(t, Tensor::from_rows({{0, 0}})), {1});
  CHECK(uniform.scalar_value() == Approx(std::log(2.0)).epsilon(1e-15));

  Var confident = cross_entropy_with_logits(cvar(t, Tensor::from_rows({{30, -30}})), {0});
  CHECK(confident.scalar_value() == Approx(0.0).epsilon(1e-9));

  Var ce2 = cross_entropy_with_logits(cvar(t, Tensor::from_rows({{1, 2, 3}, {1, 2, 3}})), {2, 2});
  CHECK(ce2.scalar_value() == Approx(0.4076059644443803).epsilon(1e-14));

  CHECK_THROWS_AS(cross_entropy_with_logits(cvar(t, Tensor::from_rows({{1, 2}})), {2}),
                  IndexError);
  CHECK_THROWS_AS(cross_entropy_with_logits(cvar(t, Tensor::from_rows({{1, 2}})), {0, 1}),
                  ShapeError);
}

TEST_CASE("binary cross entropy matches the reference values") {
  Tape t;
  Var b1 = binary_cross_entropy(cvar(t, Tensor::row_vector({0.9, 0.5})),
                                Tensor::row_vector({1, 0}));
  CHECK(b1.scalar_value() == Approx(0.3992538481088858).epsilon(1e-14));

  Var b2 = binary_cross_entropy(cvar(t, Tensor::row_vector({0.8, 0.8, 0.4, 0.4})),
                                Tensor::row_vector({1, 1, 0, 0}));
  CHECK(b2.scalar_value() == Approx(0.3669845875401002).epsilon(1e-14));

  // extreme probabilities are clamped, so the loss stays finite
  Var b3 = binary_cross_entropy(cvar(t, Tensor::row_vector({0.0, 1.0})),
                                Tensor::row_vector({1, 0}));
  CHECK(b3.tensor().all_finite());
  CHECK(b3.scalar_value() == Approx(-std::log(1e-7)).epsilon(1e-10));

  CHECK_THROWS_AS(binary_cross_entropy(cvar(t, Tensor::row_vector({0.5})),
                                       Tensor::row_vector({1.5})),
                  ValueError);
  CHECK_THROWS_AS(binary_cross_entropy(cvar(t, Tensor::row_vector({0.5})),
                                       Tensor::row_vector({1, 0})),
                  ShapeError);
}

TEST_CASE("entropy matches the reference values and validates input") {
  CHECK(entropy({0.25, 0.25, 0.25, 0.25}, 2.0) == 2.0);
  CHECK(entropy({0.9, 0.1}, std::exp(1.0)) == Approx(0.32508297339144826).epsilon(1e-14));
  CHECK(entropy({1.0, 0.0}, 2.0) == 0.0);
  CHECK_THROWS_AS(entropy({0.5, 0.6}, 2.0), ValueError);
  CHECK_THROWS_AS(entropy({-0.1, 1.1}, 2.0), ValueError);
  CHECK_THROWS_AS(entropy({}, 2.0), ValueError);
  CHECK_THROWS_AS(entropy({1.0}, 1.0), ValueError);
}

TEST_CASE("entropy stays within its bound and peaks at uniform") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + static_cast<size_t>(trial % 5);
    std::vector<double> p(n);
    double s = 0;
    for (auto& v : p) s += (v = -std::log(unif(rng)));
    for (auto& v : p) v /= s;
    const double h = entropy(p, 2.0);
    CHECK(h >= -1e-9);
    CHECK(h <= std::log2(static_cast<double>(n)) + 1e-9);
  }
  CHECK(entropy({0.2, 0.2, 0.2, 0.2, 0.2}, 2.0) == Approx(std::log2(5.0)).epsilon(1e-12));
}

TEST_CASE("entropy is bit-identical under permutation") {
  const std::vector<double> p{0.05, 0.1, 0.15, 0.2, 0.22, 0.28};
  const std::vector<double> q{0.28, 0.15, 0.05, 0.22, 0.1, 0.2};
  CHECK(entropy(p, 2.0) == entropy(q, 2.0));
  CHECK(entropy(p, std::exp(1.0)) == entropy(q, std::exp(1.0)));
}

TEST_CASE("binary entropy endpoints, midpoint, and reference value") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == 1.0);
  CHECK(binary_entropy(0.3) == Approx(0.8812908992306926).epsilon(1e-14));
  CHECK(binary_entropy(0.3) == binary_entropy(0.7));
  CHECK_THROWS_AS(binary_entropy(-0.01), ValueError);
  CHECK_THROWS_AS(binary_entropy(1.01), ValueError);
}

TEST_CASE("gelu matches the reference values") {
  Tape t;
  Var y = gelu(cvar(t, Tensor::row_vector({1.0, -1.0, 0.5, 0.0})));
  const auto& v = y.tensor().values();
  CHECK(v(0) == Approx(0.8411919906082767).epsilon(1e-14));
  CHECK(v(1) == Approx(-0.1588080093917233).epsilon(1e-14));
  CHECK(v(2) == Approx(0.34571400982514394).epsilon(1e-14));
  CHECK(v(3) == 0.0);
}

TEST_CASE("layer norm normalizes each row and applies gain and bias") {
  Tape t;
  Var x = cvar(t, Tensor::from_rows({{1, 2, 3, 4}, {10, 10, 10, 10}}));
  Var g = cvar(t, Tensor::row_vector({1, 1, 1, 1}));
  Var b = cvar(t, Tensor::row_vector({0, 0, 0, 0}));
  Var y = layer_norm(x, g, b);
  const auto m = y.tensor().matrix();
  CHECK(m(0, 0) == Approx(-1.3416402498438813).epsilon(1e-12));
  CHECK(m(0, 1) == Approx(-0.44721341661462705).epsilon(1e-12));
  CHECK(m(0, 2) == Approx(0.44721341661462705).epsilon(1e-12));
  CHECK(m(0, 3) == Approx(1.3416402498438813).epsilon(1e-12));
  // constant rows collapse to zero rather than dividing by zero
  CHECK(m.row(1).cwiseAbs().maxCoeff() == Approx(0.0).epsilon(1e-9));

  Var g2 = cvar(t, Tensor::row_vector({2, 2, 2, 2}));
  Var b2 = cvar(t, Tensor::row_vector({1, 1, 1, 1}));
  Var y2 = layer_norm(x, g2, b2);
  CHECK(y2.tensor().matrix()(0, 3) == Approx(2 * 1.3416402498438813 + 1).epsilon(1e-12));

  Var small = layer_norm(cvar(t, Tensor::from_rows({{0, 2}})),
                         cvar(t, Tensor::row_vector({2, 2})),
                         cvar(t, Tensor::row_vector({1, 1})));
  CHECK(small.tensor().matrix()(0, 0) == Approx(-1.0).epsilon(1e-5));
  CHECK(small.tensor().matrix()(0, 1) == Approx(3.0).epsilon(1e-5));

  CHECK_THROWS_AS(layer_norm(x, cvar(t, Tensor::row_vector({1, 1})), b), ShapeError);
}

TEST_CASE("sigmoid matches the reference value and is stable at extremes") {
  Tape t;
  Var y = sigmoid(cvar(t, Tensor::row_vector({0.7, 0.0, 800.0, -800.0})));
  const auto& v = y.tensor().values();
  CHECK(v(0) == Approx(0.6681877721681662).epsilon(1e-14));
  CHECK(v(1) == 0.5);
  CHECK(v(2) == Approx(1.0).epsilon(1e-12));
  CHECK(v(3) == Approx(0.0).epsilon(1e-12));
  CHECK(y.tensor().all_finite());
}

TEST_CASE("matmul, transpose, and shape validation") {
  Tape t;
  Var a = cvar(t, Tensor::from_rows({{1, 2}, {3, 4}}));
  Var b = cvar(t, Tensor::from_rows({{5, 6}, {7, 8}}));
  Var c = matmul(a, b);
  CHECK(c.tensor().matrix()(0, 0) == 19);
  CHECK(c.tensor().matrix()(1, 1) == 50);
  Var at = transpose(a);
  CHECK(at.tensor().matrix()(0, 1) == 3);
  CHECK_THROWS_AS(matmul(a, cvar(t, Tensor::from_rows({{1, 2, 3}}))), ShapeError);
}

TEST_CASE("elementwise ops validate shapes") {
  Tape t;
  Var a = cvar(t, Tensor::row_vector({1, 2}));
  Var b = cvar(t, Tensor::row_vector({3, 4, 5}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(hadamard(a, b), ShapeError);
  CHECK(add(a, a).tensor().values()(1) == 4);
  CHECK(sub(a, a).tensor().values()(1) == 0);
  CHECK(hadamard(a, a).tensor().values()(1) == 4);
  CHECK(scale(a, -2.0).tensor().values()(0) == -2);
}

TEST_CASE("ops from different tapes are rejected") {
  Tape t1, t2;
  Var a = cvar(t1, Tensor::row_vector({1}));
  Var b = cvar(t2, Tensor::row_vector({1}));
  CHECK_THROWS_AS(add(a, b), ValueError);
}

TEST_CASE("concat and slice are mutually inverse") {
  Tape t;
  Var a = cvar(t, Tensor::from_rows({{1, 2}, {3, 4}}));
  Var b = cvar(t, Tensor::from_rows({{5, 6}}));
  Var cat = concat_rows({a, b});
  CHECK(cat.rows() == 3);
  CHECK(cat.tensor().matrix()(2, 1) == 6);
  Var back = slice_rows(cat, 2, 1);
  CHECK(back.tensor().matrix()(0, 0) == 5);

  Var side = concat_cols({a, transpose(b)});
  CHECK(side.cols() == 3);
  CHECK(side.tensor().matrix()(1, 2) == 6);
  Var col = slice_cols(side, 2, 1);
  CHECK(col.tensor().matrix()(0, 0) == 5);

  CHECK_THROWS_AS(slice_rows(a, 1, 2), IndexError);
  CHECK_THROWS_AS(slice_cols(a, -1, 1), IndexError);
  CHECK_THROWS_AS(concat_rows({a, transpose(b)}), ShapeError);
}

TEST_CASE("add_rowvec broadcasts across rows") {
  Tape t;
  Var x = cvar(t, Tensor::from_rows({{1, 2}, {3, 4}}));
  Var b = cvar(t, Tensor::row_vector({10, 20}));
  Var y = add_rowvec(x, b);
  CHECK(y.tensor().matrix()(0, 0) == 11);
  CHECK(y.tensor().matrix()(1, 1) == 24);
  CHECK_THROWS_AS(add_rowvec(x, cvar(t, Tensor::row_vector({1, 2, 3}))), ShapeError);
}

TEST_CASE("clamp pins values outside the interval") {
  Tape t;
  Var y = clamp(cvar(t, Tensor::row_vector({-1, 0.5, 2})), 0.0, 1.0);
  CHECK(y.tensor().values()(0) == 0.0);
  CHECK(y.tensor().values()(1) == 0.5);
  CHECK(y.tensor().values()(2) == 1.0);
  CHECK_THROWS_AS(clamp(y, 1.0, 0.0), ValueError);
}

TEST_CASE("log and xlogx validate their domains") {
  Tape t;
  CHECK_THROWS_AS(log(cvar(t, Tensor::row_vector({0.0}))), ValueError);
  CHECK_THROWS_AS(log(cvar(t, Tensor::row_vector({-1.0}))), ValueError);
  CHECK_THROWS_AS(xlogx(cvar(t, Tensor::row_vector({-0.1}))), ValueError);
  Var y = xlogx(cvar(t, Tensor::row_vector({0.0, 1.0, 0.5})));
  CHECK(y.tensor().values()(0) == 0.0);  // 0*log(0) convention
  CHECK(y.tensor().values()(1) == 0.0);
  CHECK(y.tensor().values()(2) == Approx(0.5 * std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("sum and mean reduce to scalars") {
  Tape t;
  Var a = cvar(t, Tensor::from_rows({{1, 2}, {3, 4}}));
  CHECK(sum(a).scalar_value() == 10.0);
  CHECK(mean(a).scalar_value() == 2.5);
}

TEST_CASE("gradient reversal is the identity in the forward pass") {
  Tape t;
  Var x = cvar(t, Tensor::row_vector({1.5, -2.0}));
  Var y = grl(x, 0.7);
  CHECK(y.tensor().values()(0) == 1.5);
  CHECK(y.tensor().values()(1) == -2.0);
}

TEST_CASE("replay slots freeze values across fetch passes") {
  GradCheckReplay replay;
  Tensor first = Tensor::row_vector({1, 2});
  const Tensor& stored = replay.store_or_fetch("slot", first);
  CHECK(stored.values()(0) == 1.0);
  CHECK_THROWS_AS(replay.store_or_fetch("slot", first), ValueError);
  replay.start_fetching();
  Tensor second = Tensor::row_vector({9, 9});
  CHECK(replay.store_or_fetch("slot", second).values()(0) == 1.0);
  CHECK_THROWS_AS(replay.store_or_fetch("other", second), ValueError);
  CHECK_THROWS_AS(replay.store_or_fetch("slot", Tensor::row_vector({1})), ShapeError);
}
