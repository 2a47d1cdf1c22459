#include "tvt/dcm.hpp"
#include "tvt/grad_check.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace tvt;

namespace {

Tensor random_prob_rows(int n, int k, std::mt19937_64& rng) {
  Tensor out(Shape{n, k});
  std::exponential_distribution<double> dist(1.0);
  auto m = out.matrix();
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
      m(i, c) = dist(rng);
      total += m(i, c);
    }
    for (int c = 0; c < k; ++c) m(i, c) /= total;
  }
  return out;
}

}  // namespace

TEST_CASE("identical rows carry no information") {
  const Tensor batch = Tensor::from_rows({{0.7, 0.2, 0.1},
                                          {0.7, 0.2, 0.1},
                                          {0.7, 0.2, 0.1}});
  CHECK(std::abs(mutual_information(batch)) <= 1e-12);

  const Tensor uniform = Tensor::full({5, 4}, 0.25);
  CHECK(std::abs(mutual_information(uniform)) <= 1e-12);
}

TEST_CASE("one-hot rows over all classes reach ln K") {
  const Tensor batch = Tensor::from_rows({{1.0, 0.0, 0.0, 0.0},
                                          {0.0, 1.0, 0.0, 0.0},
                                          {0.0, 0.0, 1.0, 0.0},
                                          {0.0, 0.0, 0.0, 1.0}});
  CHECK(std::abs(mutual_information(batch) - std::log(4.0)) <= 1e-12);
}

TEST_CASE("two-row reference value") {
  const Tensor batch = Tensor::from_rows({{0.9, 0.1}, {0.1, 0.9}});
  CHECK(mutual_information(batch) == doctest::Approx(0.3680642071684971).epsilon(1e-12));
}

TEST_CASE("information is bounded by [0, ln K]") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int k = 2 + static_cast<int>(rng() % 5);
    const Tensor batch = random_prob_rows(n, k, rng);
    const double info = mutual_information(batch);
    CHECK(info >= -1e-9);
    CHECK(info <= std::log(static_cast<double>(k)) + 1e-9);
  }
}

TEST_CASE("column permutation leaves the value bit-identical") {
  std::mt19937_64 rng(123);
  const int k = 5;
  const Tensor batch = random_prob_rows(7, k, rng);

  std::vector<int> perm{3, 0, 4, 1, 2};
  Tensor shuffled(Shape{7, k});
  for (int i = 0; i < 7; ++i) {
    for (int c = 0; c < k; ++c) {
      shuffled.matrix()(i, perm[static_cast<size_t>(c)]) = batch.matrix()(i, c);
    }
  }
  CHECK(mutual_information(batch) == mutual_information(shuffled));
}

TEST_CASE("invalid rows are rejected") {
  CHECK_THROWS_AS(mutual_information(Tensor(Shape{0, 3})), ValueError);
  CHECK_THROWS_AS(mutual_information(Tensor::from_rows({{0.5, 0.6}})), ValueError);
  CHECK_THROWS_AS(mutual_information(Tensor::from_rows({{1.2, -0.2}})), ValueError);
}

TEST_CASE("tape route matches the plain evaluation") {
  std::mt19937_64 rng(7);
  const Tensor batch = random_prob_rows(6, 4, rng);

  Tape tape;
  Var value = mutual_information(tape.constant(batch));
  CHECK(value.scalar_value() == doctest::Approx(mutual_information(batch)).epsilon(1e-12));
}

TEST_CASE("uniform rows from zero logits carry no information") {
  Tape tape;
  Var logits = tape.constant(Tensor(Shape{3, 4}));
  Var info = mutual_information(softmax_rows(logits));
  CHECK(std::abs(info.scalar_value()) <= 1e-12);
}

TEST_CASE("sharpening logits shrinks the mean row entropy") {
  const Tensor logits = Tensor::from_rows({{1.0, 0.2, -0.5}, {-1.0, 0.4, 0.3}});

  auto mean_row_entropy = [&](double temperature) {
    Tape tape;
    Var scaled = scale(tape.constant(logits), temperature);
    Var probs = softmax_rows(scaled);
    Var neg_h = scale(sum(xlogx(probs)), 1.0 / static_cast<double>(logits.rows()));
    return -neg_h.scalar_value();
  };

  CHECK(mean_row_entropy(4.0) < mean_row_entropy(1.0));
  CHECK(mean_row_entropy(1.0) < mean_row_entropy(0.25));
}

TEST_CASE("gradient of the weighted objective matches finite differences") {
  ParameterStore params;
  std::mt19937_64 rng(11);
  Tensor init(Shape{4, 3});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Index i = 0; i < init.size(); ++i) init.values()(i) = dist(rng);
  Parameter& logits = params.create("logits", init);

  auto objective = [&](Tape& tape, GradCheckReplay*) {
    Var probs = softmax_rows(tape.leaf(logits));
    return scale(mutual_information(probs), -0.1);
  };

  GradCheckOptions options;
  options.tolerance = 1e-5;
  options.samples = 12;
  const GradCheckReport report = check_gradients(params, objective, options);
  CHECK(report.ok);
  CHECK(report.max_rel_error <= 1e-5);
}
