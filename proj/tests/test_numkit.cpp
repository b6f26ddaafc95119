#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "idistill/errors.hpp"
#include "idistill/numkit.hpp"

using namespace idistill;
using namespace idistill::numkit;

namespace {

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t k,
                                  double scale = 2.0) {
  std::vector<double> out(k);
  for (double& x : out) {
    x = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 2.0 * scale;
  }
  return out;
}

Permutation random_permutation(std::mt19937_64& rng, std::size_t k) {
  Permutation pi = Permutation::identity(k);
  for (std::size_t i = k; i > 1; --i) {
    std::swap(pi.order[i - 1], pi.order[rng() % i]);
  }
  return pi;
}

}  // namespace

TEST_CASE("softmax_temp closed forms") {
  const std::vector<double> equal{1.0, 1.0, 1.0};
  auto d = softmax_temp(equal, 1.0);
  for (double p : d.probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));

  const std::vector<double> a{2.0, 4.0};
  const std::vector<double> b{1.0, 2.0};
  auto da = softmax_temp(a, 2.0);
  auto db = softmax_temp(b, 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(da.probs[i] == doctest::Approx(db.probs[i]).epsilon(1e-12));
  }

  const std::vector<double> ln3{0.0, std::log(3.0)};
  auto d3 = softmax_temp(ln3, 1.0);
  CHECK(d3.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d3.probs[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_temp rejects bad input") {
  const std::vector<double> s{1.0, 2.0};
  CHECK_THROWS_AS(softmax_temp(s, 0.0), InvalidArgument);
  CHECK_THROWS_AS(softmax_temp(s, -1.0), InvalidArgument);
  const std::vector<double> nan{1.0, std::nan("")};
  CHECK_THROWS_AS(softmax_temp(nan, 1.0), InvalidArgument);
  CHECK_THROWS_AS(softmax_temp(std::vector<double>{}, 1.0), InvalidArgument);
}

TEST_CASE("softmax_temp normalization and shift invariance") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 8;
    const auto s = random_scores(rng, k, 10.0);
    const double theta = 0.25 + 3.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    auto d = softmax_temp(s, theta);
    CHECK(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
    auto shifted = s;
    for (double& x : shifted) x += 123.5;
    auto ds = softmax_temp(shifted, theta);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(std::abs(d.probs[i] - ds.probs[i]) < 1e-12);
    }
  }
}

TEST_CASE("softmax_temp argmax is temperature independent") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_scores(rng, 5);
    s[trial % 5] += 10.0;  // unique max
    const auto base = softmax_temp(s, 1.0);
    for (double theta : {0.1, 0.7, 3.0, 50.0}) {
      const auto d = softmax_temp(s, theta);
      const auto argmax = [](const Distribution& dist) {
        return std::max_element(dist.probs.begin(), dist.probs.end()) -
               dist.probs.begin();
      };
      CHECK(argmax(d) == argmax(base));
    }
  }
}

TEST_CASE("kl_divergence closed forms") {
  Distribution half{{0.5, 0.5}};
  CHECK(kl_divergence(half, half) == doctest::Approx(0.0).epsilon(1e-12));
  Distribution q{{0.25, 0.75}};
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(kl_divergence(half, q) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_divergence(half, q) == doctest::Approx(0.14384).epsilon(1e-4));
}

TEST_CASE("kl_divergence is nonnegative and diagnoses bad input") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    auto p = softmax_temp(random_scores(rng, k), 1.0);
    auto q = softmax_temp(random_scores(rng, k), 1.0);
    CHECK(kl_divergence(p, q) >= -1e-12);
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  Distribution p{{0.5, 0.5}};
  Distribution q3{{0.2, 0.3, 0.5}};
  CHECK_THROWS_AS(kl_divergence(p, q3), InvalidArgument);
  Distribution qz{{1.0, 0.0}};
  CHECK_THROWS_AS(kl_divergence(p, qz), InvalidArgument);
  // 0 * ln 0 = 0: zero mass in p tolerates zero mass in q.
  Distribution pz{{1.0, 0.0}};
  CHECK(kl_divergence(pz, qz) == doctest::Approx(0.0));
}

TEST_CASE("listmle_loss constant scores give ln k!") {
  double log_factorial = 0.0;
  for (std::size_t k = 2; k <= 6; ++k) {
    log_factorial = 0.0;
    for (std::size_t j = 2; j <= k; ++j) log_factorial += std::log(double(j));
    std::vector<double> scores(k, 3.7);
    std::mt19937_64 rng(k);
    for (int trial = 0; trial < 5; ++trial) {
      const auto pi = random_permutation(rng, k);
      CHECK(listmle_loss(scores, pi) ==
            doctest::Approx(log_factorial).epsilon(1e-9));
    }
  }
}

TEST_CASE("listmle_loss worked values") {
  const std::vector<double> scores{2.0, 1.0, 0.0};
  Permutation forward{{1, 2, 3}};
  Permutation backward{{3, 2, 1}};
  // Plackett-Luce step probabilities evaluated directly.
  const double e2 = std::exp(2.0), e1 = std::exp(1.0), e0 = 1.0;
  const double fwd = -std::log(e2 / (e2 + e1 + e0)) - std::log(e1 / (e1 + e0));
  const double bwd = -std::log(e0 / (e2 + e1 + e0)) - std::log(e1 / (e1 + e2));
  CHECK(listmle_loss(scores, forward) == doctest::Approx(fwd).epsilon(1e-9));
  CHECK(listmle_loss(scores, backward) == doctest::Approx(bwd).epsilon(1e-9));
  // Five-decimal reference values, good to their printed precision.
  CHECK(listmle_loss(scores, forward) == doctest::Approx(0.72091).epsilon(1e-4));
  CHECK(listmle_loss(scores, backward) == doctest::Approx(3.72091).epsilon(1e-4));
}

TEST_CASE("listmle_loss input validation") {
  const std::vector<double> scores{1.0, 2.0};
  Permutation bad{{1, 1}};
  CHECK_THROWS_AS(listmle_loss(scores, bad), InvalidArgument);
  Permutation wrong_len{{1, 2, 3}};
  CHECK_THROWS_AS(listmle_loss(scores, wrong_len), InvalidArgument);
}

TEST_CASE("listmle_loss is minimized by the descending-sort permutation") {
  std::mt19937_64 rng(17);
  for (std::size_t k = 2; k <= 5; ++k) {
    for (int trial = 0; trial < 10; ++trial) {
      auto scores = random_scores(rng, k);
      // distinct values
      std::vector<double> sorted_copy = scores;
      std::sort(sorted_copy.begin(), sorted_copy.end());
      if (std::adjacent_find(sorted_copy.begin(), sorted_copy.end()) !=
          sorted_copy.end()) {
        continue;
      }
      Permutation best = Permutation::identity(k);
      std::sort(best.order.begin(), best.order.end(), [&](int a, int b) {
        return scores[a - 1] > scores[b - 1];
      });
      const double best_loss = listmle_loss(scores, best);
      Permutation pi = Permutation::identity(k);
      std::sort(pi.order.begin(), pi.order.end());
      do {
        if (pi.order != best.order) {
          CHECK(listmle_loss(scores, pi) > best_loss);
        }
      } while (std::next_permutation(pi.order.begin(), pi.order.end()));
    }
  }
}

TEST_CASE("listmle_grad closed form and finite differences") {
  const std::vector<double> zeros{0.0, 0.0};
  Permutation pi12{{1, 2}};
  const auto g = listmle_grad(zeros, pi12);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 5;
    const auto scores = random_scores(rng, k);
    const auto pi = random_permutation(rng, k);
    const auto analytic = listmle_grad(scores, pi);
    // The top-ranked element's gradient component is always <= 0.
    CHECK(analytic[pi.order[0] - 1] <= 1e-12);
    const double err = finite_diff_check(
        [&](std::span<const double> x) { return listmle_loss(x, pi); },
        scores, analytic, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("kl_grad_wrt_q_scores closed forms and finite differences") {
  const std::vector<double> flat{0.0, 0.0};
  Distribution onehot{{1.0, 0.0}};
  const auto g = kl_grad_wrt_q_scores(onehot, flat, 1.0);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    const auto q_scores = random_scores(rng, k);
    const double theta = 0.5 + 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const auto p = softmax_temp(random_scores(rng, k), 1.0);
    const auto analytic = kl_grad_wrt_q_scores(p, q_scores, theta);
    const double err = finite_diff_check(
        [&](std::span<const double> x) {
          return kl_divergence(p, softmax_temp(x, theta));
        },
        q_scores, analytic, 1e-5);
    CHECK(err < 1e-4);
  }

  // Gradient vanishes at the minimizer p = q.
  const std::vector<double> s{0.3, -0.4, 1.1};
  const auto p = softmax_temp(s, 2.0);
  for (double gi : kl_grad_wrt_q_scores(p, s, 2.0)) {
    CHECK(std::abs(gi) < 1e-12);
  }
}

TEST_CASE("adam_step basics") {
  AdamConfig cfg;
  cfg.lr = 1e-3;

  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> params{1.0, -2.0};
    std::vector<double> grads{0.0, 0.0};
    AdamState state(2);
    adam_step(params, grads, state, cfg);
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);
    CHECK(state.step == 1);
  }

  SUBCASE("unit gradient moves a scalar by about lr") {
    std::vector<double> params{0.0};
    std::vector<double> grads{1.0};
    AdamState state(1);
    adam_step(params, grads, state, cfg);
    CHECK(params[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    const double first_step = -params[0];
    const double before = params[0];
    adam_step(params, grads, state, cfg);
    const double second_step = before - params[0];
    CHECK(second_step == doctest::Approx(first_step).epsilon(1e-6));
  }

  SUBCASE("shape mismatch is rejected") {
    std::vector<double> params{0.0};
    std::vector<double> grads{1.0, 2.0};
    AdamState state(1);
    CHECK_THROWS_AS(adam_step(params, grads, state, cfg), InvalidArgument);
  }
}

TEST_CASE("finite_diff_check on a quadratic") {
  const std::vector<double> x{3.0};
  const std::vector<double> analytic{6.0};
  const double err = finite_diff_check(
      [](std::span<const double> p) { return p[0] * p[0]; }, x, analytic,
      1e-5);
  CHECK(err < 1e-6);
}
