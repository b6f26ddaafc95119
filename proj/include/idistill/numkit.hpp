#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace idistill::numkit {

/// 1-based candidate indices forming a bijection on {1..k}.
struct Permutation {
  std::vector<int> order;

  static Permutation identity(std::size_t k);
  std::size_t size() const { return order.size(); }
  bool is_valid() const;
};

/// Probabilities over k candidates; sums to 1 within 1e-9.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
};

/// Temperature softmax with max-subtraction. theta > 0, scores finite.
Distribution softmax_temp(std::span<const double> scores, double theta);

/// KL(p || q) in nats, with the 0*ln(0) = 0 convention.
double kl_divergence(const Distribution& p, const Distribution& q);

/// Plackett-Luce negative log-likelihood of observing order pi under scores.
double listmle_loss(std::span<const double> scores, const Permutation& pi);

/// Analytic gradient of listmle_loss with respect to scores.
std::vector<double> listmle_grad(std::span<const double> scores,
                                 const Permutation& pi);

/// Gradient of KL(p || softmax_temp(q_scores, theta)) with respect to
/// q_scores, p held fixed: (q - p) / theta.
std::vector<double> kl_grad_wrt_q_scores(const Distribution& p,
                                         std::span<const double> q_scores,
                                         double theta);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update in place; increments state.step.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamConfig& cfg);

using LossFn = std::function<double(std::span<const double>)>;

/// Central-difference check of an analytic gradient. Returns the max over
/// components of |analytic - numeric| / max(1e-8, |analytic|).
double finite_diff_check(const LossFn& loss_fn, std::span<const double> point,
                         std::span<const double> analytic, double h);

}  // namespace idistill::numkit
