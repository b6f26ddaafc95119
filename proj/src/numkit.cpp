#include "idistill/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idistill/errors.hpp"

namespace idistill::numkit {

namespace {

void check_scores(std::span<const double> scores) {
  if (scores.empty()) {
    throw InvalidArgument("score vector must be non-empty");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw InvalidArgument("score vector contains a non-finite value");
    }
  }
}

void check_permutation(const Permutation& pi, std::size_t k) {
  if (pi.size() != k) {
    throw InvalidArgument("permutation length does not match score length");
  }
  if (!pi.is_valid()) {
    throw InvalidArgument("order is not a permutation of 1..k");
  }
}

double log_sum_exp(std::span<const double> xs) {
  double hi = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace

Permutation Permutation::identity(std::size_t k) {
  Permutation pi;
  pi.order.resize(k);
  std::iota(pi.order.begin(), pi.order.end(), 1);
  return pi;
}

bool Permutation::is_valid() const {
  if (order.empty()) return false;
  std::vector<bool> seen(order.size(), false);
  for (int idx : order) {
    if (idx < 1 || static_cast<std::size_t>(idx) > order.size()) return false;
    if (seen[idx - 1]) return false;
    seen[idx - 1] = true;
  }
  return true;
}

Distribution softmax_temp(std::span<const double> scores, double theta) {
  check_scores(scores);
  if (!(theta > 0.0)) {
    throw InvalidArgument("softmax temperature must be positive");
  }
  double hi = *std::max_element(scores.begin(), scores.end());
  Distribution out;
  out.probs.resize(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.probs[i] = std::exp((scores[i] - hi) / theta);
    z += out.probs[i];
  }
  for (double& p : out.probs) p /= z;
  return out;
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) {
    throw InvalidArgument("KL divergence requires equal-length distributions");
  }
  if (p.size() == 0) {
    throw InvalidArgument("KL divergence of empty distributions");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) continue;
    if (q.probs[i] <= 0.0) {
      throw InvalidArgument("KL divergence undefined: q[i] = 0 with p[i] > 0");
    }
    acc += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
  }
  return acc;
}

double listmle_loss(std::span<const double> scores, const Permutation& pi) {
  check_scores(scores);
  check_permutation(pi, scores.size());
  const std::size_t k = scores.size();
  // Reorder scores by the target permutation, then sum suffix log-partitions.
  std::vector<double> ordered(k);
  for (std::size_t j = 0; j < k; ++j) ordered[j] = scores[pi.order[j] - 1];
  double loss = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::span<const double> suffix(ordered.data() + j, k - j);
    loss += log_sum_exp(suffix) - ordered[j];
  }
  return loss;
}

std::vector<double> listmle_grad(std::span<const double> scores,
                                 const Permutation& pi) {
  check_scores(scores);
  check_permutation(pi, scores.size());
  const std::size_t k = scores.size();
  std::vector<double> ordered(k);
  for (std::size_t j = 0; j < k; ++j) ordered[j] = scores[pi.order[j] - 1];
  std::vector<double> grad(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::span<const double> suffix(ordered.data() + j, k - j);
    double lse = log_sum_exp(suffix);
    for (std::size_t m = j; m < k; ++m) {
      grad[pi.order[m] - 1] += std::exp(ordered[m] - lse);
    }
    grad[pi.order[j] - 1] -= 1.0;
  }
  return grad;
}

std::vector<double> kl_grad_wrt_q_scores(const Distribution& p,
                                         std::span<const double> q_scores,
                                         double theta) {
  Distribution q = softmax_temp(q_scores, theta);
  if (p.size() != q.size()) {
    throw InvalidArgument("p length does not match q_scores length");
  }
  std::vector<double> grad(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    grad[i] = (q.probs[i] - p.probs[i]) / theta;
  }
  return grad;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidArgument("adam_step shape mismatch");
  }
  if (!(cfg.lr > 0.0)) {
    throw InvalidArgument("adam learning rate must be positive");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double finite_diff_check(const LossFn& loss_fn, std::span<const double> point,
                         std::span<const double> analytic, double h) {
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss_fn(x);
    x[i] = keep - h;
    const double dn = loss_fn(x);
    x[i] = keep;
    const double numeric = (up - dn) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(analytic[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace idistill::numkit
