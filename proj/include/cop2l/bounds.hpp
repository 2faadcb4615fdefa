#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cop2l/numerics.hpp"

namespace cop2l {

namespace detail {

inline void check_delta(double delta, const char* who) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error(std::string(who) + ": delta outside (0,1)");
}

inline void check_loss(double loss, const char* who) {
  if (!(loss >= 0.0 && loss <= 1.0))
    throw std::domain_error(std::string(who) + ": loss outside [0,1]");
}

}  // namespace detail

// Risk bound for a predictor reconstructible from a size-c_size compression
// set plus a message of log-probability message_log_prob, evaluated from the
// 0-1 loss on the n - c_size complement points. All terms in log space.
inline double compression_message_bound(std::uint64_t n, std::uint64_t c_size,
                                        double message_log_prob,
                                        double complement_loss, double delta) {
  if (c_size > n || n - c_size < 1)
    throw std::domain_error("compression_message_bound: complement is empty");
  if (!(message_log_prob <= 0.0))
    throw std::domain_error("compression_message_bound: message log-prob must be <= 0");
  detail::check_delta(delta, "compression_message_bound");
  detail::check_loss(complement_loss, "compression_message_bound");
  const double r = static_cast<double>(n - c_size);
  double eps = (std::log(2.0) + 0.5 * std::log(r) + log_binomial(n, c_size) -
                log_zeta_prior(c_size) - message_log_prob - std::log(delta)) /
               r;
  return kl_inverse(complement_loss, eps);
}

// Message-free special case; this is the bound the early-stopping search
// minimizes over checkpoints.
inline double compression_bound(std::uint64_t n, std::uint64_t c_size,
                                double complement_loss, double delta) {
  return compression_message_bound(n, c_size, 0.0, complement_loss, delta);
}

// Log-penalty of the per-task continual certificate: counting cost of both
// compression sets, the removal-task message ((T-1)^j options), and the
// zeta-prior cost of the set sizes and of each task's iteration count.
inline double continual_epsilon(std::uint64_t n_t, std::uint64_t i_size,
                                std::uint64_t j_size, int T,
                                const std::vector<std::uint64_t>& mu2, double delta) {
  if (T < 1) throw std::domain_error("continual_epsilon: T must be >= 1");
  if (i_size + j_size > n_t)
    throw std::domain_error("continual_epsilon: i_size + j_size exceeds n_t");
  if (T == 1 && j_size > 0)
    throw std::domain_error("continual_epsilon: removal messages need T >= 2");
  if (mu2.size() != static_cast<std::size_t>(T))
    throw std::invalid_argument("continual_epsilon: mu2 length must equal T");
  detail::check_delta(delta, "continual_epsilon");
  double eps = std::log(static_cast<double>(T) / delta) + log_binomial(n_t, i_size) +
               log_binomial(n_t - i_size, j_size) +
               static_cast<double>(j_size) * std::log(std::max(T - 1, 1)) -
               log_zeta_prior(i_size) - log_zeta_prior(j_size);
  for (std::uint64_t m : mu2) eps -= log_zeta_prior(m);
  return eps;
}

// The per-task risk certificate value.
inline double continual_task_bound(std::uint64_t n_t, std::uint64_t i_size,
                                   std::uint64_t j_size, int T,
                                   const std::vector<std::uint64_t>& mu2,
                                   double complement_loss, double delta) {
  if (i_size + j_size >= n_t)
    throw std::domain_error("continual_task_bound: complement of task data is empty");
  detail::check_loss(complement_loss, "continual_task_bound");
  double eps = continual_epsilon(n_t, i_size, j_size, T, mu2, delta);
  return kl_inverse(complement_loss, eps / static_cast<double>(n_t - i_size - j_size));
}

// Two-compression-set bound without the 2*sqrt(n-m) slack; strictly tighter
// than compression_message_bound on matched inputs.
inline double two_set_bound(std::uint64_t n, std::uint64_t i_size, std::uint64_t j_size,
                            double message_log_prob, double complement_loss,
                            double delta) {
  if (i_size + j_size + 1 > n)
    throw std::domain_error("two_set_bound: need i_size + j_size <= n - 1");
  if (!(message_log_prob <= 0.0))
    throw std::domain_error("two_set_bound: message log-prob must be <= 0");
  detail::check_delta(delta, "two_set_bound");
  detail::check_loss(complement_loss, "two_set_bound");
  const double r = static_cast<double>(n - i_size - j_size);
  double eps = (log_binomial(n, i_size) - log_zeta_prior(i_size) +
                log_binomial(n - i_size, j_size) - log_zeta_prior(j_size) -
                message_log_prob - std::log(delta)) /
               r;
  return kl_inverse(complement_loss, eps);
}

// Chernoff-style bound from a held-out test set: inverts the mean 0-1 loss of
// n i.i.d. points at confidence delta.
inline double test_set_bound(double mean_loss, std::uint64_t n, double delta) {
  if (n < 1) throw std::domain_error("test_set_bound: n must be >= 1");
  detail::check_delta(delta, "test_set_bound");
  detail::check_loss(mean_loss, "test_set_bound");
  return kl_inverse(mean_loss, std::log(1.0 / delta) / static_cast<double>(n));
}

// Everything a verifier needs to recompute one task's risk certificate at one
// checkpoint: sizes of both compression sets, the iteration-count message,
// the complement loss, and the confidence split.
struct Certificate {
  int task_id = 0;
  int T = 0;  // checkpoint: number of tasks seen when this was issued
  std::uint64_t n_t = 0;
  std::uint64_t i_size = 0;
  std::uint64_t j_size = 0;
  std::vector<std::uint64_t> mu2;
  double complement_loss = 0.0;
  double delta = 0.05;
  double bound = 1.0;
};

inline double evaluate_certificate(const Certificate& c) {
  return continual_task_bound(c.n_t, c.i_size, c.j_size, c.T, c.mu2, c.complement_loss,
                              c.delta);
}

}  // namespace cop2l
