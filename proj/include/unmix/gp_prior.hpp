// SPDX-License-Identifier: Apache-2.0
//
// Squared-exponential GP priors over the latent time grid, the closed-form
// KL between the shared-variance Gaussian posterior and a GP prior, and the
// length-scale repulsion penalty used to push priors apart.
#pragma once

#include <cstddef>
#include <vector>

#include "unmix/autodiff.hpp"

namespace unmix {

// k(t, t') = exp(-(t - t')^2 / (2 * length_scale^2)); unit diagonal.
Tensor se_kernel_matrix(const std::vector<double>& time_grid, double length_scale);

struct CholeskyResult {
  Tensor lower;        // T x T lower-triangular factor
  double jitter_used;  // diagonal offset that made the factorization succeed
};

// Factors K + j*I, escalating j by x10 from base_jitter up to 1e-2.
CholeskyResult cholesky_with_jitter(const Tensor& k, double base_jitter);

// Normalized grid 0, 1/T, ..., (T-1)/T.
std::vector<double> default_time_grid(std::size_t t);

struct GPPriorSet {
  std::vector<double> time_grid;
  std::vector<Var> log_length_scales;  // one {1} leaf per latent dimension
  double base_jitter = 1e-8;

  static GPPriorSet create(std::size_t t, const std::vector<double>& length_scales,
                           double base_jitter = 1e-8);
  std::size_t dims() const { return log_length_scales.size(); }
  double length_scale(std::size_t i) const;
};

// KL( N(mu, exp(log_var) * I) || GP(0, K(exp(log_length))) ), differentiable
// w.r.t. all three arguments. mu must have T elements; log_var and log_length
// are scalars. The Cholesky of the kernel is recomputed on each call since
// the length scale is trainable.
Var kl_gaussian_vs_gp(const Var& mu, const Var& log_var, const Var& log_length,
                      const std::vector<double>& time_grid, double base_jitter);

// Plain-value variant used by oracles and tests.
double kl_gaussian_vs_gp_value(const std::vector<double>& mu, double shared_var,
                               const Tensor& kernel, double base_jitter);

struct EECoefficients {
  double beta1 = 0.0;  // pairwise length-scale repulsion
  double beta2 = 0.0;  // length-scale magnitude bound
  double beta3 = 0.0;  // posterior variance bound
};

inline constexpr double kEEPairFloor = 1e-6;

// beta1 * sum_{i<j} 1/((G_i - G_j)^2 + floor) + beta2 * sum G_i + beta3 * sum v_i
// where G_i = exp(log_length[i]) and v_i = exp(log_var[i]).
Var ee_penalty(const std::vector<Var>& log_length_scales,
               const std::vector<Var>& log_vars, const EECoefficients& coeffs);

}  // namespace unmix
