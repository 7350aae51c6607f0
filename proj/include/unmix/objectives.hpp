// SPDX-License-Identifier: Apache-2.0
//
// Training objectives: Gaussian reconstruction NLL, joint/marginal batch
// sampling for the independence discriminator, the discriminator loss, and
// the composite losses of the three model variants.
#pragma once

#include <cstddef>
#include <vector>

#include "unmix/autodiff.hpp"
#include "unmix/gp_prior.hpp"
#include "unmix/models.hpp"
#include "unmix/rng.hpp"

namespace unmix {

struct LossBreakdown {
  double recon_nll = 0.0;
  double kl_total = 0.0;
  double adversarial = 0.0;  // discriminator confusion loss on the live batch
  double ee = 0.0;
  double total = 0.0;        // recon + kl - lambda * adversarial + ee
};

struct LossGraph {
  Var total;
  LossBreakdown breakdown;
};

struct EeSettings {
  bool enabled = false;
  EECoefficients coeffs;
};

// Sum over time and channels of the Gaussian negative log-likelihood with
// fixed observation variance.
Var reconstruction_nll(const Tensor& x, const Var& x_hat, double obs_var);

// Row b = (mu^1[idx_b], ..., mu^n[idx_b]); time-aligned across dimensions.
Var make_joint_batch(const Var& mu, const std::vector<std::size_t>& indices);

// Row b = (mu^1[perm_1(b)], ..., mu^n[perm_n(b)]); one independent
// permutation per dimension, so per-dimension value multisets are preserved.
Var make_marginal_batch(const Var& mu,
                        const std::vector<std::vector<std::size_t>>& perms);

// First batch_size entries of an independent full permutation per dimension.
std::vector<std::vector<std::size_t>> sample_marginal_perms(Rng& rng, std::size_t dims,
                                                            std::size_t t,
                                                            std::size_t batch_size);

// -mean[log D(marginal)] - mean[log(1 - D(joint))]
Var discriminator_loss(const Discriminator& disc, const Var& marginal, const Var& joint);

// Shared composition used by all three variants: reconstruction + per-dim
// GP KL, minus lambda times the discriminator confusion (when disc given and
// lambda > 0), plus the EE penalty (when enabled). noise and the adversarial
// indices are passed in so callers control the stochasticity.
LossGraph composite_loss(const Var& mu, const Var& log_var_col, const Mlp& decoder,
                         const GPPriorSet& priors, const Discriminator* disc,
                         const Tensor& x, const Tensor& noise, double obs_var,
                         double lambda, const std::vector<std::size_t>& joint_indices,
                         const std::vector<std::vector<std::size_t>>& marginal_perms,
                         const EeSettings& ee);

LossGraph half_vae_loss(const LatentBank& bank, const Mlp& decoder,
                        const GPPriorSet& priors, const Tensor& x, const Tensor& noise,
                        double obs_var, const EeSettings& ee);

LossGraph half_avae_loss(const LatentBank& bank, const Mlp& decoder,
                         const GPPriorSet& priors, const Discriminator& disc,
                         const Tensor& x, const Tensor& noise, double obs_var,
                         double lambda, const std::vector<std::size_t>& joint_indices,
                         const std::vector<std::vector<std::size_t>>& marginal_perms,
                         const EeSettings& ee);

LossGraph gp_avae_loss(const Encoder& encoder, const Mlp& decoder,
                       const GPPriorSet& priors, const Discriminator& disc,
                       const Tensor& x, const Tensor& noise, double obs_var,
                       double lambda, const std::vector<std::size_t>& joint_indices,
                       const std::vector<std::vector<std::size_t>>& marginal_perms,
                       const EeSettings& ee);

}  // namespace unmix
