// SPDX-License-Identifier: Apache-2.0

#include "unmix/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unmix {

Var reconstruction_nll(const Tensor& x, const Var& x_hat, double obs_var) {
  if (!(obs_var > 0.0))
    throw std::invalid_argument("reconstruction_nll: obs_var must be positive");
  if (x.shape != x_hat->value.shape)
    throw std::invalid_argument("reconstruction_nll: shape mismatch " +
                                shape_str(x.shape) + " vs " +
                                shape_str(x_hat->value.shape));
  const double two_pi = 6.283185307179586476925286766559;
  const double n = static_cast<double>(x.numel());
  Var sq = reduce_sum(square(sub(constant(x), x_hat)));
  return add(mul(sq, constant(1.0 / (2.0 * obs_var))),
             constant(0.5 * n * std::log(two_pi * obs_var)));
}

namespace {

// out[b][i] = mu[i][idx_per_dim[i][b]]
Var gather_batch(const Var& mu, const std::vector<std::vector<std::size_t>>& idx_per_dim,
                 const char* tag) {
  const std::size_t n = mu->value.shape[0], t = mu->value.shape[1];
  if (idx_per_dim.size() != n)
    throw std::invalid_argument(std::string(tag) + ": need one index list per dimension");
  const std::size_t b = idx_per_dim[0].size();
  for (const auto& idx : idx_per_dim) {
    if (idx.size() != b)
      throw std::invalid_argument(std::string(tag) + ": ragged index lists");
    for (std::size_t v : idx)
      if (v >= t)
        throw std::invalid_argument(std::string(tag) + ": index " + std::to_string(v) +
                                    " out of range for T=" + std::to_string(t));
  }
  Tensor out = Tensor::zeros({b, n});
  for (std::size_t row = 0; row < b; ++row)
    for (std::size_t i = 0; i < n; ++i)
      out.at(row, i) = mu->value.at(i, idx_per_dim[i][row]);
  auto idx = std::make_shared<std::vector<std::vector<std::size_t>>>(idx_per_dim);
  return make_node(std::move(out), {mu},
      [idx, b, n, t](Node& self) {
        Node& pm = *self.parents[0];
        if (!pm.requires_grad) return;
        pm.ensure_grad();
        for (std::size_t row = 0; row < b; ++row)
          for (std::size_t i = 0; i < n; ++i)
            pm.grad[i * t + (*idx)[i][row]] += self.grad[row * n + i];
      },
      tag);
}

}  // namespace

Var make_joint_batch(const Var& mu, const std::vector<std::size_t>& indices) {
  std::vector<std::vector<std::size_t>> per_dim(mu->value.shape[0], indices);
  return gather_batch(mu, per_dim, "joint_batch");
}

Var make_marginal_batch(const Var& mu,
                        const std::vector<std::vector<std::size_t>>& perms) {
  return gather_batch(mu, perms, "marginal_batch");
}

std::vector<std::vector<std::size_t>> sample_marginal_perms(Rng& rng, std::size_t dims,
                                                            std::size_t t,
                                                            std::size_t batch_size) {
  if (batch_size > t)
    throw std::invalid_argument("sample_marginal_perms: batch size exceeds sequence length");
  std::vector<std::vector<std::size_t>> perms(dims);
  for (std::size_t i = 0; i < dims; ++i) {
    auto p = rng.permutation(t);
    p.resize(batch_size);
    perms[i] = std::move(p);
  }
  return perms;
}

Var discriminator_loss(const Discriminator& disc, const Var& marginal, const Var& joint) {
  Var p_mar = disc.forward(marginal);
  Var p_joi = disc.forward(joint);
  Var term_mar = negate(reduce_mean(log(p_mar)));
  Var term_joi = negate(reduce_mean(log(sub(constant(1.0), p_joi))));
  return add(term_mar, term_joi);
}

LossGraph composite_loss(const Var& mu, const Var& log_var_col, const Mlp& decoder,
                         const GPPriorSet& priors, const Discriminator* disc,
                         const Tensor& x, const Tensor& noise, double obs_var,
                         double lambda, const std::vector<std::size_t>& joint_indices,
                         const std::vector<std::vector<std::size_t>>& marginal_perms,
                         const EeSettings& ee) {
  const std::size_t n = mu->value.shape[0];
  if (priors.dims() != n)
    throw std::invalid_argument("composite_loss: " + std::to_string(priors.dims()) +
                                " priors for " + std::to_string(n) + " latent dimensions");
  if (lambda < 0.0) throw std::invalid_argument("composite_loss: lambda must be >= 0");

  Var z = latent_sample(mu, log_var_col, noise);
  Var x_hat = decode_sequence(decoder, z);
  Var recon = reconstruction_nll(x, x_hat, obs_var);

  Var kl = kl_gaussian_vs_gp(select_row(mu, 0), select_row(log_var_col, 0),
                             priors.log_length_scales[0], priors.time_grid,
                             priors.base_jitter);
  for (std::size_t i = 1; i < n; ++i)
    kl = add(kl, kl_gaussian_vs_gp(select_row(mu, i), select_row(log_var_col, i),
                                   priors.log_length_scales[i], priors.time_grid,
                                   priors.base_jitter));

  Var total = add(recon, kl);
  LossGraph out;
  out.breakdown.recon_nll = scalar_value(recon);
  out.breakdown.kl_total = scalar_value(kl);

  if (disc != nullptr && lambda > 0.0) {
    Var joint = make_joint_batch(mu, joint_indices);
    Var marginal = make_marginal_batch(mu, marginal_perms);
    Var adv = discriminator_loss(*disc, marginal, joint);
    out.breakdown.adversarial = scalar_value(adv);
    total = sub(total, mul(constant(lambda), adv));
  }
  if (ee.enabled) {
    std::vector<Var> log_vars;
    for (std::size_t i = 0; i < n; ++i) log_vars.push_back(select_row(log_var_col, i));
    Var penalty = ee_penalty(priors.log_length_scales, log_vars, ee.coeffs);
    out.breakdown.ee = scalar_value(penalty);
    total = add(total, penalty);
  }
  out.total = total;
  out.breakdown.total = scalar_value(total);
  return out;
}

LossGraph half_vae_loss(const LatentBank& bank, const Mlp& decoder,
                        const GPPriorSet& priors, const Tensor& x, const Tensor& noise,
                        double obs_var, const EeSettings& ee) {
  return composite_loss(bank.mu, bank.log_var, decoder, priors, nullptr, x, noise,
                        obs_var, 0.0, {}, {}, ee);
}

LossGraph half_avae_loss(const LatentBank& bank, const Mlp& decoder,
                         const GPPriorSet& priors, const Discriminator& disc,
                         const Tensor& x, const Tensor& noise, double obs_var,
                         double lambda, const std::vector<std::size_t>& joint_indices,
                         const std::vector<std::vector<std::size_t>>& marginal_perms,
                         const EeSettings& ee) {
  return composite_loss(bank.mu, bank.log_var, decoder, priors, &disc, x, noise,
                        obs_var, lambda, joint_indices, marginal_perms, ee);
}

LossGraph gp_avae_loss(const Encoder& encoder, const Mlp& decoder,
                       const GPPriorSet& priors, const Discriminator& disc,
                       const Tensor& x, const Tensor& noise, double obs_var,
                       double lambda, const std::vector<std::size_t>& joint_indices,
                       const std::vector<std::vector<std::size_t>>& marginal_perms,
                       const EeSettings& ee) {
  Var mu = encoder.forward(constant(x));
  return composite_loss(mu, encoder.log_var, decoder, priors, &disc, x, noise, obs_var,
                        lambda, joint_indices, marginal_perms, ee);
}

}  // namespace unmix
