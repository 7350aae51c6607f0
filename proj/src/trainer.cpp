// SPDX-License-Identifier: Apache-2.0

#include "unmix/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "unmix/synth_data.hpp"

namespace unmix {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::gp_avae: return "gp-avae";
    case Variant::half_gp_vae: return "half-gp-vae";
    case Variant::half_gp_avae: return "half-gp-avae";
  }
  throw std::logic_error("variant_name: bad variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "gp-avae") return Variant::gp_avae;
  if (name == "half-gp-vae") return Variant::half_gp_vae;
  if (name == "half-gp-avae") return Variant::half_gp_avae;
  throw std::invalid_argument("unknown model variant: " + name);
}

bool variant_is_adversarial(Variant v) { return v != Variant::half_gp_vae; }
bool variant_has_encoder(Variant v) { return v == Variant::gp_avae; }

AdamState AdamState::create(const std::vector<Var>& params) {
  AdamState state;
  for (const auto& p : params) {
    state.m.emplace_back(p->value.numel(), 0.0);
    state.v.emplace_back(p->value.numel(), 0.0);
  }
  return state;
}

void adam_step(const std::vector<Var>& params, AdamState& state, const AdamHyper& hyper) {
  if (params.size() != state.m.size())
    throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.m.size()) +
                                " parameters, got " + std::to_string(params.size()));
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Node& p = *params[k];
    p.ensure_grad();
    if (state.m[k].size() != p.value.numel())
      throw std::invalid_argument("adam_step: moment shape mismatch at parameter " +
                                  std::to_string(k));
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      state.m[k][i] = hyper.b1 * state.m[k][i] + (1.0 - hyper.b1) * g;
      state.v[k][i] = hyper.b2 * state.v[k][i] + (1.0 - hyper.b2) * g * g;
      const double mhat = state.m[k][i] / bc1;
      const double vhat = state.v[k][i] / bc2;
      p.value.values[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (latent_dims == 0) throw std::invalid_argument("config: latent_dims must be >= 1");
  if (!(lr_latent > 0.0) || !(lr_network > 0.0) || !(lr_disc > 0.0))
    throw std::invalid_argument("config: learning rates must be positive");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (!(obs_var > 0.0)) throw std::invalid_argument("config: obs_var must be positive");
  if (ee.beta1 < 0.0 || ee.beta2 < 0.0 || ee.beta3 < 0.0)
    throw std::invalid_argument("config: EE coefficients must be non-negative");
  if (!init_length_scales.empty() && init_length_scales.size() != latent_dims)
    throw std::invalid_argument("config: init_length_scales must match latent_dims");
}

namespace {

bool adversarial_active(const TrainConfig& config) {
  // Lambda = 0 degenerates to the non-adversarial model; skipping the
  // discriminator machinery keeps the RNG stream (and hence the history)
  // identical to half-gp-vae.
  return variant_is_adversarial(config.variant) && config.lambda > 0.0;
}

std::vector<double> default_length_scales(std::size_t n) {
  std::vector<double> scales(n);
  double g = 0.15;
  for (std::size_t i = 0; i < n; ++i) {
    scales[i] = g;
    g *= 0.3;
  }
  return scales;
}

void zero_all(const std::vector<Var>& params) {
  for (const auto& p : params) p->zero_grad();
}

void check_finite(const LossBreakdown& b, std::size_t epoch) {
  auto bad = [](double x) { return !std::isfinite(x); };
  const char* term = nullptr;
  if (bad(b.recon_nll)) term = "recon";
  else if (bad(b.kl_total)) term = "kl";
  else if (bad(b.adversarial)) term = "adversarial";
  else if (bad(b.ee)) term = "ee";
  else if (bad(b.total)) term = "total";
  if (term)
    throw TrainingDiverged("training diverged: non-finite " + std::string(term) +
                           " term at epoch " + std::to_string(epoch));
}

}  // namespace

std::pair<std::size_t, std::size_t> alternate_schedule(std::size_t epoch,
                                                       const TrainConfig& config) {
  if (!adversarial_active(config) || epoch < config.adversarial_warmup) return {0, 1};
  return {config.disc_steps_per_main_step, 1};
}

std::vector<std::vector<double>> TrainResult::inferred_means() const {
  if (variant_has_encoder(variant)) {
    const std::size_t m = observations.size();
    const std::size_t t = observations[0].size();
    Tensor x = Tensor::zeros({m, t});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t tau = 0; tau < t; ++tau) x.at(i, tau) = observations[i][tau];
    Var mu = encoder.forward(constant(x));
    const std::size_t n = mu->value.shape[0];
    std::vector<std::vector<double>> out(n, std::vector<double>(t));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t tau = 0; tau < t; ++tau) out[i][tau] = mu->value.at(i, tau);
    return out;
  }
  const std::size_t n = bank.dims(), t = bank.length();
  std::vector<std::vector<double>> out(n, std::vector<double>(t));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t tau = 0; tau < t; ++tau) out[i][tau] = bank.mu->value.at(i, tau);
  return out;
}

TrainResult train(const TrainConfig& config,
                  const std::vector<std::vector<double>>& observations) {
  config.validate();
  if (observations.empty() || observations[0].empty())
    throw std::invalid_argument("train: empty observations");
  const std::size_t m = observations.size();
  const std::size_t t = observations[0].size();
  const std::size_t n = config.latent_dims;
  for (const auto& row : observations)
    if (row.size() != t) throw std::invalid_argument("train: ragged observations");

  Tensor x = Tensor::zeros({m, t});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t tau = 0; tau < t; ++tau) x.at(i, tau) = observations[i][tau];

  TrainResult result;
  result.variant = config.variant;
  result.observations = observations;

  // Deterministic initialization order: decoder, encoder, discriminator.
  Rng init_rng(config.seed);
  std::vector<std::size_t> dec_dims{n};
  dec_dims.insert(dec_dims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
  dec_dims.push_back(m);
  result.decoder = Mlp::create(dec_dims, init_rng);
  if (variant_has_encoder(config.variant))
    result.encoder = Encoder::create(m, n, config.encoder_hidden, init_rng);
  else
    result.bank = LatentBank::create(n, t);
  const bool adversarial = adversarial_active(config);
  if (adversarial) result.disc = Discriminator::create(n, config.disc_hidden, init_rng);

  auto scales = config.init_length_scales.empty() ? default_length_scales(n)
                                                  : config.init_length_scales;
  result.priors = GPPriorSet::create(t, scales, config.base_jitter);

  // Parameter groups: the directly optimized latent bank and length scales
  // tolerate larger steps than the networks.
  std::vector<Var> latent_group = result.priors.log_length_scales;
  std::vector<Var> network_group = result.decoder.params();
  if (variant_has_encoder(config.variant)) {
    for (const auto& p : result.encoder.params()) network_group.push_back(p);
  } else {
    latent_group.push_back(result.bank.mu);
    latent_group.push_back(result.bank.log_var);
  }
  AdamState latent_state = AdamState::create(latent_group);
  AdamState network_state = AdamState::create(network_group);
  AdamHyper latent_hyper{config.lr_latent};
  AdamHyper network_hyper{config.lr_network};
  std::vector<Var> disc_group;
  AdamState disc_state;
  AdamHyper disc_hyper{config.lr_disc};
  if (adversarial) {
    disc_group = result.disc.params();
    disc_state = AdamState::create(disc_group);
  }

  // Separate streams so the non-adversarial trajectory is unaffected by
  // whether the shuffling machinery runs.
  Rng noise_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  Rng shuffle_rng(config.seed ^ 0xd1b54a32d192ed03ull);

  std::vector<std::size_t> full_indices(t);
  std::iota(full_indices.begin(), full_indices.end(), 0);
  EeSettings ee{config.ee_enabled, config.ee};

  auto current_means = [&]() -> Tensor {
    if (variant_has_encoder(config.variant))
      return result.encoder.forward(constant(x))->value;
    return result.bank.mu->value;
  };

  result.history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto [disc_steps, main_steps] = alternate_schedule(epoch, config);

    for (std::size_t s = 0; s < disc_steps; ++s) {
      // Discriminator sees the current means as constants.
      Var mu_detached = constant(current_means());
      auto perms = sample_marginal_perms(shuffle_rng, n, t, t);
      Var joint = make_joint_batch(mu_detached, full_indices);
      Var marginal = make_marginal_batch(mu_detached, perms);
      Var loss = discriminator_loss(result.disc, marginal, joint);
      zero_all(disc_group);
      backward(loss);
      adam_step(disc_group, disc_state, disc_hyper);
    }

    for (std::size_t s = 0; s < main_steps; ++s) {
      Tensor noise({n, t}, noise_rng.normals(n * t));
      const bool adv_now = adversarial && epoch >= config.adversarial_warmup;
      std::vector<std::vector<std::size_t>> perms;
      if (adv_now) perms = sample_marginal_perms(shuffle_rng, n, t, t);
      LossGraph loss =
          variant_has_encoder(config.variant)
              ? gp_avae_loss(result.encoder, result.decoder, result.priors, result.disc,
                             x, noise, config.obs_var, adv_now ? config.lambda : 0.0,
                             full_indices, perms, ee)
              : composite_loss(result.bank.mu, result.bank.log_var, result.decoder,
                               result.priors, adv_now ? &result.disc : nullptr, x,
                               noise, config.obs_var, adv_now ? config.lambda : 0.0,
                               full_indices, perms, ee);
      check_finite(loss.breakdown, epoch);
      zero_all(latent_group);
      zero_all(network_group);
      backward(loss.total);
      adam_step(latent_group, latent_state, latent_hyper);
      adam_step(network_group, network_state, network_hyper);
      result.history.push_back(loss.breakdown);
    }
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<LossBreakdown>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,recon,kl,adv,ee,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& b = history[e];
    out << e << "," << format_double(b.recon_nll) << "," << format_double(b.kl_total)
        << "," << format_double(b.adversarial) << "," << format_double(b.ee) << ","
        << format_double(b.total) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace unmix
