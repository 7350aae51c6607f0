// SPDX-License-Identifier: Apache-2.0
//
// Adam optimization and the alternating adversarial training loop for the
// three model variants.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unmix/gp_prior.hpp"
#include "unmix/models.hpp"
#include "unmix/objectives.hpp"

namespace unmix {

enum class Variant { gp_avae, half_gp_vae, half_gp_avae };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
bool variant_is_adversarial(Variant v);
bool variant_has_encoder(Variant v);

struct AdamHyper {
  double lr = 1e-3;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
  static AdamState create(const std::vector<Var>& params);
};

// Standard Adam with bias correction; reads each parameter's grad buffer.
void adam_step(const std::vector<Var>& params, AdamState& state, const AdamHyper& hyper);

struct TrainConfig {
  Variant variant = Variant::half_gp_avae;
  std::size_t latent_dims = 3;
  std::size_t epochs = 3000;
  double lr_latent = 1e-2;   // latent bank and length scales
  double lr_network = 1e-3;  // decoder / encoder
  double lr_disc = 1e-3;
  double lambda = 1.0;
  std::size_t disc_steps_per_main_step = 1;
  std::size_t adversarial_warmup = 100;
  bool ee_enabled = false;
  EECoefficients ee;
  double obs_var = 0.01;
  double base_jitter = 1e-8;
  std::uint64_t seed = 1;
  std::vector<double> init_length_scales;        // geometric spacing when empty
  std::vector<std::size_t> decoder_hidden{16};
  std::vector<std::size_t> encoder_hidden{16, 16};
  std::vector<std::size_t> disc_hidden{32, 32};

  void validate() const;
};

// (discriminator steps, main steps) for the given epoch; the adversarial
// side stays off during warm-up and for non-adversarial runs.
std::pair<std::size_t, std::size_t> alternate_schedule(std::size_t epoch,
                                                       const TrainConfig& config);

struct TrainResult {
  Variant variant = Variant::half_gp_avae;
  LatentBank bank;         // half variants
  Encoder encoder;         // gp-avae
  Discriminator disc;      // adversarial variants
  Mlp decoder;
  GPPriorSet priors;
  std::vector<LossBreakdown> history;
  std::vector<std::vector<double>> observations;  // m x T, as trained on

  // Posterior mean sequences (n x T); for gp-avae these are re-derived from
  // the encoder on the training observations.
  std::vector<std::vector<double>> inferred_means() const;
};

// Thrown when a loss term goes non-finite; names the first bad term.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainResult train(const TrainConfig& config,
                  const std::vector<std::vector<double>>& observations);

void write_history_csv(const std::string& path, const std::vector<LossBreakdown>& history);

}  // namespace unmix
