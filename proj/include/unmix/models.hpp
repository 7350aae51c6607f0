// SPDX-License-Identifier: Apache-2.0
//
// Parameter containers and forward passes: decoder/encoder MLPs, the
// encoder-free latent bank, and the independence discriminator.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unmix/autodiff.hpp"
#include "unmix/rng.hpp"

namespace unmix {

struct Mlp {
  enum class Output { identity, sigmoid };
  std::vector<std::size_t> layer_dims;  // d_in, hidden..., d_out
  std::vector<Var> weights;             // d_in x d_out per layer
  std::vector<Var> biases;              // {1, d_out} per layer
  Output output_activation = Output::identity;

  // uniform(-a, a), a = sqrt(6 / (d_in + d_out))
  static Mlp create(const std::vector<std::size_t>& dims, Rng& rng,
                    Output output_activation = Output::identity);
  // Hidden layers tanh; input is batch x d_in.
  Var forward(const Var& input) const;
  std::vector<Var> params() const;
  std::size_t param_count() const;
};

// Directly trainable posterior: per-dimension mean sequences plus one shared
// log-variance per dimension.
struct LatentBank {
  Var mu;       // n x T
  Var log_var;  // n x 1

  static LatentBank create(std::size_t n, std::size_t t,
                           double initial_log_var = std::log(0.1));
  std::size_t dims() const { return mu->value.shape[0]; }
  std::size_t length() const { return mu->value.shape[1]; }
  std::vector<Var> params() const { return {mu, log_var}; }
};

// Z = mu + exp(log_var / 2) * noise, noise broadcast as an n x T constant.
Var latent_sample(const LatentBank& bank, const Tensor& noise);
Var latent_sample(const Var& mu, const Var& log_var_col, const Tensor& noise);

struct Encoder {
  Mlp mean_head;  // m -> ... -> n, applied per time step
  Var log_var;    // n x 1 free scalars, shared across the sequence

  static Encoder create(std::size_t m, std::size_t n,
                        const std::vector<std::size_t>& hidden, Rng& rng,
                        double initial_log_var = std::log(0.1));
  // X is m x T; returns mu as n x T. log_var is read from the member.
  Var forward(const Var& x) const;
  std::vector<Var> params() const;
};

struct Discriminator {
  Mlp net;  // n -> ... -> 1, sigmoid output
  static Discriminator create(std::size_t n, const std::vector<std::size_t>& hidden,
                              Rng& rng);
  // Rows of z_points are latent points; probabilities clamped to
  // (kProbClamp, 1 - kProbClamp).
  Var forward(const Var& z_points) const;
  std::vector<Var> params() const { return net.params(); }
};

inline constexpr double kProbClamp = 1e-7;

// Clamp with pass-through gradient inside the interval, zero outside.
Var clamp_probability(const Var& p, double delta = kProbClamp);

// Decoder operates per time step: Z (n x T) -> X_hat (m x T).
Var decode_sequence(const Mlp& decoder, const Var& z);

// Checkpoints: versioned JSON of named parameter arrays with shapes.
void save_checkpoint(const std::string& path,
                     const std::map<std::string, Var>& params,
                     const std::map<std::string, std::string>& metadata = {});
std::map<std::string, Tensor> load_checkpoint(
    const std::string& path, std::map<std::string, std::string>* metadata = nullptr);

}  // namespace unmix
