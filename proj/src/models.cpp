// SPDX-License-Identifier: Apache-2.0

#include "unmix/models.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace unmix {

Mlp Mlp::create(const std::vector<std::size_t>& dims, Rng& rng, Output output_activation) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least two layer dims");
  Mlp net;
  net.layer_dims = dims;
  net.output_activation = output_activation;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t d_in = dims[l], d_out = dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    Tensor w = Tensor::zeros({d_in, d_out});
    for (double& x : w.values) x = rng.uniform(-a, a);
    net.weights.push_back(leaf(std::move(w)));
    net.biases.push_back(leaf(Tensor::zeros({1, d_out})));
  }
  return net;
}

Var Mlp::forward(const Var& input) const {
  if (input->value.shape.size() != 2 || input->value.shape[1] != layer_dims.front())
    throw std::invalid_argument("Mlp: input " + shape_str(input->value.shape) +
                                " incompatible with first layer width " +
                                std::to_string(layer_dims.front()));
  Var h = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = broadcast_add_row(matmul(h, weights[l]), biases[l]);
    const bool last = (l + 1 == weights.size());
    if (!last)
      h = tanh(h);
    else if (output_activation == Output::sigmoid)
      h = sigmoid(h);
  }
  return h;
}

std::vector<Var> Mlp::params() const {
  std::vector<Var> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    n += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return n;
}

LatentBank LatentBank::create(std::size_t n, std::size_t t, double initial_log_var) {
  LatentBank bank;
  bank.mu = leaf(Tensor::zeros({n, t}));
  bank.log_var = leaf(Tensor::full({n, 1}, initial_log_var));
  return bank;
}

Var latent_sample(const Var& mu, const Var& log_var_col, const Tensor& noise) {
  const std::size_t n = mu->value.shape[0], t = mu->value.shape[1];
  if (noise.shape != mu->value.shape)
    throw std::invalid_argument("latent_sample: noise " + shape_str(noise.shape) +
                                " does not match mu " + shape_str(mu->value.shape));
  if (log_var_col->value.shape != std::vector<std::size_t>{n, 1})
    throw std::invalid_argument("latent_sample: log_var must be n x 1");
  Var std_col = exp(mul(log_var_col, constant(0.5)));
  Var std_tile = matmul(std_col, constant(Tensor::full({1, t}, 1.0)));
  return add(mu, mul(std_tile, constant(noise)));
}

Var latent_sample(const LatentBank& bank, const Tensor& noise) {
  return latent_sample(bank.mu, bank.log_var, noise);
}

Encoder Encoder::create(std::size_t m, std::size_t n,
                        const std::vector<std::size_t>& hidden, Rng& rng,
                        double initial_log_var) {
  Encoder enc;
  std::vector<std::size_t> dims{m};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n);
  enc.mean_head = Mlp::create(dims, rng);
  enc.log_var = leaf(Tensor::full({n, 1}, initial_log_var));
  return enc;
}

Var Encoder::forward(const Var& x) const {
  // X is m x T; the head maps each time step, so feed rows of X^T.
  return transpose(mean_head.forward(transpose(x)));
}

std::vector<Var> Encoder::params() const {
  std::vector<Var> out = mean_head.params();
  out.push_back(log_var);
  return out;
}

Discriminator Discriminator::create(std::size_t n, const std::vector<std::size_t>& hidden,
                                    Rng& rng) {
  Discriminator disc;
  std::vector<std::size_t> dims{n};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  disc.net = Mlp::create(dims, rng, Mlp::Output::sigmoid);
  return disc;
}

Var Discriminator::forward(const Var& z_points) const {
  return clamp_probability(net.forward(z_points));
}

Var clamp_probability(const Var& p, double delta) {
  const double lo = delta, hi = 1.0 - delta;
  Tensor out = p->value;
  for (double& x : out.values) x = std::min(std::max(x, lo), hi);
  return make_node(std::move(out), {p},
      [lo, hi](Node& self) {
        Node& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        for (std::size_t i = 0; i < self.value.numel(); ++i) {
          const double x = pp.value.values[i];
          if (x > lo && x < hi) pp.grad[i] += self.grad[i];
        }
      },
      "clamp_probability");
}

Var decode_sequence(const Mlp& decoder, const Var& z) {
  return transpose(decoder.forward(transpose(z)));
}

void save_checkpoint(const std::string& path, const std::map<std::string, Var>& params,
                     const std::map<std::string, std::string>& metadata) {
  nlohmann::json j;
  j["format_version"] = 1;
  for (const auto& [k, v] : metadata) j["metadata"][k] = v;
  for (const auto& [name, var] : params) {
    j["params"][name] = {{"shape", var->value.shape}, {"values", var->value.values}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path,
                                              std::map<std::string, std::string>* metadata) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  std::map<std::string, Tensor> out;
  for (auto& [name, entry] : j["params"].items()) {
    out.emplace(name, Tensor(entry["shape"].get<std::vector<std::size_t>>(),
                             entry["values"].get<std::vector<double>>()));
  }
  if (metadata && j.contains("metadata"))
    for (auto& [k, v] : j["metadata"].items()) (*metadata)[k] = v.get<std::string>();
  return out;
}

}  // namespace unmix
