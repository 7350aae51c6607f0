// SPDX-License-Identifier: Apache-2.0

#include "unmix/gp_prior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unmix {

Tensor se_kernel_matrix(const std::vector<double>& time_grid, double length_scale) {
  if (time_grid.empty()) throw std::invalid_argument("se_kernel_matrix: empty grid");
  if (!(length_scale > 0.0))
    throw std::invalid_argument("se_kernel_matrix: length scale must be positive, got " +
                                std::to_string(length_scale));
  const std::size_t t = time_grid.size();
  Tensor k = Tensor::zeros({t, t});
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double d = time_grid[i] - time_grid[j];
      double v = std::exp(-d * d * inv);
      k.at(i, j) = v;
      k.at(j, i) = v;
    }
  return k;
}

namespace {

// Plain Cholesky; returns false if a non-positive pivot appears.
bool try_cholesky(const Tensor& k, double jitter, Tensor& lower) {
  const std::size_t t = k.shape[0];
  lower = Tensor::zeros({t, t});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = k.at(i, j) + (i == j ? jitter : 0.0);
      for (std::size_t l = 0; l < j; ++l) s -= lower.at(i, l) * lower.at(j, l);
      if (i == j) {
        if (!(s > 0.0)) return false;
        lower.at(i, i) = std::sqrt(s);
      } else {
        lower.at(i, j) = s / lower.at(j, j);
      }
    }
  }
  return true;
}

// Inverse of a lower-triangular matrix by forward substitution per column.
Tensor invert_lower(const Tensor& l) {
  const std::size_t t = l.shape[0];
  Tensor inv = Tensor::zeros({t, t});
  for (std::size_t j = 0; j < t; ++j) {
    inv.at(j, j) = 1.0 / l.at(j, j);
    for (std::size_t i = j + 1; i < t; ++i) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s += l.at(i, k) * inv.at(k, j);
      inv.at(i, j) = -s / l.at(i, i);
    }
  }
  return inv;
}

}  // namespace

CholeskyResult cholesky_with_jitter(const Tensor& k, double base_jitter) {
  if (k.shape.size() != 2 || k.shape[0] != k.shape[1])
    throw std::invalid_argument("cholesky_with_jitter: expected square matrix, got " +
                                shape_str(k.shape));
  if (!(base_jitter > 0.0))
    throw std::invalid_argument("cholesky_with_jitter: jitter must be positive");
  const std::size_t t = k.shape[0];
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::fabs(k.at(i, j) - k.at(j, i)) > 1e-12)
        throw std::invalid_argument("cholesky_with_jitter: matrix not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
  CholeskyResult result;
  for (double jitter = base_jitter; jitter <= 1e-2 * (1.0 + 1e-12); jitter *= 10.0) {
    if (try_cholesky(k, jitter, result.lower)) {
      result.jitter_used = jitter;
      return result;
    }
  }
  throw std::runtime_error("cholesky_with_jitter: factorization failed at jitter cap 1e-2");
}

std::vector<double> default_time_grid(std::size_t t) {
  std::vector<double> grid(t);
  for (std::size_t i = 0; i < t; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(t);
  return grid;
}

GPPriorSet GPPriorSet::create(std::size_t t, const std::vector<double>& length_scales,
                              double base_jitter) {
  GPPriorSet set;
  set.time_grid = default_time_grid(t);
  set.base_jitter = base_jitter;
  for (double g : length_scales) {
    if (!(g > 0.0))
      throw std::invalid_argument("GPPriorSet: length scales must be positive");
    set.log_length_scales.push_back(leaf(Tensor::scalar(std::log(g))));
  }
  return set;
}

double GPPriorSet::length_scale(std::size_t i) const {
  return std::exp(log_length_scales[i]->value.values[0]);
}

namespace {

struct KLForward {
  double kl = 0.0;
  std::vector<double> kinv_mu;          // K^-1 mu
  Tensor kinv;
  Tensor kernel;                        // without jitter
  double trace_kinv = 0.0;
  double shared_var = 0.0;
  double gamma = 0.0;
};

KLForward kl_forward(const std::vector<double>& mu, double shared_var, double gamma,
                     const std::vector<double>& time_grid, double base_jitter) {
  const std::size_t t = time_grid.size();
  KLForward fw;
  fw.shared_var = shared_var;
  fw.gamma = gamma;
  fw.kernel = se_kernel_matrix(time_grid, gamma);
  CholeskyResult chol = cholesky_with_jitter(fw.kernel, base_jitter);
  Tensor linv = invert_lower(chol.lower);
  fw.kinv = Tensor::zeros({t, t});
  // K^-1 = L^-T L^-1; iterate over rows of L^-1 for contiguous access
  std::vector<double> linv_t(t * t, 0.0);  // linv_t[i][k] = linv[k][i]
  for (std::size_t k = 0; k < t; ++k)
    for (std::size_t i = 0; i <= k; ++i) linv_t[i * t + k] = linv.at(k, i);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double* a = linv_t.data() + i * t;
      const double* b = linv_t.data() + j * t;
      double s = 0.0;
      for (std::size_t k = i; k < t; ++k) s += a[k] * b[k];
      fw.kinv.at(i, j) = s;
      fw.kinv.at(j, i) = s;
    }
  fw.kinv_mu.assign(t, 0.0);
  double quad = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < t; ++j) s += fw.kinv.at(i, j) * mu[j];
    fw.kinv_mu[i] = s;
    quad += mu[i] * s;
  }
  double logdet = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    logdet += 2.0 * std::log(chol.lower.at(i, i));
    fw.trace_kinv += fw.kinv.at(i, i);
  }
  const double td = static_cast<double>(t);
  fw.kl = 0.5 * (shared_var * fw.trace_kinv + quad - td + logdet - td * std::log(shared_var));
  return fw;
}

}  // namespace

Var kl_gaussian_vs_gp(const Var& mu, const Var& log_var, const Var& log_length,
                      const std::vector<double>& time_grid, double base_jitter) {
  if (mu->value.numel() != time_grid.size())
    throw std::invalid_argument("kl_gaussian_vs_gp: mu has " +
                                std::to_string(mu->value.numel()) + " elements, grid has " +
                                std::to_string(time_grid.size()));
  if (!log_var->value.is_scalar() || !log_length->value.is_scalar())
    throw std::invalid_argument("kl_gaussian_vs_gp: log_var and log_length must be scalar");
  const double shared_var = std::exp(log_var->value.values[0]);
  const double gamma = std::exp(log_length->value.values[0]);
  auto fw = std::make_shared<KLForward>(
      kl_forward(mu->value.values, shared_var, gamma, time_grid, base_jitter));
  auto grid = std::make_shared<std::vector<double>>(time_grid);
  return make_node(Tensor::scalar(fw->kl), {mu, log_var, log_length},
      [fw, grid](Node& self) {
        const double g = self.grad[0];
        const std::size_t t = grid->size();
        Node& pmu = *self.parents[0];
        Node& plv = *self.parents[1];
        Node& pll = *self.parents[2];
        if (pmu.requires_grad) {
          pmu.ensure_grad();
          for (std::size_t i = 0; i < t; ++i) pmu.grad[i] += g * fw->kinv_mu[i];
        }
        if (plv.requires_grad) {
          plv.ensure_grad();
          const double dvar =
              0.5 * (fw->trace_kinv - static_cast<double>(t) / fw->shared_var);
          plv.grad[0] += g * dvar * fw->shared_var;  // chain through var = exp(log_var)
        }
        if (pll.requires_grad) {
          pll.ensure_grad();
          // dKL/dK = 0.5 * (K^-1 - var * K^-2 - (K^-1 mu)(K^-1 mu)^T);
          // dK_ij/dGamma = K_ij * d_ij^2 / Gamma^3 (zero on the diagonal).
          const double inv_g3 = 1.0 / (fw->gamma * fw->gamma * fw->gamma);
          const double* kinv = fw->kinv.values.data();
          const double* kern = fw->kernel.values.data();
          const double* km = fw->kinv_mu.data();
          const double* tau = grid->data();
          // K^-2 = K^-1 K^-1 once up front (symmetric, lower triangle only)
          std::vector<double> kinv2(t * t, 0.0);
          for (std::size_t i = 0; i < t; ++i)
            for (std::size_t k = 0; k < t; ++k) {
              const double a = kinv[i * t + k];
              const double* row_k = kinv + k * t;
              double* out = kinv2.data() + i * t;
              for (std::size_t j = 0; j <= i; ++j) out[j] += a * row_k[j];
            }
          double dgamma = 0.0;
          for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < i; ++j) {  // off-diagonal, doubled by symmetry
              const double dkl_dk = 0.5 * (kinv[i * t + j] -
                                           fw->shared_var * kinv2[i * t + j] -
                                           km[i] * km[j]);
              const double d = tau[i] - tau[j];
              dgamma += 2.0 * dkl_dk * kern[i * t + j] * d * d * inv_g3;
            }
          pll.grad[0] += g * dgamma * fw->gamma;  // chain through Gamma = exp(log_length)
        }
      },
      "kl_gaussian_vs_gp");
}

double kl_gaussian_vs_gp_value(const std::vector<double>& mu, double shared_var,
                               const Tensor& kernel, double base_jitter) {
  if (!(shared_var > 0.0))
    throw std::invalid_argument("kl_gaussian_vs_gp: variance must be positive");
  const std::size_t t = kernel.shape[0];
  if (mu.size() != t)
    throw std::invalid_argument("kl_gaussian_vs_gp: mu/kernel size mismatch");
  CholeskyResult chol = cholesky_with_jitter(kernel, base_jitter);
  Tensor linv = invert_lower(chol.lower);
  double trace = 0.0, quad = 0.0, logdet = 0.0;
  // tr(K^-1) = ||L^-1||_F^2; mu^T K^-1 mu = ||L^-1 mu||^2.
  for (std::size_t i = 0; i < t; ++i) {
    logdet += 2.0 * std::log(chol.lower.at(i, i));
    double row_mu = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      trace += linv.at(i, j) * linv.at(i, j);
      row_mu += linv.at(i, j) * mu[j];
    }
    quad += row_mu * row_mu;
  }
  const double td = static_cast<double>(t);
  return 0.5 * (shared_var * trace + quad - td + logdet - td * std::log(shared_var));
}

Var ee_penalty(const std::vector<Var>& log_length_scales,
               const std::vector<Var>& log_vars, const EECoefficients& coeffs) {
  if (log_length_scales.empty())
    throw std::invalid_argument("ee_penalty: need at least one dimension");
  if (coeffs.beta1 < 0.0 || coeffs.beta2 < 0.0 || coeffs.beta3 < 0.0)
    throw std::invalid_argument("ee_penalty: coefficients must be non-negative");
  Var total = constant(0.0);
  const std::size_t n = log_length_scales.size();
  std::vector<Var> gammas(n);
  for (std::size_t i = 0; i < n; ++i) gammas[i] = exp(log_length_scales[i]);
  if (coeffs.beta1 > 0.0) {
    Var repulsion = constant(0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        Var denom = add(square(sub(gammas[i], gammas[j])), constant(kEEPairFloor));
        repulsion = add(repulsion, div(constant(1.0), denom));
      }
    total = add(total, mul(constant(coeffs.beta1), repulsion));
  }
  if (coeffs.beta2 > 0.0) {
    Var sum = constant(0.0);
    for (std::size_t i = 0; i < n; ++i) sum = add(sum, gammas[i]);
    total = add(total, mul(constant(coeffs.beta2), sum));
  }
  if (coeffs.beta3 > 0.0) {
    Var sum = constant(0.0);
    for (const auto& lv : log_vars) sum = add(sum, exp(lv));
    total = add(total, mul(constant(coeffs.beta3), sum));
  }
  return total;
}

}  // namespace unmix
