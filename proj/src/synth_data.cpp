// SPDX-License-Identifier: Apache-2.0

#include "unmix/synth_data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "unmix/gp_prior.hpp"
#include "unmix/rng.hpp"

namespace unmix {

namespace {

// Largest/smallest eigenvalue of a small symmetric matrix by cyclic Jacobi.
std::pair<double, double> symmetric_eig_range(Tensor a) {
  const std::size_t n = a.shape[0];
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a.at(p, q)) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2.0 * a.at(p, q), a.at(q, q) - a.at(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
      }
  }
  double lo = a.at(0, 0), hi = a.at(0, 0);
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, a.at(i, i));
    hi = std::max(hi, a.at(i, i));
  }
  return {lo, hi};
}

double condition_number(const Tensor& w) {
  const std::size_t m = w.shape[0], n = w.shape[1];
  Tensor g = Tensor::zeros({m, m});  // W W^T
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += w.at(i, k) * w.at(j, k);
      g.at(i, j) = s;
    }
  auto [lo, hi] = symmetric_eig_range(g);
  if (lo <= 0.0) return 1e300;
  return std::sqrt(hi / lo);
}

}  // namespace

MixingSpec MixingSpec::random(std::size_t m, std::size_t n, std::uint64_t seed,
                              Mode mode) {
  if (m == 0 || n == 0 || m > n)
    throw std::invalid_argument("MixingSpec: need 1 <= m <= n");
  Rng rng(seed);
  MixingSpec spec;
  spec.mode = mode;
  spec.observed = m;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Tensor w = Tensor::zeros({m, n});
    for (double& x : w.values) x = rng.uniform(-1.0, 1.0);
    // Unit rows keep each pre-activation mixture at roughly unit scale.
    for (std::size_t i = 0; i < m; ++i) {
      double norm = 0.0;
      for (std::size_t k = 0; k < n; ++k) norm += w.at(i, k) * w.at(i, k);
      norm = std::sqrt(norm);
      if (norm < 1e-6) { norm = 1.0; }
      for (std::size_t k = 0; k < n; ++k) w.at(i, k) /= norm;
    }
    if (condition_number(w) < 10.0) {
      spec.weights = std::move(w);
      return spec;
    }
  }
  throw std::runtime_error("MixingSpec: no well-conditioned matrix found");
}

SourceSet generate_sources(std::size_t t, std::uint64_t seed, const SourceSpec& spec) {
  if (t < 50) throw std::invalid_argument("generate_sources: need T >= 50");
  SourceSet set;
  set.seed = seed;
  set.spec = spec;
  Rng rng(seed);
  const double two_pi = 6.283185307179586476925286766559;

  std::vector<double> slow(t), smooth(t), fast(t);
  for (std::size_t i = 0; i < t; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(t);
    slow[i] = std::sin(two_pi * (spec.slow_cycles * u + spec.slow_drift * u * u));
    fast[i] = std::sin(two_pi * spec.fast_cycles * u);
  }
  // GP draw: L * eps for the SE kernel at the configured length scale.
  Tensor kernel = se_kernel_matrix(default_time_grid(t), spec.gp_length_scale);
  CholeskyResult chol = cholesky_with_jitter(kernel, 1e-8);
  std::vector<double> eps = rng.normals(t);
  for (std::size_t i = 0; i < t; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += chol.lower.at(i, j) * eps[j];
    smooth[i] = s;
  }

  set.sources.push_back(zscore(slow));
  set.sources.push_back(zscore(smooth));
  set.sources.push_back(zscore(fast));
  return set;
}

std::vector<std::vector<double>> mix(const SourceSet& sources, const MixingSpec& spec) {
  const std::size_t n = sources.sources.size();
  const std::size_t t = sources.length();
  if (spec.weights.shape.size() != 2 || spec.weights.shape[0] != spec.observed ||
      spec.weights.shape[1] != n)
    throw std::invalid_argument("mix: weight matrix " + shape_str(spec.weights.shape) +
                                " incompatible with m=" + std::to_string(spec.observed) +
                                ", n=" + std::to_string(n));
  std::vector<std::vector<double>> x(spec.observed, std::vector<double>(t, 0.0));
  for (std::size_t tau = 0; tau < t; ++tau)
    for (std::size_t i = 0; i < spec.observed; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += spec.weights.at(i, k) * sources.sources[k][tau];
      x[i][tau] = spec.mode == MixingSpec::Mode::nonlinear ? std::tanh(s) : s;
    }
  return x;
}

double mean_of(const std::vector<double>& seq) {
  double s = 0.0;
  for (double x : seq) s += x;
  return s / static_cast<double>(seq.size());
}

std::vector<double> zscore(const std::vector<double>& seq) {
  if (seq.empty()) throw std::invalid_argument("zscore: empty sequence");
  const double m = mean_of(seq);
  double var = 0.0;
  for (double x : seq) var += (x - m) * (x - m);
  var /= static_cast<double>(seq.size());
  if (var <= 0.0) throw std::invalid_argument("zscore: degenerate (constant) sequence");
  const double inv = 1.0 / std::sqrt(var);
  std::vector<double> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out[i] = (seq[i] - m) * inv;
  return out;
}

double lag1_autocorrelation(const std::vector<double>& seq) {
  const std::size_t n = seq.size();
  const double m = mean_of(seq);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) den += (seq[i] - m) * (seq[i] - m);
  for (std::size_t i = 0; i + 1 < n; ++i) num += (seq[i] - m) * (seq[i + 1] - m);
  return num / den;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation: length mismatch");
  const double ma = mean_of(a), mb = mean_of(b);
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_signals_csv(const std::string& path,
                       const std::vector<std::vector<double>>& signals,
                       const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t";
  for (std::size_t i = 0; i < signals.size(); ++i) out << "," << prefix << (i + 1);
  out << "\n";
  const std::size_t t = signals.empty() ? 0 : signals[0].size();
  for (std::size_t tau = 0; tau < t; ++tau) {
    out << tau;
    for (const auto& s : signals) out << "," << format_double(s[tau]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::vector<double>> read_signals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  std::size_t cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  if (cols < 2) throw std::runtime_error("csv has no signal columns: " + path);
  std::vector<std::vector<double>> signals(cols - 1);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // t column
    for (std::size_t i = 0; i < cols - 1; ++i) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("short row in csv: " + path);
      signals[i].push_back(std::stod(cell));
    }
  }
  return signals;
}

}  // namespace unmix
