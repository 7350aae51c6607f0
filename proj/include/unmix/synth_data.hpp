// SPDX-License-Identifier: Apache-2.0
//
// Synthetic source signals with distinct temporal scales, the mixing map to
// observations, and normalization / CSV utilities.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unmix/autodiff.hpp"

namespace unmix {

struct SourceSpec {
  // Source 1: slow sinusoid with mild frequency drift.
  double slow_cycles = 1.0;
  double slow_drift = 0.3;
  // Source 2: smooth noise drawn from an SE-kernel GP.
  double gp_length_scale = 0.05;
  // Source 3: fast oscillation.
  double fast_cycles = 12.0;
};

struct SourceSet {
  std::vector<std::vector<double>> sources;  // n x T, z-scored
  std::uint64_t seed = 0;
  SourceSpec spec;
  std::size_t length() const { return sources.empty() ? 0 : sources[0].size(); }
};

struct MixingSpec {
  enum class Mode { linear, nonlinear };
  Mode mode = Mode::nonlinear;
  std::size_t observed = 2;             // m
  Tensor weights;                       // m x n
  static MixingSpec random(std::size_t m, std::size_t n, std::uint64_t seed,
                           Mode mode = Mode::nonlinear);
};

// Three z-scored sequences with lag-1 autocorrelation ordering slow > mid > fast.
SourceSet generate_sources(std::size_t t, std::uint64_t seed,
                           const SourceSpec& spec = {});

// X_t = W z_t, optionally tanh-squashed. Rows of the result are observations.
std::vector<std::vector<double>> mix(const SourceSet& sources, const MixingSpec& spec);

// Population-std z-score; rejects constant sequences.
std::vector<double> zscore(const std::vector<double>& seq);

double mean_of(const std::vector<double>& seq);
double lag1_autocorrelation(const std::vector<double>& seq);
double correlation(const std::vector<double>& a, const std::vector<double>& b);

// CSV with header "t,<prefix>1,..." and 17-significant-digit floats.
void write_signals_csv(const std::string& path,
                       const std::vector<std::vector<double>>& signals,
                       const std::string& prefix);
std::vector<std::vector<double>> read_signals_csv(const std::string& path);

std::string format_double(double v);  // shortest 17-sig-digit decimal form

}  // namespace unmix
