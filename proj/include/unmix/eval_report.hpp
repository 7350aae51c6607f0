// SPDX-License-Identifier: Apache-2.0
//
// Permutation/sign-matched RMSE against ground-truth sources and the result
// table writers.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace unmix {

struct EvalReport {
  std::vector<double> per_source_rmse;   // indexed by truth source
  double average_rmse = 0.0;
  std::vector<std::size_t> permutation;  // truth index -> inferred index
  std::vector<int> signs;                // +1 / -1 per truth source
  std::string model_variant;
  std::string scenario;
};

double rmse(const std::vector<double>& a, const std::vector<double>& b);

// Z-scores all sequences, then brute-forces permutations x sign flips
// (n <= 6) minimizing the average RMSE.
EvalReport match_components(const std::vector<std::vector<double>>& inferred,
                            const std::vector<std::vector<double>>& truth);

// CSV mirroring the result tables: one column per variant, one row per
// source plus an Average row. A JSON twin carries the metadata.
void write_report(const std::vector<EvalReport>& reports, const std::string& csv_path,
                  const std::string& json_path,
                  const std::vector<std::pair<std::string, std::string>>& metadata = {});

}  // namespace unmix
