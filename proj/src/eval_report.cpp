// SPDX-License-Identifier: Apache-2.0

#include "unmix/eval_report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "unmix/synth_data.hpp"

namespace unmix {

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("rmse: length mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

EvalReport match_components(const std::vector<std::vector<double>>& inferred,
                            const std::vector<std::vector<double>>& truth) {
  const std::size_t n = truth.size();
  if (inferred.size() != n)
    throw std::invalid_argument("match_components: component count mismatch");
  if (n == 0 || n > 6)
    throw std::invalid_argument("match_components: need 1 <= n <= 6 components");

  std::vector<std::vector<double>> zi(n), zt(n);
  for (std::size_t i = 0; i < n; ++i) {
    zi[i] = zscore(inferred[i]);  // throws on degenerate sequences
    zt[i] = zscore(truth[i]);
  }
  // rmse(t, +/-s) for every truth/inferred/sign combination.
  std::vector<std::vector<std::array<double, 2>>> cost(n);
  for (std::size_t ti = 0; ti < n; ++ti) {
    cost[ti].resize(n);
    for (std::size_t si = 0; si < n; ++si) {
      std::vector<double> neg(zi[si].size());
      for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -zi[si][k];
      cost[ti][si][0] = rmse(zt[ti], zi[si]);
      cost[ti][si][1] = rmse(zt[ti], neg);
    }
  }

  EvalReport best;
  best.average_rmse = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
      double sum = 0.0;
      for (std::size_t ti = 0; ti < n; ++ti)
        sum += cost[ti][perm[ti]][(mask >> ti) & 1u];
      const double avg = sum / static_cast<double>(n);
      if (avg < best.average_rmse) {
        best.average_rmse = avg;
        best.permutation = perm;
        best.signs.assign(n, 1);
        best.per_source_rmse.assign(n, 0.0);
        for (std::size_t ti = 0; ti < n; ++ti) {
          best.signs[ti] = ((mask >> ti) & 1u) ? -1 : 1;
          best.per_source_rmse[ti] = cost[ti][perm[ti]][(mask >> ti) & 1u];
        }
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void write_report(const std::vector<EvalReport>& reports, const std::string& csv_path,
                  const std::string& json_path,
                  const std::vector<std::pair<std::string, std::string>>& metadata) {
  if (reports.empty()) throw std::invalid_argument("write_report: no reports");
  const std::size_t n = reports.front().per_source_rmse.size();
  for (const auto& r : reports)
    if (r.per_source_rmse.size() != n)
      throw std::invalid_argument("write_report: inconsistent source counts");

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open for writing: " + csv_path);
  csv << "source";
  for (const auto& r : reports) csv << "," << r.model_variant;
  csv << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    csv << "Source " << (i + 1);
    for (const auto& r : reports) csv << "," << format_double(r.per_source_rmse[i]);
    csv << "\n";
  }
  csv << "Average";
  for (const auto& r : reports) csv << "," << format_double(r.average_rmse);
  csv << "\n";
  if (!csv) throw std::runtime_error("write failed: " + csv_path);

  nlohmann::json j;
  for (const auto& [k, v] : metadata) j["metadata"][k] = v;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json e;
    e["model_variant"] = r.model_variant;
    e["scenario"] = r.scenario;
    e["per_source_rmse"] = r.per_source_rmse;
    e["average_rmse"] = r.average_rmse;
    e["permutation"] = r.permutation;
    e["signs"] = r.signs;
    j["reports"].push_back(e);
  }
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot open for writing: " + json_path);
  js << j.dump(1) << "\n";
  if (!js) throw std::runtime_error("write failed: " + json_path);
}

}  // namespace unmix
