// SPDX-License-Identifier: Apache-2.0

#include "unmix/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace unmix {

namespace fs = std::filesystem;
using nlohmann::json;

std::string scenario_name(Scenario s) {
  return s == Scenario::determined ? "determined" : "underdetermined";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "determined") return Scenario::determined;
  if (name == "underdetermined") return Scenario::underdetermined;
  throw std::invalid_argument("scenario: expected 'determined' or 'underdetermined', got '" +
                              name + "'");
}

namespace {

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
  const char* env = std::getenv("UNMIX_LOG");
  if (!env) return LogLevel::info;
  std::string v(env);
  if (v == "quiet") return LogLevel::quiet;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log_info(const std::string& msg) {
  if (log_level() != LogLevel::quiet) std::cerr << "[unmix] " << msg << "\n";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (models.empty()) throw std::invalid_argument("config: models must not be empty");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  if (sequence_length < 50)
    throw std::invalid_argument("config: T must be >= 50");
  if (mixing != "linear" && mixing != "nonlinear")
    throw std::invalid_argument("config: mixing must be 'linear' or 'nonlinear'");
  if (scenario == Scenario::determined && observed != latent_dims)
    throw std::invalid_argument("config: determined scenario requires m == n (got m=" +
                                std::to_string(observed) + ", n=" +
                                std::to_string(latent_dims) + ")");
  if (scenario == Scenario::underdetermined && observed >= latent_dims)
    throw std::invalid_argument("config: underdetermined scenario requires m < n (got m=" +
                                std::to_string(observed) + ", n=" +
                                std::to_string(latent_dims) + ")");
  train_config(models.front(), seeds.front()).validate();
}

TrainConfig ExperimentConfig::train_config(Variant variant, std::uint64_t seed) const {
  TrainConfig tc;
  tc.variant = variant;
  tc.latent_dims = latent_dims;
  tc.epochs = epochs;
  tc.lr_latent = lr_latent;
  tc.lr_network = lr_network;
  tc.lr_disc = lr_disc;
  tc.lambda = lambda;
  tc.disc_steps_per_main_step = disc_steps_per_main_step;
  tc.adversarial_warmup = adversarial_warmup;
  tc.ee_enabled = ee_enabled;
  tc.ee = EECoefficients{beta1, beta2, beta3};
  tc.obs_var = obs_var;
  tc.base_jitter = base_jitter;
  tc.seed = seed;
  tc.init_length_scales = init_length_scales;
  return tc;
}

namespace {

const char* kKnownKeys[] = {
    "scenario", "models", "seeds", "output_dir", "parallel", "T", "m", "n",
    "mixing", "data_seed", "mixing_seed", "source", "epochs", "lr_latent",
    "lr_network", "lr_disc", "lambda", "disc_steps_per_main_step",
    "adversarial_warmup", "ee_enabled", "beta1", "beta2", "beta3", "obs_var",
    "base_jitter", "init_length_scales"};
const char* kKnownSourceKeys[] = {"slow_cycles", "slow_drift", "gp_length_scale",
                                  "fast_cycles"};

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: type mismatch at key '") + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: document must be a JSON object");
  for (auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || key == k;
    if (!known) throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  ExperimentConfig c;
  if (j.contains("scenario")) {
    if (!j["scenario"].is_string())
      throw std::invalid_argument("config: type mismatch at key 'scenario'");
    c.scenario = scenario_from_name(j["scenario"].get<std::string>());
  }
  if (j.contains("models")) {
    if (!j["models"].is_array())
      throw std::invalid_argument("config: type mismatch at key 'models'");
    c.models.clear();
    for (const auto& v : j["models"]) {
      if (!v.is_string()) throw std::invalid_argument("config: type mismatch at key 'models'");
      c.models.push_back(variant_from_name(v.get<std::string>()));
    }
  }
  read_key(j, "seeds", c.seeds);
  read_key(j, "output_dir", c.output_dir);
  read_key(j, "parallel", c.parallel);
  read_key(j, "T", c.sequence_length);
  read_key(j, "m", c.observed);
  read_key(j, "n", c.latent_dims);
  read_key(j, "mixing", c.mixing);
  read_key(j, "data_seed", c.data_seed);
  read_key(j, "mixing_seed", c.mixing_seed);
  if (j.contains("source")) {
    const json& s = j["source"];
    if (!s.is_object()) throw std::invalid_argument("config: type mismatch at key 'source'");
    for (auto& [key, _] : s.items()) {
      bool known = false;
      for (const char* k : kKnownSourceKeys) known = known || key == k;
      if (!known) throw std::invalid_argument("config: unknown key 'source." + key + "'");
    }
    read_key(s, "slow_cycles", c.source.slow_cycles);
    read_key(s, "slow_drift", c.source.slow_drift);
    read_key(s, "gp_length_scale", c.source.gp_length_scale);
    read_key(s, "fast_cycles", c.source.fast_cycles);
  }
  read_key(j, "epochs", c.epochs);
  read_key(j, "lr_latent", c.lr_latent);
  read_key(j, "lr_network", c.lr_network);
  read_key(j, "lr_disc", c.lr_disc);
  read_key(j, "lambda", c.lambda);
  read_key(j, "disc_steps_per_main_step", c.disc_steps_per_main_step);
  read_key(j, "adversarial_warmup", c.adversarial_warmup);
  read_key(j, "ee_enabled", c.ee_enabled);
  read_key(j, "beta1", c.beta1);
  read_key(j, "beta2", c.beta2);
  read_key(j, "beta3", c.beta3);
  read_key(j, "obs_var", c.obs_var);
  read_key(j, "base_jitter", c.base_jitter);
  read_key(j, "init_length_scales", c.init_length_scales);
  c.validate();
  return c;
}

std::string emit_config(const ExperimentConfig& c) {
  json j;
  j["scenario"] = scenario_name(c.scenario);
  j["models"] = json::array();
  for (Variant v : c.models) j["models"].push_back(variant_name(v));
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["parallel"] = c.parallel;
  j["T"] = c.sequence_length;
  j["m"] = c.observed;
  j["n"] = c.latent_dims;
  j["mixing"] = c.mixing;
  j["data_seed"] = c.data_seed;
  j["mixing_seed"] = c.mixing_seed;
  j["source"] = {{"slow_cycles", c.source.slow_cycles},
                 {"slow_drift", c.source.slow_drift},
                 {"gp_length_scale", c.source.gp_length_scale},
                 {"fast_cycles", c.source.fast_cycles}};
  j["epochs"] = c.epochs;
  j["lr_latent"] = c.lr_latent;
  j["lr_network"] = c.lr_network;
  j["lr_disc"] = c.lr_disc;
  j["lambda"] = c.lambda;
  j["disc_steps_per_main_step"] = c.disc_steps_per_main_step;
  j["adversarial_warmup"] = c.adversarial_warmup;
  j["ee_enabled"] = c.ee_enabled;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["beta3"] = c.beta3;
  j["obs_var"] = c.obs_var;
  j["base_jitter"] = c.base_jitter;
  j["init_length_scales"] = c.init_length_scales;
  return j.dump(1);
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json j = json_text.empty() ? json::object() : json::parse(json_text);
  json parsed_value;
  try {
    parsed_value = json::parse(value);
  } catch (const json::exception&) {
    parsed_value = value;  // bare strings are allowed unquoted
  }
  // Dotted keys address nested objects (e.g. source.gp_length_scale).
  json* target = &j;
  std::string rest = key;
  for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
    target = &(*target)[rest.substr(0, dot)];
    rest = rest.substr(dot + 1);
  }
  (*target)[rest] = parsed_value;
  return j.dump(1);
}

DataBundle prepare_data(const ExperimentConfig& config) {
  DataBundle bundle;
  std::uint64_t seed = config.data_seed;
  for (int attempt = 0; attempt < 100; ++attempt, ++seed) {
    SourceSet set = generate_sources(config.sequence_length, seed, config.source);
    bool ok = true;
    for (std::size_t i = 0; i < set.sources.size() && ok; ++i)
      for (std::size_t k = i + 1; k < set.sources.size() && ok; ++k)
        ok = std::fabs(correlation(set.sources[i], set.sources[k])) < 0.2;
    if (!ok) continue;
    bundle.sources = std::move(set);
    bundle.data_seed_used = seed;
    break;
  }
  if (bundle.sources.sources.empty())
    throw std::runtime_error("prepare_data: no near-uncorrelated source seed found");
  bundle.mixing = MixingSpec::random(config.observed, config.latent_dims,
                                     config.mixing_seed,
                                     config.mixing == "linear"
                                         ? MixingSpec::Mode::linear
                                         : MixingSpec::Mode::nonlinear);
  bundle.observations = mix(bundle.sources, bundle.mixing);
  for (auto& row : bundle.observations) row = zscore(row);
  return bundle;
}

void save_model_checkpoint(const std::string& path, const TrainResult& result,
                           const TrainConfig& config) {
  std::map<std::string, Var> params;
  for (std::size_t l = 0; l < result.decoder.weights.size(); ++l) {
    params["decoder.w" + std::to_string(l)] = result.decoder.weights[l];
    params["decoder.b" + std::to_string(l)] = result.decoder.biases[l];
  }
  if (variant_has_encoder(result.variant)) {
    for (std::size_t l = 0; l < result.encoder.mean_head.weights.size(); ++l) {
      params["encoder.w" + std::to_string(l)] = result.encoder.mean_head.weights[l];
      params["encoder.b" + std::to_string(l)] = result.encoder.mean_head.biases[l];
    }
    params["encoder.log_var"] = result.encoder.log_var;
  } else {
    params["bank.mu"] = result.bank.mu;
    params["bank.log_var"] = result.bank.log_var;
  }
  if (!result.disc.net.weights.empty()) {
    for (std::size_t l = 0; l < result.disc.net.weights.size(); ++l) {
      params["disc.w" + std::to_string(l)] = result.disc.net.weights[l];
      params["disc.b" + std::to_string(l)] = result.disc.net.biases[l];
    }
  }
  Tensor log_lengths = Tensor::zeros({result.priors.dims(), 1});
  for (std::size_t i = 0; i < result.priors.dims(); ++i)
    log_lengths.values[i] = result.priors.log_length_scales[i]->value.values[0];
  params["priors.log_length"] = leaf(log_lengths, false);
  save_checkpoint(path, params,
                  {{"variant", variant_name(result.variant)},
                   {"seed", std::to_string(config.seed)}});
}

EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                               const std::string& sources_csv,
                               const std::string& observations_csv) {
  std::map<std::string, std::string> metadata;
  auto params = load_checkpoint(checkpoint_path, &metadata);
  auto truth = read_signals_csv(sources_csv);

  std::vector<std::vector<double>> inferred;
  if (params.count("bank.mu")) {
    const Tensor& mu = params.at("bank.mu");
    inferred.assign(mu.shape[0], std::vector<double>(mu.shape[1]));
    for (std::size_t i = 0; i < mu.shape[0]; ++i)
      for (std::size_t tau = 0; tau < mu.shape[1]; ++tau) inferred[i][tau] = mu.at(i, tau);
  } else {
    if (observations_csv.empty())
      throw std::invalid_argument(
          "evaluate_checkpoint: encoder checkpoints need the observations CSV");
    auto obs = read_signals_csv(observations_csv);
    // Rebuild the encoder mean head from the stored layer tensors.
    Mlp head;
    for (std::size_t l = 0;; ++l) {
      auto wi = params.find("encoder.w" + std::to_string(l));
      auto bi = params.find("encoder.b" + std::to_string(l));
      if (wi == params.end()) break;
      if (bi == params.end())
        throw std::runtime_error("evaluate_checkpoint: missing encoder bias at layer " +
                                 std::to_string(l));
      if (l == 0) head.layer_dims.push_back(wi->second.shape[0]);
      head.layer_dims.push_back(wi->second.shape[1]);
      head.weights.push_back(leaf(wi->second, false));
      head.biases.push_back(leaf(bi->second, false));
    }
    if (head.weights.empty())
      throw std::runtime_error("evaluate_checkpoint: checkpoint has neither a latent bank "
                               "nor an encoder");
    const std::size_t m = obs.size(), t = obs[0].size();
    Tensor x = Tensor::zeros({m, t});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t tau = 0; tau < t; ++tau) x.at(i, tau) = obs[i][tau];
    Var mu = transpose(head.forward(transpose(constant(x))));
    inferred.assign(mu->value.shape[0], std::vector<double>(t));
    for (std::size_t i = 0; i < inferred.size(); ++i)
      for (std::size_t tau = 0; tau < t; ++tau) inferred[i][tau] = mu->value.at(i, tau);
  }
  EvalReport report = match_components(inferred, truth);
  if (metadata.count("variant")) report.model_variant = metadata.at("variant");
  return report;
}

namespace {

struct VariantOutcome {
  EvalReport report;
  std::exception_ptr error;
};

void run_variant(const ExperimentConfig& config, const DataBundle& data,
                 Variant variant, std::uint64_t seed, const fs::path& dir,
                 VariantOutcome& outcome) {
  try {
    TrainConfig tc = config.train_config(variant, seed);
    const std::string name = variant_name(variant);
    log_info("training " + name + " (seed " + std::to_string(seed) + ", " +
             std::to_string(tc.epochs) + " epochs)");
    TrainResult result = train(tc, data.observations);
    write_history_csv((dir / ("history_" + name + ".csv")).string(), result.history);
    auto inferred = result.inferred_means();
    write_signals_csv((dir / ("inferred_" + name + ".csv")).string(), inferred, "z");
    save_model_checkpoint((dir / ("checkpoint_" + name + ".json")).string(), result, tc);
    outcome.report = match_components(inferred, data.sources.sources);
    outcome.report.model_variant = name;
    outcome.report.scenario = scenario_name(config.scenario);
    log_info(name + " matched average RMSE: " + format_double(outcome.report.average_rmse));
  } catch (...) {
    outcome.error = std::current_exception();
  }
}

void run_one_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  DataBundle data = prepare_data(config);

  ExperimentConfig resolved = config;
  resolved.seeds = {seed};
  resolved.data_seed = data.data_seed_used;
  resolved.output_dir = dir.string();
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw std::runtime_error("cannot open for writing: " + (dir / "config.json").string());
    out << emit_config(resolved) << "\n";
  }
  write_signals_csv((dir / "sources.csv").string(), data.sources.sources, "src");
  write_signals_csv((dir / "observations.csv").string(), data.observations, "obs");

  std::vector<VariantOutcome> outcomes(config.models.size());
  if (config.parallel && config.models.size() > 1) {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < config.models.size(); ++i)
      threads.emplace_back(run_variant, std::cref(config), std::cref(data),
                           config.models[i], seed, std::cref(dir), std::ref(outcomes[i]));
    for (auto& th : threads) th.join();
  } else {
    for (std::size_t i = 0; i < config.models.size(); ++i)
      run_variant(config, data, config.models[i], seed, dir, outcomes[i]);
  }
  std::vector<EvalReport> reports;
  for (auto& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
    reports.push_back(o.report);
  }
  write_report(reports, (dir / "report.csv").string(), (dir / "report.json").string(),
               {{"seed", std::to_string(seed)},
                {"data_seed", std::to_string(data.data_seed_used)},
                {"scenario", scenario_name(config.scenario)}});
}

}  // namespace

int run_experiment(const ExperimentConfig& config) {
  try {
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  }
  try {
    const fs::path base(config.output_dir);
    if (config.seeds.size() == 1) {
      run_one_seed(config, config.seeds.front(), base);
    } else {
      for (std::uint64_t seed : config.seeds)
        run_one_seed(config, seed, base / ("seed_" + std::to_string(seed)));
    }
    return ExitCode::ok;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return ExitCode::training_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return ExitCode::io_error;
  }
}

}  // namespace unmix
