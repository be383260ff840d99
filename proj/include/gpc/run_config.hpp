#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpc/estimate.hpp"

namespace gpc {

/// Every tunable of a run. `k_init` empty means K^l + K^l/2.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::size_t> k_init;
  std::size_t epochs = 200;
  std::size_t patience = 15;
  std::size_t pca_q = 128;
  std::size_t encoder_dim = 0;
  bool replearn = true;
  double tau = 0.1;
  std::size_t warmup = 20;
  double lr = 0.1;
  double aug_sigma = 0.1;
  std::size_t batch_labelled = 64;
  std::size_t batch_unlabelled = 64;
  PcaRefresh pca_refresh = PcaRefresh::Epoch;
  GammaConvention gamma_convention = GammaConvention::Factorial;
  SplitVeto split_veto = SplitVeto::AllLabelled;
  CovarianceMode covariance_mode = CovarianceMode::Full;
  std::optional<double> prior_kappa;
  std::optional<double> prior_nu;
  double prior_psi_scale = 1.0;

  LoopConfig loop_config() const;
};

struct ConfigKey {
  std::string name;  // snake_case; the flag is the kebab-cased form
  std::string help;
};

/// All recognised keys in a stable order.
const std::vector<ConfigKey>& config_keys();

std::string flag_name(const std::string& key);

/// Parses and stores one value. Throws Error(Config) on an unknown key or a
/// malformed value.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Reads `key = value` lines; '#' starts a comment; blank lines are skipped.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// `key = value` lines for every key, loadable by parse_config_text.
std::string format_config_text(const RunConfig& config);

/// Ordered key -> value map used for the JSON echo.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

}  // namespace gpc
