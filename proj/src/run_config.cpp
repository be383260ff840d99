#include "gpc/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gpc/error.hpp"

namespace gpc {

LoopConfig RunConfig::loop_config() const {
  LoopConfig c;
  c.k_init = k_init.value_or(0);
  c.epochs = epochs;
  c.patience = patience;
  c.pca_q = pca_q;
  c.encoder_dim = encoder_dim;
  c.replearn = replearn;
  c.mixture.gamma = gamma_convention;
  c.mixture.split_veto = split_veto;
  c.mixture.covariance = covariance_mode;
  c.prior.kappa = prior_kappa;
  c.prior.nu = prior_nu;
  c.prior.psi_scale = prior_psi_scale;
  c.train.tau = tau;
  c.train.warmup = warmup;
  c.train.epochs = epochs;
  c.train.batch_labelled = batch_labelled;
  c.train.batch_unlabelled = batch_unlabelled;
  c.train.lr = lr;
  c.train.aug_sigma = aug_sigma;
  c.train.pca_refresh = pca_refresh;
  return c;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "random seed"},
      {"k_init", "initial number of components, or auto for K^l + K^l/2"},
      {"epochs", "maximum number of epochs E"},
      {"patience", "stop after this many epochs with unchanged K"},
      {"pca_q", "number of principal directions q"},
      {"encoder_dim", "encoder output dimension, 0 keeps the input dimension"},
      {"replearn", "train the encoder (true/false)"},
      {"tau", "contrastive temperature"},
      {"warmup", "warmup length T of the prototype loss weight"},
      {"lr", "initial learning rate of the cosine schedule"},
      {"aug_sigma", "standard deviation of the view noise"},
      {"batch_labelled", "labelled instances per batch"},
      {"batch_unlabelled", "unlabelled instances per batch"},
      {"pca_refresh", "epoch or batch"},
      {"gamma_convention", "factorial or gamma"},
      {"split_veto", "any-labelled or all-labelled"},
      {"covariance_mode", "full or diag"},
      {"prior_kappa", "NIW kappa, or auto"},
      {"prior_nu", "NIW nu, or auto"},
      {"prior_psi_scale", "multiplier on the NIW scale matrix"},
  };
  return keys;
}

std::string flag_name(const std::string& key) {
  std::string out = key;
  for (char& ch : out) {
    if (ch == '_') ch = '-';
  }
  return out;
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::Config, "invalid value '" + value + "' for '" + key + "'");
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::string real_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "seed") {
    std::uint64_t s = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
    c.seed = s;
  } else if (key == "k_init") {
    if (v == "auto") c.k_init.reset();
    else {
      c.k_init = parse_count(key, v);
      if (*c.k_init == 0) bad_value(key, v);
    }
  } else if (key == "epochs") {
    c.epochs = parse_count(key, v);
  } else if (key == "patience") {
    c.patience = parse_count(key, v);
  } else if (key == "pca_q") {
    c.pca_q = parse_count(key, v);
    if (c.pca_q == 0) bad_value(key, v);
  } else if (key == "encoder_dim") {
    c.encoder_dim = parse_count(key, v);
  } else if (key == "replearn") {
    c.replearn = parse_bool(key, v);
  } else if (key == "tau") {
    c.tau = parse_real(key, v);
    if (c.tau <= 0.0) bad_value(key, v);
  } else if (key == "warmup") {
    c.warmup = parse_count(key, v);
  } else if (key == "lr") {
    c.lr = parse_real(key, v);
    if (c.lr < 0.0) bad_value(key, v);
  } else if (key == "aug_sigma") {
    c.aug_sigma = parse_real(key, v);
    if (c.aug_sigma < 0.0) bad_value(key, v);
  } else if (key == "batch_labelled") {
    c.batch_labelled = parse_count(key, v);
    if (c.batch_labelled == 0) bad_value(key, v);
  } else if (key == "batch_unlabelled") {
    c.batch_unlabelled = parse_count(key, v);
    if (c.batch_unlabelled == 0) bad_value(key, v);
  } else if (key == "pca_refresh") {
    if (v == "epoch") c.pca_refresh = PcaRefresh::Epoch;
    else if (v == "batch") c.pca_refresh = PcaRefresh::Batch;
    else bad_value(key, v);
  } else if (key == "gamma_convention") {
    if (v == "factorial") c.gamma_convention = GammaConvention::Factorial;
    else if (v == "gamma") c.gamma_convention = GammaConvention::Gamma;
    else bad_value(key, v);
  } else if (key == "split_veto") {
    if (v == "any-labelled") c.split_veto = SplitVeto::AnyLabelled;
    else if (v == "all-labelled") c.split_veto = SplitVeto::AllLabelled;
    else bad_value(key, v);
  } else if (key == "covariance_mode") {
    if (v == "full") c.covariance_mode = CovarianceMode::Full;
    else if (v == "diag") c.covariance_mode = CovarianceMode::Diag;
    else bad_value(key, v);
  } else if (key == "prior_kappa") {
    if (v == "auto") c.prior_kappa.reset();
    else {
      c.prior_kappa = parse_real(key, v);
      if (*c.prior_kappa <= 0.0) bad_value(key, v);
    }
  } else if (key == "prior_nu") {
    if (v == "auto") c.prior_nu.reset();
    else c.prior_nu = parse_real(key, v);
  } else if (key == "prior_psi_scale") {
    c.prior_psi_scale = parse_real(key, v);
    if (c.prior_psi_scale <= 0.0) bad_value(key, v);
  } else {
    throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
}

std::string get_config_value(const RunConfig& c, const std::string& key) {
  if (key == "seed") return std::to_string(c.seed);
  if (key == "k_init") return c.k_init ? std::to_string(*c.k_init) : "auto";
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "patience") return std::to_string(c.patience);
  if (key == "pca_q") return std::to_string(c.pca_q);
  if (key == "encoder_dim") return std::to_string(c.encoder_dim);
  if (key == "replearn") return c.replearn ? "true" : "false";
  if (key == "tau") return real_text(c.tau);
  if (key == "warmup") return std::to_string(c.warmup);
  if (key == "lr") return real_text(c.lr);
  if (key == "aug_sigma") return real_text(c.aug_sigma);
  if (key == "batch_labelled") return std::to_string(c.batch_labelled);
  if (key == "batch_unlabelled") return std::to_string(c.batch_unlabelled);
  if (key == "pca_refresh") return c.pca_refresh == PcaRefresh::Epoch ? "epoch" : "batch";
  if (key == "gamma_convention") return c.gamma_convention == GammaConvention::Factorial ? "factorial" : "gamma";
  if (key == "split_veto") return c.split_veto == SplitVeto::AnyLabelled ? "any-labelled" : "all-labelled";
  if (key == "covariance_mode") return c.covariance_mode == CovarianceMode::Full ? "full" : "diag";
  if (key == "prior_kappa") return c.prior_kappa ? real_text(*c.prior_kappa) : "auto";
  if (key == "prior_nu") return c.prior_nu ? real_text(*c.prior_nu) : "auto";
  if (key == "prior_psi_scale") return real_text(c.prior_psi_scale);
  throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys()) out.emplace_back(k.name, get_config_value(c, k.name));
  return out;
}

std::string format_config_text(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace gpc
