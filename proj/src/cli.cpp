#include "gpc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "gpc/datasetio.hpp"
#include "gpc/estimate.hpp"
#include "gpc/evalmetrics.hpp"
#include "gpc/run_config.hpp"
#include "gpc/trace.hpp"
#include "json.hpp"

namespace gpc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return kExitUsage;
    case ErrorKind::NotSPD:
    case ErrorKind::Domain:
    case ErrorKind::Rank:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

namespace {

/// Config keys exposed as kebab-cased flags on a subcommand. Values are kept
/// as text and applied over the config file after parsing.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool no_replearn = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file (flags override it)");
    for (const auto& key : config_keys()) {
      options[key.name] = app->add_option("--" + flag_name(key.name), values[key.name], key.help);
    }
    app->add_flag("--no-replearn", no_replearn, "same as --replearn false");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    for (const auto& key : config_keys()) {
      if (options.at(key.name)->count() > 0) set_config_value(cfg, key.name, values.at(key.name));
    }
    if (no_replearn) cfg.replearn = false;
    return cfg;
  }
};

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
  return j;
}

ordered_json report_json(const EvalReport& r) {
  ordered_json matching = ordered_json::object();
  for (const auto& [cluster, cls] : r.matching) matching[std::to_string(cluster)] = cls;
  return ordered_json{{"acc_all", r.acc_all},         {"acc_old", r.acc_old},
                      {"acc_new", r.acc_new},         {"m_all", r.m_all},
                      {"m_old", r.m_old},             {"m_new", r.m_new},
                      {"correct_all", r.correct_all}, {"correct_old", r.correct_old},
                      {"correct_new", r.correct_new}, {"k_true", r.k_true},
                      {"k_est", r.k_est},             {"k_error", k_error(r.k_est, r.k_true)},
                      {"matching", matching}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

std::unordered_map<std::int64_t, std::int64_t> read_assignments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,cluster", 0) != 0) {
    throw Error(ErrorKind::Parse, path + ": line 1: expected header id,cluster");
  }
  std::unordered_map<std::int64_t, std::int64_t> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::int64_t id = 0, cluster = 0;
    char comma = 0;
    if (!(fields >> id >> comma >> cluster) || comma != ',' || !(fields >> std::ws).eof()) {
      throw Error(ErrorKind::Parse, path + ": line " + std::to_string(lineno) + ": expected id,cluster");
    }
    if (!out.emplace(id, cluster).second) {
      throw Error(ErrorKind::Parse, path + ": line " + std::to_string(lineno) + ": duplicate id");
    }
  }
  return out;
}

/// Scores predictions on the unlabelled rows of `data` against `truth`,
/// whose ids must match the dataset's row for row.
EvalReport evaluate(const FeatureDataset& data, const FeatureDataset& truth,
                    const std::unordered_map<std::int64_t, std::int64_t>& predicted) {
  if (truth.ids != data.ids) throw Error(ErrorKind::DimMismatch, "truth ids do not match the dataset ids");
  if (predicted.size() != data.size()) {
    throw Error(ErrorKind::DimMismatch, "assignment ids do not match the dataset ids");
  }
  std::vector<ClassId> y_true;
  std::vector<std::int64_t> y_pred;
  for (const std::size_t i : data.unlabelled_indices()) {
    const auto it = predicted.find(data.ids[i]);
    if (it == predicted.end()) {
      throw Error(ErrorKind::DimMismatch, "no assignment for instance id " + std::to_string(data.ids[i]));
    }
    if (!truth.labels[i]) {
      throw Error(ErrorKind::Parse, "truth has no class for instance id " + std::to_string(data.ids[i]));
    }
    y_true.push_back(*truth.labels[i]);
    y_pred.push_back(it->second);
  }
  if (y_true.empty()) throw Error(ErrorKind::DimMismatch, "dataset has no unlabelled instances to score");
  return hungarian_acc(y_true, y_pred, data.partition.old_classes);
}

struct GenArgs {
  SynthSpec spec;
  std::string out = "data.gpcf";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto synth = gen_synth(a.spec);
  save_features(synth.dataset, a.out);
  const std::string tpath = truth_path(a.out);
  save_features(with_truth(synth.dataset, synth.truth), tpath);
  out << ordered_json{{"data", a.out},
                      {"truth", tpath},
                      {"n", synth.dataset.size()},
                      {"dim", synth.dataset.dim()},
                      {"labelled", synth.dataset.labelled_indices().size()}}
             .dump(2)
      << '\n';
  return kExitOk;
}

struct FitArgs {
  std::string data;
  std::string out_dir = ".";
  std::string results;
  std::string assignments;
  std::string trace;
  std::string truth;
  bool record_time = false;
};

int cmd_fit(const FitArgs& a, const RunConfig& cfg, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const FeatureDataset ds = load_features(a.data);
  const auto cons = LabelConstraints::from_labels(ds.labels);
  const LoopResult res = estimate_k_loop(ds.x, cons, cfg.loop_config(), cfg.seed);
  const auto clusters = final_assignment(res, cons);

  const std::filesystem::path dir(a.out_dir);
  if (!a.out_dir.empty()) std::filesystem::create_directories(dir);
  const std::string results_path = a.results.empty() ? (dir / "results.json").string() : a.results;
  const std::string assign_path = a.assignments.empty() ? (dir / "assignments.csv").string() : a.assignments;

  std::string csv = "id,cluster\n";
  std::unordered_map<std::int64_t, std::int64_t> predicted;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    csv += std::to_string(ds.ids[i]) + "," + std::to_string(clusters[i]) + "\n";
    predicted.emplace(ds.ids[i], static_cast<std::int64_t>(clusters[i]));
  }
  write_text(assign_path, csv);

  if (!a.trace.empty()) {
    std::ostringstream t;
    write_trace(t, res.k_init, ds.size(), cfg.seed, res.logs, res.state.k());
    write_text(a.trace, t.str());
  }

  ordered_json protos = ordered_json::array();
  ordered_json sizes = ordered_json::array();
  for (const auto& c : res.state.components) {
    protos.push_back(std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size()));
    sizes.push_back(c.size());
  }
  ordered_json r;
  r["config"] = config_json(cfg);
  r["data"] = a.data;
  r["n"] = ds.size();
  r["dim"] = ds.dim();
  r["k_labelled"] = cons.num_classes();
  r["k_init"] = res.k_init;
  r["k_est"] = res.state.k();
  r["k_history"] = res.k_history;
  r["epochs_run"] = res.k_history.size();
  r["cluster_sizes"] = sizes;
  r["embedding_dim"] = res.embedding.cols();
  r["prototypes"] = protos;
  r["assignments"] = assign_path;
  r["trace"] = a.trace.empty() ? ordered_json(nullptr) : ordered_json(a.trace);
  if (!a.truth.empty()) r["eval"] = report_json(evaluate(ds, load_features(a.truth), predicted));
  if (a.record_time) {
    r["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  write_text(results_path, r.dump(2) + "\n");
  out << ordered_json{{"results", results_path}, {"k_init", res.k_init}, {"k_est", res.state.k()}}.dump() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string assignments;
  std::string truth;
  std::string data;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const FeatureDataset ds = load_features(a.data);
  const std::string tpath = a.truth.empty() ? truth_path(a.data) : a.truth;
  const auto report = evaluate(ds, load_features(tpath), read_assignments(a.assignments));
  out << report_json(report).dump(2) << '\n';
  return kExitOk;
}

struct ProbeArgs {
  std::string data;
  double ratio = 0.5;
  std::optional<std::size_t> k_novel_init;
  std::vector<std::size_t> sweep;
  bool text = false;
};

int cmd_probe(const ProbeArgs& a, const RunConfig& cfg, std::ostream& out) {
  const FeatureDataset ds = load_features(a.data);
  const auto rows = ds.labelled_indices();
  Matrix x(static_cast<Eigen::Index>(rows.size()), ds.dim());
  Labels labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = ds.x.row(static_cast<Eigen::Index>(rows[r]));
    labels.push_back(ds.labels[rows[r]]);
  }
  const LoopConfig loop = cfg.loop_config();
  if (a.sweep.empty()) {
    const auto p = probe_k_on_labelled(x, labels, a.ratio, loop, cfg.seed, a.k_novel_init);
    if (a.text) {
      out << "probed " << p.probed.size() << " k_init " << p.k_init << " k_est " << p.k_est << " k_novel_est "
          << p.k_novel_est << '\n';
    } else {
      out << ordered_json{{"retained", p.retained},     {"probed", p.probed},
                          {"k_true_novel", p.probed.size()}, {"k_init", p.k_init},
                          {"k_est", p.k_est},           {"k_novel_est", p.k_novel_est},
                          {"k_history", p.k_history}}
                 .dump(2)
          << '\n';
    }
    return kExitOk;
  }
  ordered_json table = ordered_json::array();
  if (a.text) out << "k_novel_init\tk_novel_true\tk_novel_est\n";
  for (const std::size_t init : a.sweep) {
    const auto p = probe_k_on_labelled(x, labels, a.ratio, loop, cfg.seed, init);
    table.push_back(ordered_json{{"k_novel_init", init}, {"k_novel_true", p.probed.size()}, {"k_novel_est", p.k_novel_est}});
    if (a.text) out << init << '\t' << p.probed.size() << '\t' << p.k_novel_est << '\n';
  }
  if (!a.text) out << ordered_json{{"sweep", table}}.dump(2) << '\n';
  return kExitOk;
}

struct ExportArgs {
  std::string data;
  std::string to;
  std::string trace;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  if (!a.trace.empty()) {
    std::ifstream in(a.trace);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + a.trace + "'");
    const auto s = replay_trace(in);
    out << ordered_json{{"k_init", s.k_init},     {"k_replayed", s.k_replayed}, {"k_logged", s.k_logged},
                        {"rounds", s.rounds},     {"splits", s.splits},         {"merges", s.merges},
                        {"consistent", s.k_replayed == s.k_logged}}
               .dump(2)
        << '\n';
    return s.k_replayed == s.k_logged ? kExitOk : kExitData;
  }
  if (a.data.empty() || a.to.empty()) throw Error(ErrorKind::Config, "export needs --trace, or --data and --to");
  save_features(load_features(a.data), a.to);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-number estimation and clustering for partially labelled feature data", "gpc"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic Gaussian-blob dataset and its truth sidecar");
  g->add_option("--k-true", gen.spec.k_true, "number of classes")->capture_default_str();
  g->add_option("--d", gen.spec.dim, "feature dimension")->capture_default_str();
  g->add_option("--per-class", gen.spec.per_class, "instances per class")->capture_default_str();
  g->add_option("--kl", gen.spec.k_labelled, "number of old (labelled) classes")->capture_default_str();
  g->add_option("--labelled-fraction", gen.spec.labelled_fraction, "labelled share of each old class")
      ->capture_default_str();
  g->add_option("--sigma", gen.spec.sigma, "within-class standard deviation")->capture_default_str();
  g->add_option("--min-separation", gen.spec.min_separation, "minimum centre distance in sigmas")
      ->capture_default_str();
  g->add_option("--center-scale", gen.spec.center_scale, "centres are uniform in [0, scale]^d")
      ->capture_default_str();
  g->add_option("--ambient-dim", gen.spec.ambient_dim, "embed into this many dimensions (0 = off)")
      ->capture_default_str();
  g->add_option("--ambient-noise", gen.spec.ambient_noise, "noise added after embedding")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "random seed")->capture_default_str();
  g->add_option("--out", gen.out, "output path (.csv or .gpcf)")->capture_default_str();

  FitArgs fit;
  ConfigFlags fit_cfg;
  auto* f = app.add_subcommand("fit", "estimate K and cluster a dataset");
  f->add_option("data", fit.data, "dataset (.csv or .gpcf)")->required();
  f->add_option("--out-dir", fit.out_dir, "directory for results.json and assignments.csv")->capture_default_str();
  f->add_option("--results", fit.results, "results JSON path");
  f->add_option("--assignments", fit.assignments, "assignment CSV path");
  f->add_option("--trace", fit.trace, "write the split/merge trace here");
  f->add_option("--truth", fit.truth, "score the run against this truth file");
  f->add_flag("--record-time", fit.record_time, "add wall_clock_s to the results");
  fit_cfg.attach(f);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score an assignment CSV against ground truth");
  e->add_option("--assignments", ev.assignments, "assignment CSV (id,cluster)")->required();
  e->add_option("--data", ev.data, "dataset the assignments refer to")->required();
  e->add_option("--truth", ev.truth, "truth file (default: the dataset's sidecar)");

  ProbeArgs probe;
  ConfigFlags probe_cfg;
  std::size_t k_novel_init = 0;
  auto* p = app.add_subcommand("probe-k", "estimate the number of hidden classes inside the labelled data");
  p->add_option("data", probe.data, "dataset (.csv or .gpcf)")->required();
  p->add_option("--ratio", probe.ratio, "share of labelled classes whose labels are hidden")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  auto* kni = p->add_option("--k-novel-init", k_novel_init, "initial number of novel components");
  p->add_option("--sweep", probe.sweep, "comma-separated K^n_init values to sweep")->delimiter(',');
  p->add_flag("--text", probe.text, "print a plain table instead of JSON");
  probe_cfg.attach(p);

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "convert datasets or replay a trace");
  x->add_option("--data", ex.data, "dataset to convert");
  x->add_option("--to", ex.to, "output path; format follows the extension");
  x->add_option("--trace", ex.trace, "trace to replay and summarise");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (f->parsed()) return cmd_fit(fit, fit_cfg.resolve(), out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (p->parsed()) {
      if (kni->count() > 0) probe.k_novel_init = k_novel_init;
      return cmd_probe(probe, probe_cfg.resolve(), out);
    }
    if (x->parsed()) return cmd_export(ex, out);
  } catch (const Error& ex_) {
    err << json{{"error", to_string(ex_.kind())}, {"message", ex_.what()}}.dump() << '\n';
    return exit_code_for(ex_.kind());
  } catch (const std::filesystem::filesystem_error& fe) {
    err << json{{"error", "Io"}, {"message", fe.what()}}.dump() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace gpc
