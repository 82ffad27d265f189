#if __has_include(<malloc.h>)
#include <malloc.h>
#endif

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edgecal/baselines.hpp"
#include "edgecal/dataio.hpp"
#include "edgecal/error.hpp"
#include "edgecal/experiment.hpp"
#include "edgecal/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace edgecal;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string seeds_csv;
  std::string encoder;
  std::string calibrators_csv;
  std::string gamma;
  std::string lambda_grid_csv;
  int bins = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--seed", f.seeds_csv, "comma-separated seed list");
  cmd->add_option("--encoder", f.encoder, "gcn|gin|sage");
  cmd->add_option("--calibrators", f.calibrators_csv,
                  "comma-separated subset of temp,iso,hist,bbq,innout,embmlp");
  cmd->add_option("--gamma", f.gamma, "euclidean|difference");
  cmd->add_option("--lambda-grid", f.lambda_grid_csv,
                  "comma-separated lambda values");
  cmd->add_option("--bins", f.bins, "calibration bin count");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

ExperimentConfig load_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ContractError("cannot open config: " + f.config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ContractError("config parse failure: " + std::string(e.what()));
    }
    cfg = ExperimentConfig::from_json(j);
  }
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (!f.seeds_csv.empty()) {
    cfg.seeds.clear();
    for (const std::string& s : split_csv(f.seeds_csv))
      cfg.seeds.push_back(std::stoull(s));
  }
  if (!f.encoder.empty()) cfg.encoder.kind = encoder_kind_from_string(f.encoder);
  if (!f.calibrators_csv.empty()) cfg.calibrators = split_csv(f.calibrators_csv);
  if (!f.gamma.empty()) cfg.innout.gamma = gamma_kind_from_string(f.gamma);
  if (!f.lambda_grid_csv.empty()) {
    cfg.innout.lambda_grid.clear();
    for (const std::string& s : split_csv(f.lambda_grid_csv))
      cfg.innout.lambda_grid.push_back(std::stod(s));
  }
  if (f.bins > 0) {
    cfg.bins = f.bins;
    cfg.innout.ece_bins = f.bins;
  }
  return cfg;
}

std::pair<Graph, Matrix> load_data(const ExperimentConfig& cfg) {
  if (cfg.edge_file.empty()) return generate_sbm(cfg.sbm, cfg.data_seed);
  return load_dataset(cfg.edge_file, cfg.feature_file);
}

uint64_t single_seed(const ExperimentConfig& cfg) { return cfg.seeds.front(); }

int cmd_synth(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  auto [g, x] = generate_sbm(cfg.sbm, cfg.data_seed);
  fs::create_directories(cfg.out_dir);
  write_edge_list(g, cfg.out_dir + "/edges.tsv");
  write_feature_csv(x, cfg.out_dir + "/features.csv");
  std::cout << "wrote " << g.node_count() << " nodes, " << g.edge_count()
            << " edges to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  cfg.validate();
  auto [g, x] = load_data(cfg);
  uint64_t seed = single_seed(cfg);
  EdgeSplit split =
      split_edges(g, cfg.train_frac, cfg.val_frac, cfg.test_frac, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/train_log.jsonl");
  TrainResult tr = train(cfg.encoder, cfg.scorer, g, x, split, tc, &log);
  std::ofstream out(cfg.out_dir + "/model.json");
  out << model_to_json(tr.model).dump(2) << "\n";
  std::cout << "seed " << seed << ": best epoch " << tr.best_epoch
            << ", val AUC " << tr.best_val_auc << "\n";
  return 0;
}

Model read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open model checkpoint: " + path);
  json j;
  in >> j;
  return model_from_json(j);
}

int cmd_calibrate(const CommonFlags& f, const std::string& model_path) {
  ExperimentConfig cfg = load_config(f);
  cfg.validate();
  auto [g, x] = load_data(cfg);
  uint64_t seed = single_seed(cfg);
  EdgeSplit split =
      split_edges(g, cfg.train_frac, cfg.val_frac, cfg.test_frac, seed);
  Model model = read_model(model_path.empty() ? cfg.out_dir + "/model.json"
                                              : model_path);
  Graph train_graph(g.node_count(), split.train_pos);
  GraphOps ops(train_graph);
  std::vector<CalibrationTriple> triples =
      build_calibration_set(g, split, seed ^ 0x5ca1ab1eULL);
  std::vector<Edge> calib_pos, calib_neg;
  for (const CalibrationTriple& t : triples)
    (t.label ? calib_pos : calib_neg).push_back({t.u, t.v});
  std::vector<ScoredEdge> fit_scored =
      score_edges_plain(model, ops, x, calib_pos, calib_neg);
  fs::create_directories(cfg.out_dir);
  for (const std::string& name : cfg.calibrators) {
    CalibratorKind kind = calibrator_kind_from_string(name);
    json j;
    if (kind == CalibratorKind::InNOut) {
      InNOutConfig ic = cfg.innout;
      ic.seed = seed;
      j = fit_innout(model, g, x, triples, split, ic).to_json();
    } else if (kind == CalibratorKind::EmbMlp) {
      InNOutConfig ic = cfg.innout;
      ic.seed = seed;
      j = fit_emb_mlp(model, g, x, triples, split, ic).to_json();
    } else {
      j = fit_calibrator(kind, fit_scored).to_json();
    }
    std::ofstream out(cfg.out_dir + "/calibrator_" + name + ".json");
    out << j.dump(2) << "\n";
    std::cout << "fitted " << name << "\n";
  }
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& model_path) {
  ExperimentConfig cfg = load_config(f);
  cfg.validate();
  auto [g, x] = load_data(cfg);
  uint64_t seed = single_seed(cfg);
  EdgeSplit split =
      split_edges(g, cfg.train_frac, cfg.val_frac, cfg.test_frac, seed);
  Model model = read_model(model_path.empty() ? cfg.out_dir + "/model.json"
                                              : model_path);
  Graph train_graph(g.node_count(), split.train_pos);
  GraphOps ops(train_graph);
  std::vector<ScoredEdge> scored =
      score_edges_plain(model, ops, x, split.test_pos, split.test_neg);

  auto metrics_json = [&](const std::vector<ScoredEdge>& s, bool calibrated) {
    std::vector<double> conf(s.size());
    std::vector<int> y(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      conf[i] = calibrated ? s[i].calibrated_or_raw() : s[i].probability();
      y[i] = s[i].label;
    }
    std::vector<ScoredEdge> ranked = s;
    if (calibrated)
      for (size_t i = 0; i < ranked.size(); ++i) ranked[i].logit = conf[i];
    long correct = 0;
    for (size_t i = 0; i < conf.size(); ++i)
      correct += (conf[i] > 0.5 ? 1 : 0) == y[i];
    return json{{"ece", ece(conf, y, cfg.bins)},
                {"nll", nll(conf, y)},
                {"acc", 100.0 * correct / static_cast<double>(conf.size())},
                {"auc", auc(ranked)},
                {"hits", hits_at_k(ranked, cfg.hits_k)}};
  };

  json out;
  out["seed"] = seed;
  out["uncalibrated"] = metrics_json(scored, false);

  for (const std::string& name : cfg.calibrators) {
    std::string path = cfg.out_dir + "/calibrator_" + name + ".json";
    std::ifstream in(path);
    if (!in) throw ContractError("missing calibrator checkpoint: " + path);
    json j;
    in >> j;
    CalibratorKind kind = calibrator_kind_from_string(name);
    std::vector<ScoredEdge> calibrated;
    if (kind == CalibratorKind::InNOut) {
      calibrated = calibrate_innout(TemperatureNet::from_json(j), model,
                                    train_graph, x, split.test_pos,
                                    split.test_neg);
    } else if (kind == CalibratorKind::EmbMlp) {
      calibrated = calibrate_emb_mlp(EmbMlpCalibrator::from_json(j), model,
                                     train_graph, x, split.test_pos,
                                     split.test_neg);
    } else {
      calibrated = scored;
      FittedCalibrator::from_json(j).apply(calibrated);
    }
    out["calibrators"][name] = metrics_json(calibrated, true);
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream file(cfg.out_dir + "/eval.json");
  file << out.dump(2) << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_report(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  std::string md = report(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/report.md");
  out << md;
  std::cout << md;
  return 0;
}

int cmd_run(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f);
  ExperimentResult result = run_experiment(cfg);
  int failed = 0;
  for (const SeedRun& run : result.runs) {
    if (!run.ok) {
      ++failed;
      std::cerr << "seed " << run.seed << " failed: " << run.error << "\n";
    }
  }
  if (!cfg.out_dir.empty()) {
    std::string md = report_markdown(result.rows);
    std::ofstream out(cfg.out_dir + "/report.md");
    out << md;
  }
  std::cout << result.csv();
  if (failed == static_cast<int>(result.runs.size()))
    throw TrainingError("all seeds failed", 0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // training rebuilds megabyte-scale tapes every epoch; keep those buffers on
  // the heap freelist instead of round-tripping through mmap
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"GNN link-prediction calibration toolkit"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string model_path;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic SBM dataset");
  CLI::App* train = app.add_subcommand("train", "train one GNN (first seed)");
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "fit calibrators for a trained model");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate a model and fitted calibrators");
  CLI::App* report = app.add_subcommand("report", "render results.csv to markdown");
  CLI::App* run = app.add_subcommand("run", "full multi-seed experiment");
  for (CLI::App* cmd : {synth, train, calibrate, evaluate, report, run})
    add_common(cmd, f);
  calibrate->add_option("--model", model_path, "model checkpoint path");
  evaluate->add_option("--model", model_path, "model checkpoint path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(f);
    if (train->parsed()) return cmd_train(f);
    if (calibrate->parsed()) return cmd_calibrate(f, model_path);
    if (evaluate->parsed()) return cmd_evaluate(f, model_path);
    if (report->parsed()) return cmd_report(f);
    if (run->parsed()) return cmd_run(f);
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
