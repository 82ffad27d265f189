#include "edgecal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "edgecal/baselines.hpp"
#include "edgecal/error.hpp"
#include "edgecal/metrics.hpp"

namespace edgecal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCsvHeader =
    "dataset,model,calibrator,seed_count,ece_mean,ece_std,nll_mean,acc_mean,"
    "auc_mean,hits20_mean,hits20_std";

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path);
  out << content;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ContractError("config needs at least one seed");
  for (const std::string& c : calibrators)
    calibrator_kind_from_string(c);  // throws on unknown names
  encoder.validate();
  if (bins < 1 || hits_k < 1)
    throw ContractError("bins and hits_k must be positive");
  if (std::fabs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ContractError("split fractions must sum to 1");
  if (edge_file.empty()) sbm.validate();
  innout.validate();
}

json ExperimentConfig::to_json() const {
  return json{
      {"dataset",
       {{"name", dataset_name},
        {"edges", edge_file},
        {"features", feature_file},
        {"data_seed", data_seed},
        {"sbm",
         {{"blocks", sbm.blocks},
          {"nodes_per_block", sbm.nodes_per_block},
          {"p_in", sbm.p_in},
          {"p_out", sbm.p_out},
          {"feature_dim", sbm.feature_dim}}}}},
      {"encoder",
       {{"variant", to_string(encoder.kind)},
        {"layers", encoder.layers},
        {"hidden", encoder.hidden},
        {"out", encoder.out}}},
      {"scorer",
       {{"variant", scorer.kind == ScorerKind::Dot ? "dot" : "mlp"},
        {"psi", to_string(scorer.psi)},
        {"hidden", scorer.hidden}}},
      {"train",
       {{"epochs", train.epochs},
        {"lr", train.lr},
        {"negatives_per_positive", train.negatives_per_positive}}},
      {"split", {{"train", train_frac}, {"val", val_frac}, {"test", test_frac}}},
      {"calibrators", calibrators},
      {"seeds", seeds},
      {"innout",
       {{"gamma", to_string(innout.gamma)},
        {"lambda_grid", innout.lambda_grid},
        {"epochs", innout.epochs},
        {"lr", innout.lr},
        {"weight_decay", innout.weight_decay},
        {"hidden", innout.hidden}}},
      {"bins", bins},
      {"hits_k", hits_k},
      {"out_dir", out_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    c.dataset_name = d.value("name", c.dataset_name);
    c.edge_file = d.value("edges", c.edge_file);
    c.feature_file = d.value("features", c.feature_file);
    c.data_seed = d.value("data_seed", c.data_seed);
    if (d.contains("sbm")) {
      const json& s = d.at("sbm");
      c.sbm.blocks = s.value("blocks", c.sbm.blocks);
      c.sbm.nodes_per_block = s.value("nodes_per_block", c.sbm.nodes_per_block);
      c.sbm.p_in = s.value("p_in", c.sbm.p_in);
      c.sbm.p_out = s.value("p_out", c.sbm.p_out);
      c.sbm.feature_dim = s.value("feature_dim", c.sbm.feature_dim);
    }
  }
  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    if (e.contains("variant"))
      c.encoder.kind = encoder_kind_from_string(e.at("variant").get<std::string>());
    c.encoder.layers = e.value("layers", c.encoder.layers);
    c.encoder.hidden = e.value("hidden", c.encoder.hidden);
    c.encoder.out = e.value("out", c.encoder.out);
  }
  if (j.contains("scorer")) {
    const json& s = j.at("scorer");
    if (s.contains("variant"))
      c.scorer.kind = s.at("variant").get<std::string>() == "dot" ? ScorerKind::Dot
                                                                  : ScorerKind::Mlp;
    if (s.contains("psi"))
      c.scorer.psi = psi_kind_from_string(s.at("psi").get<std::string>());
    c.scorer.hidden = s.value("hidden", c.scorer.hidden);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.lr = t.value("lr", c.train.lr);
    c.train.negatives_per_positive =
        t.value("negatives_per_positive", c.train.negatives_per_positive);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    c.train_frac = s.value("train", c.train_frac);
    c.val_frac = s.value("val", c.val_frac);
    c.test_frac = s.value("test", c.test_frac);
  }
  if (j.contains("calibrators"))
    c.calibrators = j.at("calibrators").get<std::vector<std::string>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("innout")) {
    const json& i = j.at("innout");
    if (i.contains("gamma"))
      c.innout.gamma = gamma_kind_from_string(i.at("gamma").get<std::string>());
    if (i.contains("lambda_grid"))
      c.innout.lambda_grid = i.at("lambda_grid").get<std::vector<double>>();
    c.innout.epochs = i.value("epochs", c.innout.epochs);
    c.innout.lr = i.value("lr", c.innout.lr);
    c.innout.weight_decay = i.value("weight_decay", c.innout.weight_decay);
    c.innout.hidden = i.value("hidden", c.innout.hidden);
  }
  c.bins = j.value("bins", c.bins);
  c.hits_k = j.value("hits_k", c.hits_k);
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

const RunMetrics& SeedRun::metric(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return metrics[i];
  throw ContractError("no metrics recorded for " + name);
}

namespace {

std::vector<double> confidences_of(const std::vector<ScoredEdge>& scored,
                                   bool calibrated) {
  std::vector<double> conf(scored.size());
  for (size_t i = 0; i < scored.size(); ++i)
    conf[i] = calibrated ? scored[i].calibrated_or_raw() : scored[i].probability();
  return conf;
}

std::vector<int> labels_of(const std::vector<ScoredEdge>& scored) {
  std::vector<int> y(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) y[i] = scored[i].label;
  return y;
}

// Calibrated rows rank by the calibrated probability; uncalibrated by the
// raw logit. Both feed the same AUC/Hits definitions.
RunMetrics evaluate_scored(const std::vector<ScoredEdge>& scored, bool calibrated,
                           int bins, int hits_k) {
  std::vector<double> conf = confidences_of(scored, calibrated);
  std::vector<int> y = labels_of(scored);
  RunMetrics m;
  m.ece = ece(conf, y, bins);
  m.nll = nll(conf, y);
  long correct = 0;
  for (size_t i = 0; i < conf.size(); ++i)
    correct += (conf[i] > 0.5 ? 1 : 0) == y[i];
  m.acc = 100.0 * static_cast<double>(correct) / static_cast<double>(conf.size());
  std::vector<ScoredEdge> ranked = scored;
  if (calibrated)
    for (size_t i = 0; i < ranked.size(); ++i) ranked[i].logit = conf[i];
  m.auc = auc(ranked);
  m.hits = hits_at_k(ranked, hits_k);
  return m;
}

void write_reliability(const std::string& dir, const std::string& name,
                       const std::vector<ScoredEdge>& scored, bool calibrated,
                       int bins) {
  if (dir.empty()) return;
  ReliabilityDiagram d = reliability_diagram(confidences_of(scored, calibrated),
                                             labels_of(scored), bins);
  write_file(dir + "/reliability_" + name + ".csv", d.to_csv());
  write_file(dir + "/reliability_" + name + ".svg", d.to_svg());
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& cfg, const Graph& g, const Matrix& x,
                 uint64_t seed, const std::string& out_dir) {
  SeedRun run;
  run.seed = seed;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  EdgeSplit split =
      split_edges(g, cfg.train_frac, cfg.val_frac, cfg.test_frac, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;

  TrainResult tr;
  if (out_dir.empty()) {
    tr = train(cfg.encoder, cfg.scorer, g, x, split, tc);
  } else {
    std::ofstream log(out_dir + "/train_log.jsonl");
    tr = train(cfg.encoder, cfg.scorer, g, x, split, tc, &log);
  }

  Graph train_graph(g.node_count(), split.train_pos);
  GraphOps ops(train_graph);
  std::vector<ScoredEdge> test_scored =
      score_edges_plain(tr.model, ops, x, split.test_pos, split.test_neg);

  json run_json;
  run_json["seed"] = seed;
  run_json["best_epoch"] = tr.best_epoch;
  run_json["best_val_auc"] = tr.best_val_auc;

  run.names.push_back("uncalibrated");
  run.metrics.push_back(evaluate_scored(test_scored, false, cfg.bins, cfg.hits_k));
  write_reliability(out_dir, "uncalibrated", test_scored, false, cfg.bins);

  std::vector<CalibrationTriple> triples =
      build_calibration_set(g, split, seed ^ 0x5ca1ab1eULL);
  std::vector<Edge> calib_pos, calib_neg;
  for (const CalibrationTriple& t : triples)
    (t.label ? calib_pos : calib_neg).push_back({t.u, t.v});
  std::vector<ScoredEdge> fit_scored =
      score_edges_plain(tr.model, ops, x, calib_pos, calib_neg);

  for (const std::string& name : cfg.calibrators) {
    CalibratorKind kind = calibrator_kind_from_string(name);
    std::vector<ScoredEdge> calibrated;
    json extra;
    switch (kind) {
      case CalibratorKind::InNOut: {
        InNOutConfig ic = cfg.innout;
        ic.seed = seed;
        TemperatureNet net = fit_innout(tr.model, g, x, triples, split, ic);
        calibrated = calibrate_innout(net, tr.model, train_graph, x,
                                      split.test_pos, split.test_neg);
        extra["chosen_lambda"] = net.chosen_lambda;
        if (!out_dir.empty())
          write_file(out_dir + "/calibrator_" + name + ".json",
                     net.to_json().dump(2));
        break;
      }
      case CalibratorKind::EmbMlp: {
        InNOutConfig ic = cfg.innout;
        ic.seed = seed;
        EmbMlpCalibrator cal = fit_emb_mlp(tr.model, g, x, triples, split, ic);
        calibrated = calibrate_emb_mlp(cal, tr.model, train_graph, x,
                                       split.test_pos, split.test_neg);
        extra["chosen_lambda"] = cal.chosen_lambda;
        if (!out_dir.empty())
          write_file(out_dir + "/calibrator_" + name + ".json",
                     cal.to_json().dump(2));
        break;
      }
      default: {
        FittedCalibrator fc = fit_calibrator(kind, fit_scored);
        calibrated = test_scored;
        fc.apply(calibrated);
        if (kind == CalibratorKind::Temperature)
          extra["temperature"] = fc.temperature;
        if (!out_dir.empty())
          write_file(out_dir + "/calibrator_" + name + ".json",
                     fc.to_json().dump(2));
        break;
      }
    }
    RunMetrics m = evaluate_scored(calibrated, true, cfg.bins, cfg.hits_k);
    run.names.push_back(name);
    run.metrics.push_back(m);
    write_reliability(out_dir, name, calibrated, true, cfg.bins);
    extra["ece"] = m.ece;
    extra["nll"] = m.nll;
    extra["acc"] = m.acc;
    extra["auc"] = m.auc;
    extra["hits"] = m.hits;
    run_json["calibrators"][name] = extra;
  }

  const RunMetrics& u = run.metrics[0];
  run_json["uncalibrated"] = {{"ece", u.ece},
                              {"nll", u.nll},
                              {"acc", u.acc},
                              {"auc", u.auc},
                              {"hits", u.hits}};
  if (!out_dir.empty()) {
    write_file(out_dir + "/model.json", model_to_json(tr.model).dump(2));
    write_file(out_dir + "/run.json", run_json.dump(2));
  }
  run.ok = true;
  return run;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Graph g;
  Matrix x;
  if (cfg.edge_file.empty())
    std::tie(g, x) = generate_sbm(cfg.sbm, cfg.data_seed);
  else
    std::tie(g, x) = load_dataset(cfg.edge_file, cfg.feature_file);

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_file(cfg.out_dir + "/config.json", cfg.to_json().dump(2));
  }

  ExperimentResult result;
  for (uint64_t seed : cfg.seeds) {
    std::string seed_dir =
        cfg.out_dir.empty() ? "" : cfg.out_dir + "/seed" + std::to_string(seed);
    try {
      result.runs.push_back(run_seed(cfg, g, x, seed, seed_dir));
    } catch (const std::exception& e) {
      SeedRun failed;
      failed.seed = seed;
      failed.error = e.what();
      result.runs.push_back(std::move(failed));
    }
  }

  std::vector<std::string> row_names = {"uncalibrated"};
  row_names.insert(row_names.end(), cfg.calibrators.begin(),
                   cfg.calibrators.end());
  for (const std::string& name : row_names) {
    std::vector<double> e, n, a, u, h;
    for (const SeedRun& run : result.runs) {
      if (!run.ok) continue;
      const RunMetrics& m = run.metric(name);
      e.push_back(m.ece);
      n.push_back(m.nll);
      a.push_back(m.acc);
      u.push_back(m.auc);
      h.push_back(m.hits);
    }
    if (e.empty()) continue;
    ResultsRow row;
    row.dataset = cfg.dataset_name;
    row.model = to_string(cfg.encoder.kind);
    row.calibrator = name;
    row.seed_count = static_cast<int>(e.size());
    std::tie(row.ece_mean, row.ece_std) = mean_std(e);
    row.nll_mean = mean_std(n).first;
    row.acc_mean = mean_std(a).first;
    row.auc_mean = mean_std(u).first;
    std::tie(row.hits_mean, row.hits_std) = mean_std(h);
    result.rows.push_back(std::move(row));
  }

  if (!cfg.out_dir.empty()) {
    write_file(cfg.out_dir + "/results.csv", result.csv());
    json log = json::array();
    for (const SeedRun& run : result.runs)
      log.push_back({{"seed", run.seed}, {"ok", run.ok}, {"error", run.error}});
    write_file(cfg.out_dir + "/run_log.json", log.dump(2));
  }
  return result;
}

std::string ExperimentResult::csv() const {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const ResultsRow& r : rows) {
    out << r.dataset << ',' << r.model << ',' << r.calibrator << ','
        << r.seed_count << ',' << fmt(100.0 * r.ece_mean) << ','
        << fmt(100.0 * r.ece_std) << ',' << fmt(r.nll_mean) << ','
        << fmt(r.acc_mean) << ',' << fmt(r.auc_mean) << ',' << fmt(r.hits_mean)
        << ',' << fmt(r.hits_std) << "\n";
  }
  return out.str();
}

std::vector<ResultsRow> parse_results_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ContractError("results.csv header mismatch");
  std::vector<ResultsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw ContractError("results.csv row width mismatch");
    ResultsRow r;
    r.dataset = cells[0];
    r.model = cells[1];
    r.calibrator = cells[2];
    r.seed_count = std::stoi(cells[3]);
    r.ece_mean = std::stod(cells[4]) / 100.0;
    r.ece_std = std::stod(cells[5]) / 100.0;
    r.nll_mean = std::stod(cells[6]);
    r.acc_mean = std::stod(cells[7]);
    r.auc_mean = std::stod(cells[8]);
    r.hits_mean = std::stod(cells[9]);
    r.hits_std = std::stod(cells[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string report_markdown(const std::vector<ResultsRow>& rows) {
  if (rows.empty()) throw ContractError("no result rows to report");
  // group rows by (dataset, model), preserving first-seen order
  std::vector<std::pair<std::string, std::vector<size_t>>> groups;
  for (size_t i = 0; i < rows.size(); ++i) {
    std::string key = rows[i].dataset + " / " + rows[i].model;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == key; });
    if (it == groups.end())
      groups.push_back({key, {i}});
    else
      it->second.push_back(i);
  }

  std::ostringstream out;
  out << "# Calibration results\n\n";
  out << "ECE columns are x100. The lowest mean ECE per table is bold; "
         "ties are all bold.\n";
  for (const auto& [key, idx] : groups) {
    out << "\n## " << key << "\n\n";
    out << "| calibrator | seeds | ECE | NLL | accuracy % | AUC | Hits@20 % |\n";
    out << "|---|---|---|---|---|---|---|\n";
    double best = rows[idx[0]].ece_mean;
    for (size_t i : idx) best = std::min(best, rows[i].ece_mean);
    for (size_t i : idx) {
      const ResultsRow& r = rows[i];
      bool is_best = r.ece_mean == best;
      auto cell = [&](const std::string& s) {
        return is_best ? "**" + s + "**" : s;
      };
      std::ostringstream ece_cell, hits_cell;
      ece_cell.precision(4);
      ece_cell << 100.0 * r.ece_mean << " ± " << 100.0 * r.ece_std;
      hits_cell.precision(4);
      hits_cell << r.hits_mean << " ± " << r.hits_std;
      out << "| " << cell(r.calibrator) << " | " << r.seed_count << " | "
          << cell(ece_cell.str()) << " | " << cell(fmt(r.nll_mean)) << " | "
          << cell(fmt(r.acc_mean)) << " | " << cell(fmt(r.auc_mean)) << " | "
          << cell(hits_cell.str()) << " |\n";
    }
  }
  return out.str();
}

std::string report(const std::string& results_dir) {
  std::string path = results_dir + "/results.csv";
  std::ifstream in(path);
  if (!in) throw ContractError("no results.csv in " + results_dir);
  std::stringstream buf;
  buf << in.rdbuf();
  return report_markdown(parse_results_csv(buf.str()));
}

}  // namespace edgecal
