#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edgecal/dataio.hpp"
#include "edgecal/encoders.hpp"
#include "edgecal/innout.hpp"
#include "edgecal/trainer.hpp"

namespace edgecal {

struct ExperimentConfig {
  std::string dataset_name = "sbm";
  std::string edge_file;     // empty -> synthetic SBM
  std::string feature_file;  // empty -> fallback features (real datasets only)
  SbmSpec sbm;
  uint64_t data_seed = 42;

  EncoderConfig encoder;
  ScorerConfig scorer;
  TrainConfig train;  // seed field is overridden per run
  double train_frac = 0.8, val_frac = 0.1, test_frac = 0.1;

  std::vector<std::string> calibrators = {"temp", "iso",    "hist",
                                          "bbq",  "innout", "embmlp"};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  InNOutConfig innout;  // seed field is overridden per run
  int bins = 15;        // reporting/evaluation bins
  int hits_k = 20;
  std::string out_dir = "results";

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// Test-set metrics of one (seed, calibrator) cell. ECE is a fraction in
// [0,1]; accuracy and Hits@k are percentages.
struct RunMetrics {
  double ece = 0.0;
  double nll = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  double hits = 0.0;
};

struct SeedRun {
  uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when the seed aborted
  std::vector<std::string> names;  // "uncalibrated" then the calibrators
  std::vector<RunMetrics> metrics;

  const RunMetrics& metric(const std::string& name) const;
};

struct ResultsRow {
  std::string dataset, model, calibrator;
  int seed_count = 0;
  double ece_mean = 0, ece_std = 0;
  double nll_mean = 0, acc_mean = 0, auc_mean = 0;
  double hits_mean = 0, hits_std = 0;
};

struct ExperimentResult {
  std::vector<SeedRun> runs;
  std::vector<ResultsRow> rows;

  // Pinned header:
  // dataset,model,calibrator,seed_count,ece_mean,ece_std,nll_mean,acc_mean,
  // auc_mean,hits20_mean,hits20_std  (ECE columns are x100, table-style)
  std::string csv() const;
};

// One seed end to end: split, train, evaluate uncalibrated, fit and evaluate
// each calibrator. Artifacts go under <out_dir>/seed<seed>/ when out_dir is
// non-empty. Throws on failure; run_experiment catches per seed.
SeedRun run_seed(const ExperimentConfig& cfg, const Graph& g, const Matrix& x,
                 uint64_t seed, const std::string& out_dir);

// Full protocol over all configured seeds; writes results.csv and per-seed
// artifacts under cfg.out_dir (unless empty). Failed seeds are recorded and
// excluded from aggregation.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<ResultsRow> parse_results_csv(const std::string& csv);

// Markdown summary of a results.csv; the lowest-ECE row per (dataset, model)
// group is bolded, ties all bolded.
std::string report_markdown(const std::vector<ResultsRow>& rows);
std::string report(const std::string& results_dir);  // reads results.csv

}  // namespace edgecal
