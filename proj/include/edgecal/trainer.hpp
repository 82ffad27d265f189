#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "edgecal/encoders.hpp"
#include "edgecal/graph.hpp"

namespace edgecal {

struct TrainConfig {
  int epochs = 400;
  double lr = 1e-3;
  int negatives_per_positive = 1;
  uint64_t seed = 0;
};

// Edge with its logit and (optionally) calibration fields.
struct ScoredEdge {
  int u = 0;
  int v = 0;
  double logit = 0.0;
  int label = -1;           // -1 when unknown
  double temperature = 1.0;
  std::optional<double> calibrated;  // p-hat, filled by a calibrator

  double probability() const;          // sigmoid(logit)
  double calibrated_or_raw() const;    // p-hat if present, else probability
  int predicted_label() const { return logit > 0.0 ? 1 : 0; }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_auc = 0.0;
};

struct TrainResult {
  Model model;                     // parameters at the best-validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_val_auc = 0.0;
};

// Link-prediction training: BCE over train positives plus per-epoch resampled
// negatives, Adam, best-validation-AUC checkpointing. Message passing uses
// train_pos edges only.
TrainResult train(const EncoderConfig& enc, const ScorerConfig& sc,
                  const Graph& g, const Matrix& x, const EdgeSplit& split,
                  const TrainConfig& cfg, std::ostream* jsonl_log = nullptr);

// Plain-path logits for a set of labeled edges on the given graph.
std::vector<ScoredEdge> score_edges_plain(const Model& model, const GraphOps& ops,
                                          const Matrix& x,
                                          const std::vector<Edge>& positives,
                                          const std::vector<Edge>& negatives);

// Rank-statistic AUC with ties counted 0.5. Requires both classes.
double auc(const std::vector<ScoredEdge>& scored);
// Percent of positives whose logit exceeds the k-th highest negative logit.
double hits_at_k(const std::vector<ScoredEdge>& scored, int k);
// Percent predicted correctly at the s = 0 threshold.
double accuracy(const std::vector<ScoredEdge>& scored);

}  // namespace edgecal
