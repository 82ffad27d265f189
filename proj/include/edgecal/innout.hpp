#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edgecal/encoders.hpp"
#include "edgecal/graph.hpp"
#include "edgecal/trainer.hpp"

namespace edgecal {

enum class GammaKind { Euclidean, Difference };

GammaKind gamma_kind_from_string(const std::string& s);
std::string to_string(GammaKind k);

// Discrepancy between an edge embedding and its counterfactual twin.
// Euclidean yields a single value; difference keeps the full vector.
std::vector<double> gamma(const std::vector<double>& h_uv,
                          const std::vector<double>& h_plus_uv, GammaKind kind);

struct InNOutConfig {
  GammaKind gamma = GammaKind::Euclidean;
  std::vector<double> lambda_grid = {0.1, 0.5, 1.0, 2.0, 5.0};
  int epochs = 5000;
  double lr = 1e-4;
  double weight_decay = 5e-8;
  int hidden = 16;
  int ece_bins = 15;
  uint64_t seed = 0;

  void validate() const;
};

// Sign-switched pair of temperature MLPs with softplus heads. The c1 branch
// serves positive predictions (s > 0), c2 the rest.
struct TemperatureNet {
  GammaKind gamma = GammaKind::Euclidean;
  int input_dim = 0;
  ParamStore params;  // c1.W1, c1.b1, c1.W2, c1.b2, c2.*
  bool fitted = false;
  double chosen_lambda = 0.0;

  // Strictly positive for every finite input; branch picked by sign(logit),
  // with s = 0 routed to c2.
  double temperature(const std::vector<double>& gamma_value, double logit) const;

  nlohmann::json to_json() const;
  static TemperatureNet from_json(const nlohmann::json& j);
};

// Ablation baseline: a single softplus-headed MLP over the original edge
// embedding, trained with the same loss and schedule.
struct EmbMlpCalibrator {
  int input_dim = 0;
  ParamStore params;  // c.W1, c.b1, c.W2, c.b2
  bool fitted = false;
  double chosen_lambda = 0.0;

  double temperature(const std::vector<double>& edge_emb) const;

  nlohmann::json to_json() const;
  static EmbMlpCalibrator from_json(const nlohmann::json& j);
};

// Incremental counterfactual evaluator over a frozen model. Caches the base
// per-layer embeddings once; each edge query recomputes only the rows inside
// the edge's receptive field against the toggled graph.
class CounterfactualEngine {
 public:
  struct EdgeView {
    std::vector<double> h_uv;       // observed-graph edge embedding
    std::vector<double> h_plus_uv;  // toggled-graph edge embedding
    double logit = 0.0;             // scorer on h_uv
    size_t rows_recomputed = 0;     // locality statistic
  };

  CounterfactualEngine(const Model& model, const Graph& g, const Matrix& x);

  EdgeView edge_view(int u, int v) const;
  // Full H+ by re-encoding the toggled graph; the equivalence oracle.
  Matrix full_counterfactual(int u, int v) const;
  std::vector<double> base_row(int v) const;
  const Graph& graph() const { return g_; }

 private:
  const Model* model_;
  Graph g_;
  GraphOps ops_;
  std::vector<Matrix> layers_;  // base h^(0..L)
};

// Training positives labeled 1 plus an equal count of fresh uniform
// negatives labeled 0, excluding E and the split's evaluation negatives.
std::vector<CalibrationTriple> build_calibration_set(const Graph& g,
                                                     const EdgeSplit& split,
                                                     uint64_t seed);

// Fits the sign-switched temperature nets on the calibration set with the
// GNN frozen, selecting lambda by validation ECE.
TemperatureNet fit_innout(const Model& model, const Graph& g, const Matrix& x,
                          const std::vector<CalibrationTriple>& calibration,
                          const EdgeSplit& split, const InNOutConfig& cfg);

EmbMlpCalibrator fit_emb_mlp(const Model& model, const Graph& g, const Matrix& x,
                             const std::vector<CalibrationTriple>& calibration,
                             const EdgeSplit& split, const InNOutConfig& cfg);

// Per-edge temperature and calibrated probability for labeled edges.
std::vector<ScoredEdge> calibrate_innout(const TemperatureNet& net,
                                         const Model& model, const Graph& g,
                                         const Matrix& x,
                                         const std::vector<Edge>& positives,
                                         const std::vector<Edge>& negatives);

std::vector<ScoredEdge> calibrate_emb_mlp(const EmbMlpCalibrator& cal,
                                          const Model& model, const Graph& g,
                                          const Matrix& x,
                                          const std::vector<Edge>& positives,
                                          const std::vector<Edge>& negatives);

}  // namespace edgecal
