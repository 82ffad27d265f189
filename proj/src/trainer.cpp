#include "edgecal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "edgecal/error.hpp"

namespace edgecal {

double ScoredEdge::probability() const { return stable_sigmoid(logit); }

double ScoredEdge::calibrated_or_raw() const {
  return calibrated ? *calibrated : probability();
}

TrainResult train(const EncoderConfig& enc, const ScorerConfig& sc,
                  const Graph& g, const Matrix& x, const EdgeSplit& split,
                  const TrainConfig& cfg, std::ostream* jsonl_log) {
  if (cfg.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (cfg.negatives_per_positive < 1)
    throw ContractError("train: negatives-per-positive must be >= 1");
  if (x.rows != g.node_count())
    throw ContractError("train: feature rows do not match node count");
  if (split.train_pos.empty()) throw ContractError("train: empty training split");

  // Message passing sees only training edges.
  Graph train_graph(g.node_count(), split.train_pos);
  GraphOps ops(train_graph);

  TrainResult result;
  result.model = make_model(enc, sc, x.cols, cfg.seed);
  Model& model = result.model;

  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);
  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = 0.0;

  long n_pos = static_cast<long>(split.train_pos.size());
  long n_neg = n_pos * cfg.negatives_per_positive;

  ParamStore best_params = model.params;
  double best_auc = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<Edge> negs = sample_negative_edges(g, n_neg, rng);
    std::vector<Edge> batch = split.train_pos;
    batch.insert(batch.end(), negs.begin(), negs.end());
    Matrix labels(static_cast<int>(batch.size()), 1, 0.0);
    for (long i = 0; i < n_pos; ++i) labels.data[i] = 1.0;

    Tape tape;
    ParamBind bind(tape, model.params);
    Var xv = tape.constant(x);
    Var logits = model_logits(tape, model, bind, ops, xv, batch);
    Var loss = tape.bce_with_logits(logits, labels, /*mean_reduction=*/true);
    double loss_value = tape.value(loss).scalar();
    if (!std::isfinite(loss_value))
      throw TrainingError("training diverged: non-finite loss", epoch);

    GradientStore grads = tape.backward(loss);
    model.params.apply_gradients(bind.vars, grads, adam);

    std::vector<ScoredEdge> val = score_edges_plain(model, ops, x, split.val_pos,
                                                    split.val_neg);
    double val_auc = auc(val);
    result.log.push_back({epoch, loss_value, val_auc});
    if (jsonl_log)
      *jsonl_log << "{\"epoch\":" << epoch << ",\"loss\":" << loss_value
                 << ",\"val_auc\":" << val_auc << "}\n";
    if (val_auc > best_auc) {
      best_auc = val_auc;
      best_epoch = epoch;
      best_params = model.params;
    }
  }

  model.params = best_params;
  result.best_epoch = best_epoch;
  result.best_val_auc = best_auc;
  return result;
}

std::vector<ScoredEdge> score_edges_plain(const Model& model, const GraphOps& ops,
                                          const Matrix& x,
                                          const std::vector<Edge>& positives,
                                          const std::vector<Edge>& negatives) {
  Matrix h = encode_plain(model, ops, x);
  auto row = [&h](int v) {
    return std::vector<double>(h.data.begin() + static_cast<size_t>(v) * h.cols,
                               h.data.begin() + static_cast<size_t>(v + 1) * h.cols);
  };
  std::vector<ScoredEdge> out;
  out.reserve(positives.size() + negatives.size());
  auto score_one = [&](const Edge& e, int label) {
    std::vector<double> emb =
        edge_embedding_plain(model.scorer, row(e.first), row(e.second));
    ScoredEdge s;
    s.u = e.first;
    s.v = e.second;
    s.logit = score_edge_plain(model, emb);
    s.label = label;
    out.push_back(s);
  };
  for (const Edge& e : positives) score_one(e, 1);
  for (const Edge& e : negatives) score_one(e, 0);
  return out;
}

double auc(const std::vector<ScoredEdge>& scored) {
  long p = 0, n = 0;
  for (const ScoredEdge& s : scored) {
    if (s.label == 1)
      ++p;
    else if (s.label == 0)
      ++n;
    else
      throw ContractError("auc: unlabeled edge");
  }
  if (p == 0 || n == 0) throw ContractError("auc: both classes required");

  std::vector<std::pair<double, int>> v;
  v.reserve(scored.size());
  for (const ScoredEdge& s : scored) v.emplace_back(s.logit, s.label);
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // average ranks over tie groups
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (v[k].second == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  return (pos_rank_sum - static_cast<double>(p) * (p + 1) / 2.0) /
         (static_cast<double>(p) * static_cast<double>(n));
}

double hits_at_k(const std::vector<ScoredEdge>& scored, int k) {
  if (k < 1) throw ContractError("hits_at_k: k must be >= 1");
  std::vector<double> neg;
  long pos_total = 0;
  for (const ScoredEdge& s : scored) {
    if (s.label == 1)
      ++pos_total;
    else if (s.label == 0)
      neg.push_back(s.logit);
    else
      throw ContractError("hits_at_k: unlabeled edge");
  }
  if (static_cast<long>(neg.size()) < k)
    throw ContractError("hits_at_k: fewer than k negatives");
  if (pos_total == 0) throw ContractError("hits_at_k: no positives");
  std::nth_element(neg.begin(), neg.begin() + (k - 1), neg.end(),
                   std::greater<double>());
  double threshold = neg[k - 1];
  long hits = 0;
  for (const ScoredEdge& s : scored)
    if (s.label == 1 && s.logit > threshold) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pos_total);
}

double accuracy(const std::vector<ScoredEdge>& scored) {
  if (scored.empty()) throw ContractError("accuracy: empty input");
  long correct = 0;
  for (const ScoredEdge& s : scored) {
    if (s.label != 0 && s.label != 1)
      throw ContractError("accuracy: unlabeled edge");
    if (s.predicted_label() == s.label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(scored.size());
}

}  // namespace edgecal
