#include "edgecal/innout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "edgecal/error.hpp"
#include "edgecal/metrics.hpp"

namespace edgecal {

using nlohmann::json;

GammaKind gamma_kind_from_string(const std::string& s) {
  if (s == "euclidean") return GammaKind::Euclidean;
  if (s == "difference") return GammaKind::Difference;
  throw ContractError("unknown gamma variant: " + s);
}

std::string to_string(GammaKind k) {
  return k == GammaKind::Euclidean ? "euclidean" : "difference";
}

std::vector<double> gamma(const std::vector<double>& h_uv,
                          const std::vector<double>& h_plus_uv, GammaKind kind) {
  if (h_uv.size() != h_plus_uv.size())
    throw DimensionError("gamma: embedding dims differ");
  if (kind == GammaKind::Euclidean) {
    double acc = 0.0;
    for (size_t i = 0; i < h_uv.size(); ++i) {
      double d = h_uv[i] - h_plus_uv[i];
      acc += d * d;
    }
    return {std::sqrt(acc)};
  }
  std::vector<double> out(h_uv.size());
  for (size_t i = 0; i < h_uv.size(); ++i) out[i] = h_uv[i] - h_plus_uv[i];
  return out;
}

void InNOutConfig::validate() const {
  if (lambda_grid.empty()) throw ContractError("empty lambda grid");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw ContractError("lambda values must be positive");
  if (epochs < 1) throw ContractError("calibration epochs must be positive");
  if (!(lr > 0.0)) throw ContractError("calibration lr must be positive");
  if (hidden < 1) throw ContractError("calibration hidden dim must be positive");
  if (ece_bins < 1) throw ContractError("ece bin count must be positive");
}

namespace {

// Row-vector times matrix, mirroring matmul's k-outer accumulation with the
// zero skip so localized recomputes stay bit-identical to the full path.
std::vector<double> row_times(const double* a, int len, const Matrix& b) {
  if (len != b.rows) throw DimensionError("row_times shape mismatch");
  std::vector<double> out(b.cols, 0.0);
  for (int k = 0; k < len; ++k) {
    double aik = a[k];
    if (aik == 0.0) continue;
    const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
    for (int j = 0; j < b.cols; ++j) out[j] += aik * brow[j];
  }
  return out;
}

std::string lkey(int layer, const char* suffix) {
  return "enc.l" + std::to_string(layer) + "." + suffix;
}

Matrix xavier_uniform(int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix w(fan_in, fan_out);
  for (double& v : w.data) v = dist(rng);
  return w;
}

// Two-layer relu MLP with a softplus head; strictly positive output.
double mlp_temperature_plain(const ParamStore& p, const std::string& prefix,
                             const std::vector<double>& in) {
  const Matrix& w1 = p.get(prefix + ".W1");
  const Matrix& b1 = p.get(prefix + ".b1");
  const Matrix& w2 = p.get(prefix + ".W2");
  const Matrix& b2 = p.get(prefix + ".b2");
  if (static_cast<int>(in.size()) != w1.rows)
    throw DimensionError("temperature net input dim " + std::to_string(in.size()) +
                         " does not match " + std::to_string(w1.rows));
  double z = b2.at(0, 0);
  for (int j = 0; j < w1.cols; ++j) {
    double a = b1.at(0, j);
    for (int k = 0; k < w1.rows; ++k) a += in[k] * w1.at(k, j);
    if (a > 0.0) z += a * w2.at(j, 0);
  }
  return stable_softplus(z);
}

Var mlp_temperature(Tape& tape, const ParamBind& params, const std::string& prefix,
                    Var in) {
  Var z1 = tape.relu(tape.add_row_bias(tape.matmul(in, params[prefix + ".W1"]),
                                       params[prefix + ".b1"]));
  return tape.softplus(tape.add_row_bias(tape.matmul(z1, params[prefix + ".W2"]),
                                         params[prefix + ".b2"]));
}

void add_mlp_params(ParamStore& store, const std::string& prefix, int in_dim,
                    int hidden, Rng& rng) {
  store.add(prefix + ".W1", xavier_uniform(in_dim, hidden, rng));
  store.add(prefix + ".b1", Matrix(1, hidden, 0.0));
  // Zero output layer with softplus(b2) = 1 makes the initial net the
  // identity calibrator (T = 1 everywhere); fitting can only move away from
  // the uncalibrated probabilities when the loss asks for it.
  store.add(prefix + ".W2", Matrix(hidden, 1, 0.0));
  store.add(prefix + ".b2", Matrix(1, 1, std::log(std::exp(1.0) - 1.0)));
}

struct Branch {
  std::string prefix;
  Matrix gam;             // branch inputs, one row per member
  std::vector<int> idx;   // positions in the full sample order
};

struct EdgeFeatures {
  std::vector<std::vector<double>> inputs;  // gamma or edge embedding
  std::vector<double> logits;
  std::vector<int> labels;
};

// Validation ECE under the current params, routing rows to branches the same
// way the fit samples are routed (sign of the raw logit).
double validation_ece(const ParamStore& params, const std::vector<Branch>& branches,
                      const EdgeFeatures& val, int bins) {
  std::vector<double> conf(val.logits.size());
  for (size_t i = 0; i < val.logits.size(); ++i) {
    const std::string& prefix =
        branches.size() == 1 ? branches[0].prefix
                             : branches[val.logits[i] > 0.0 ? 0 : 1].prefix;
    double t = mlp_temperature_plain(params, prefix, val.inputs[i]);
    conf[i] = stable_sigmoid(val.logits[i] / t);
  }
  return ece(conf, val.labels, bins);
}

// L_NLL (sum) + L_Cal + lambda * L_ECE over fixed per-edge inputs, with only
// the temperature MLPs trainable. When a validation set is given the params
// with the best validation ECE seen along the trajectory (checked every 25
// epochs, including the identity start) are restored at the end.
void fit_temperature_params(ParamStore& params, const std::vector<Branch>& branches,
                            const Matrix& logits, const Matrix& labels,
                            double lambda, const InNOutConfig& cfg,
                            const EdgeFeatures* val) {
  AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  bool track = val != nullptr && !val->logits.empty();
  ParamStore best_params = params;
  double best_ece = track
      ? validation_ece(params, branches, *val, cfg.ece_bins)
      : std::numeric_limits<double>::infinity();
  int m = logits.rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    ParamBind bind(tape, params);
    Var t;
    if (branches.size() == 1) {
      t = mlp_temperature(tape, bind, branches[0].prefix,
                          tape.constant(branches[0].gam));
    } else {
      Var t1 = mlp_temperature(tape, bind, branches[0].prefix,
                               tape.constant(branches[0].gam));
      Var t2 = mlp_temperature(tape, bind, branches[1].prefix,
                               tape.constant(branches[1].gam));
      t = tape.merge_rows(t1, t2, branches[0].idx, branches[1].idx, m);
    }
    Var z = tape.div_const_by(logits, t);
    Var p = tape.sigmoid(z);
    Var loss = tape.add(tape.bce_with_logits(z, labels, false),
                        tape.add(tape.confidence_penalty(p, labels),
                                 tape.scale(tape.ece_loss(p, labels, cfg.ece_bins),
                                            lambda)));
    double lv = tape.value(loss).scalar();
    if (!std::isfinite(lv))
      throw TrainingError("non-finite calibration loss", epoch);
    GradientStore grads = tape.backward(loss);
    params.apply_gradients(bind.vars, grads, ac);
    if (track && ((epoch + 1) % 25 == 0 || epoch + 1 == cfg.epochs)) {
      double e = validation_ece(params, branches, *val, cfg.ece_bins);
      if (e < best_ece) {
        best_ece = e;
        best_params = params;
      }
    }
  }
  if (track) params = best_params;
}

}  // namespace

double TemperatureNet::temperature(const std::vector<double>& gamma_value,
                                   double logit) const {
  // s = 0 is routed to the c2 branch.
  return mlp_temperature_plain(params, logit > 0.0 ? "c1" : "c2", gamma_value);
}

json TemperatureNet::to_json() const {
  return json{{"magic", "EDGECAL1"},
              {"kind", "tempnet"},
              {"gamma", to_string(gamma)},
              {"input_dim", input_dim},
              {"chosen_lambda", chosen_lambda},
              {"fitted", fitted},
              {"params", params_to_json(params)}};
}

TemperatureNet TemperatureNet::from_json(const json& j) {
  if (j.value("magic", "") != "EDGECAL1" || j.value("kind", "") != "tempnet")
    throw ContractError("not an EDGECAL1 temperature net checkpoint");
  TemperatureNet net;
  net.gamma = gamma_kind_from_string(j.at("gamma").get<std::string>());
  net.input_dim = j.at("input_dim").get<int>();
  net.chosen_lambda = j.at("chosen_lambda").get<double>();
  net.fitted = j.at("fitted").get<bool>();
  net.params = params_from_json(j.at("params"));
  return net;
}

double EmbMlpCalibrator::temperature(const std::vector<double>& edge_emb) const {
  return mlp_temperature_plain(params, "c", edge_emb);
}

json EmbMlpCalibrator::to_json() const {
  return json{{"magic", "EDGECAL1"},
              {"kind", "embmlp"},
              {"input_dim", input_dim},
              {"chosen_lambda", chosen_lambda},
              {"fitted", fitted},
              {"params", params_to_json(params)}};
}

EmbMlpCalibrator EmbMlpCalibrator::from_json(const json& j) {
  if (j.value("magic", "") != "EDGECAL1" || j.value("kind", "") != "embmlp")
    throw ContractError("not an EDGECAL1 emb-mlp checkpoint");
  EmbMlpCalibrator cal;
  cal.input_dim = j.at("input_dim").get<int>();
  cal.chosen_lambda = j.at("chosen_lambda").get<double>();
  cal.fitted = j.at("fitted").get<bool>();
  cal.params = params_from_json(j.at("params"));
  return cal;
}

CounterfactualEngine::CounterfactualEngine(const Model& model, const Graph& g,
                                           const Matrix& x)
    : model_(&model), g_(g), ops_(g), layers_(encode_layers_plain(model, ops_, x)) {
  if (x.rows != g.node_count())
    throw DimensionError("feature rows do not match node count");
}

std::vector<double> CounterfactualEngine::base_row(int v) const {
  const Matrix& h = layers_.back();
  if (v < 0 || v >= h.rows) throw ContractError("node id out of range");
  const double* p = &h.data[static_cast<size_t>(v) * h.cols];
  return std::vector<double>(p, p + h.cols);
}

CounterfactualEngine::EdgeView CounterfactualEngine::edge_view(int u, int v) const {
  if (u == v) throw ContractError("edge_view: u must differ from v");
  if (u < 0 || v < 0 || u >= g_.node_count() || v >= g_.node_count())
    throw ContractError("edge_view: node id out of range");
  const Model& model = *model_;
  bool added = !g_.has_edge(u, v);

  auto toggled_degree = [&](int w) {
    return g_.degree(w) + ((w == u || w == v) ? (added ? 1 : -1) : 0);
  };
  // Sorted toggled neighbor list; differs from the base list only at u and v.
  auto toggled_neighbors = [&](int w) {
    auto [lo, hi] = g_.neighbors(w);
    std::vector<int> nb;
    nb.reserve((hi - lo) + 1);
    int other = w == u ? v : w == v ? u : -1;
    if (other < 0) {
      nb.assign(lo, hi);
    } else if (added) {
      bool emitted = false;
      for (const int* p = lo; p != hi; ++p) {
        if (!emitted && *p > other) {
          nb.push_back(other);
          emitted = true;
        }
        nb.push_back(*p);
      }
      if (!emitted) nb.push_back(other);
    } else {
      for (const int* p = lo; p != hi; ++p)
        if (*p != other) nb.push_back(*p);
    }
    return nb;
  };
  auto inv_sqrt = [&](int w) {
    return 1.0 / std::sqrt(static_cast<double>(toggled_degree(w) + 1));
  };

  int L = model.encoder.layers;
  std::unordered_map<int, std::vector<double>> prev;
  size_t rows_recomputed = 0;

  for (int l = 0; l < L; ++l) {
    const Matrix& base = layers_[l];
    int in_cols = base.cols;
    bool last = l == L - 1;
    // Previous-layer row, patched where the toggle already propagated.
    auto in_row = [&](int j) -> const double* {
      auto it = prev.find(j);
      if (it != prev.end()) return it->second.data();
      return &base.data[static_cast<size_t>(j) * in_cols];
    };

    std::unordered_map<int, std::vector<double>> cur;
    std::vector<int> field = g_.receptive_field(u, v, l + 1);
    cur.reserve(field.size());
    for (int w : field) {
      std::vector<double> z;
      switch (model.encoder.kind) {
        case EncoderKind::Gcn: {
          std::vector<double> t(in_cols, 0.0);
          auto accum = [&](int col, double wgt) {
            const double* r = in_row(col);
            for (int j = 0; j < in_cols; ++j) t[j] += wgt * r[j];
          };
          double iw = inv_sqrt(w);
          bool self_emitted = false;
          for (int c : toggled_neighbors(w)) {
            if (!self_emitted && c > w) {
              accum(w, iw * iw);
              self_emitted = true;
            }
            accum(c, iw * inv_sqrt(c));
          }
          if (!self_emitted) accum(w, iw * iw);
          z = row_times(t.data(), in_cols, model.params.get(lkey(l, "W")));
          break;
        }
        case EncoderKind::Gin: {
          double eps = model.params.get(lkey(l, "eps")).scalar();
          std::vector<double> acc(in_cols, 0.0);
          for (int c : toggled_neighbors(w)) {
            const double* r = in_row(c);
            for (int j = 0; j < in_cols; ++j) acc[j] += r[j];
          }
          const double* hw = in_row(w);
          std::vector<double> agg(in_cols);
          for (int j = 0; j < in_cols; ++j) agg[j] = (1.0 + eps) * hw[j] + acc[j];
          std::vector<double> z1 =
              row_times(agg.data(), in_cols, model.params.get(lkey(l, "W1")));
          const Matrix& b1 = model.params.get(lkey(l, "b1"));
          for (size_t j = 0; j < z1.size(); ++j) {
            double a = z1[j] + b1.at(0, static_cast<int>(j));
            z1[j] = a > 0.0 ? a : 0.0;
          }
          z = row_times(z1.data(), static_cast<int>(z1.size()),
                        model.params.get(lkey(l, "W2")));
          const Matrix& b2 = model.params.get(lkey(l, "b2"));
          for (size_t j = 0; j < z.size(); ++j) z[j] += b2.at(0, static_cast<int>(j));
          break;
        }
        case EncoderKind::Sage: {
          std::vector<double> crow(2 * in_cols, 0.0);
          const double* hw = in_row(w);
          for (int j = 0; j < in_cols; ++j) crow[j] = hw[j];
          int d = toggled_degree(w);
          if (d > 0) {
            double wgt = 1.0 / d;
            for (int c : toggled_neighbors(w)) {
              const double* r = in_row(c);
              for (int j = 0; j < in_cols; ++j) crow[in_cols + j] += wgt * r[j];
            }
          }
          z = row_times(crow.data(), 2 * in_cols, model.params.get(lkey(l, "W")));
          break;
        }
      }
      if (!last)
        for (double& x : z) x = x > 0.0 ? x : 0.0;
      cur.emplace(w, std::move(z));
      ++rows_recomputed;
    }
    prev = std::move(cur);
  }

  EdgeView view;
  view.h_uv = edge_embedding_plain(model.scorer, base_row(u), base_row(v));
  view.logit = score_edge_plain(model, view.h_uv);
  view.h_plus_uv = edge_embedding_plain(model.scorer, prev.at(u), prev.at(v));
  view.rows_recomputed = rows_recomputed;
  return view;
}

Matrix CounterfactualEngine::full_counterfactual(int u, int v) const {
  Graph toggled = g_.toggle_edge(u, v);
  GraphOps ops(toggled);
  return encode_plain(*model_, ops, layers_.front());
}

std::vector<CalibrationTriple> build_calibration_set(const Graph& g,
                                                     const EdgeSplit& split,
                                                     uint64_t seed) {
  if (split.train_pos.empty())
    throw ContractError("calibration set needs training positives");
  std::vector<CalibrationTriple> out;
  out.reserve(2 * split.train_pos.size());
  for (const Edge& e : split.train_pos) out.push_back({e.first, e.second, 1});

  // Fresh negatives, disjoint from E and from the held-out evaluation
  // negatives so the calibrator never sees those pairs.
  std::vector<Edge> exclude = split.val_neg;
  exclude.insert(exclude.end(), split.test_neg.begin(), split.test_neg.end());
  Rng rng(seed);
  for (const Edge& e : sample_negative_edges(
           g, static_cast<long>(split.train_pos.size()), rng, exclude))
    out.push_back({e.first, e.second, 0});
  return out;
}

namespace {

EdgeFeatures collect_gamma_features(const CounterfactualEngine& engine,
                                    const std::vector<CalibrationTriple>& triples,
                                    GammaKind kind) {
  EdgeFeatures f;
  f.inputs.reserve(triples.size());
  f.logits.reserve(triples.size());
  f.labels.reserve(triples.size());
  for (const CalibrationTriple& t : triples) {
    auto view = engine.edge_view(t.u, t.v);
    f.inputs.push_back(gamma(view.h_uv, view.h_plus_uv, kind));
    f.logits.push_back(view.logit);
    f.labels.push_back(t.label);
  }
  return f;
}

std::vector<CalibrationTriple> val_triples(const EdgeSplit& split) {
  std::vector<CalibrationTriple> out;
  for (const Edge& e : split.val_pos) out.push_back({e.first, e.second, 1});
  for (const Edge& e : split.val_neg) out.push_back({e.first, e.second, 0});
  return out;
}

Matrix column_of(const std::vector<double>& v) { return Matrix::column(v); }

Matrix labels_column(const std::vector<int>& labels) {
  Matrix m(static_cast<int>(labels.size()), 1);
  for (size_t i = 0; i < labels.size(); ++i) m.data[i] = labels[i];
  return m;
}

}  // namespace

TemperatureNet fit_innout(const Model& model, const Graph& g, const Matrix& x,
                          const std::vector<CalibrationTriple>& calibration,
                          const EdgeSplit& split, const InNOutConfig& cfg) {
  cfg.validate();
  if (calibration.empty()) throw ContractError("empty calibration set");
  Graph train_graph(g.node_count(), split.train_pos);
  CounterfactualEngine engine(model, train_graph, x);

  EdgeFeatures fit = collect_gamma_features(engine, calibration, cfg.gamma);
  EdgeFeatures val = collect_gamma_features(engine, val_triples(split), cfg.gamma);
  int dim = static_cast<int>(fit.inputs[0].size());

  std::vector<Branch> branches(2);
  branches[0].prefix = "c1";
  branches[1].prefix = "c2";
  for (size_t i = 0; i < fit.logits.size(); ++i)
    branches[fit.logits[i] > 0.0 ? 0 : 1].idx.push_back(static_cast<int>(i));
  for (Branch& b : branches) {
    b.gam = Matrix(static_cast<int>(b.idx.size()), dim);
    for (size_t r = 0; r < b.idx.size(); ++r)
      for (int c = 0; c < dim; ++c)
        b.gam.at(static_cast<int>(r), c) = fit.inputs[b.idx[r]][c];
  }
  Matrix logits = column_of(fit.logits);
  Matrix labels = labels_column(fit.labels);

  // Candidates share data and init and never touch each other's state, so
  // the grid fits in parallel; selection stays in grid order for determinism.
  std::vector<TemperatureNet> candidates(cfg.lambda_grid.size());
  std::vector<std::exception_ptr> errors(cfg.lambda_grid.size());
  {
    std::vector<std::thread> workers;
    for (size_t li = 0; li < cfg.lambda_grid.size(); ++li)
      workers.emplace_back([&, li] {
        try {
          TemperatureNet net;
          net.gamma = cfg.gamma;
          net.input_dim = dim;
          Rng rng(cfg.seed);
          add_mlp_params(net.params, "c1", dim, cfg.hidden, rng);
          add_mlp_params(net.params, "c2", dim, cfg.hidden, rng);
          fit_temperature_params(net.params, branches, logits, labels,
                                 cfg.lambda_grid[li], cfg, &val);
          net.chosen_lambda = cfg.lambda_grid[li];
          net.fitted = true;
          candidates[li] = std::move(net);
        } catch (...) {
          errors[li] = std::current_exception();
        }
      });
    for (std::thread& w : workers) w.join();
  }
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  if (val.logits.empty()) return candidates.front();  // no validation split

  TemperatureNet best;
  double best_ece = std::numeric_limits<double>::infinity();
  for (TemperatureNet& net : candidates) {
    std::vector<double> conf(val.logits.size());
    for (size_t i = 0; i < val.logits.size(); ++i)
      conf[i] = stable_sigmoid(val.logits[i] /
                               net.temperature(val.inputs[i], val.logits[i]));
    double e = ece(conf, val.labels, cfg.ece_bins);
    if (e < best_ece) {
      best_ece = e;
      best = std::move(net);
    }
  }
  return best;
}

EmbMlpCalibrator fit_emb_mlp(const Model& model, const Graph& g, const Matrix& x,
                             const std::vector<CalibrationTriple>& calibration,
                             const EdgeSplit& split, const InNOutConfig& cfg) {
  cfg.validate();
  if (calibration.empty()) throw ContractError("empty calibration set");
  Graph train_graph(g.node_count(), split.train_pos);
  GraphOps ops(train_graph);
  Matrix h = encode_plain(model, ops, x);
  auto row = [&](int v) {
    const double* p = &h.data[static_cast<size_t>(v) * h.cols];
    return std::vector<double>(p, p + h.cols);
  };
  auto collect = [&](const std::vector<CalibrationTriple>& triples) {
    EdgeFeatures f;
    for (const CalibrationTriple& t : triples) {
      std::vector<double> emb =
          edge_embedding_plain(model.scorer, row(t.u), row(t.v));
      f.logits.push_back(score_edge_plain(model, emb));
      f.inputs.push_back(std::move(emb));
      f.labels.push_back(t.label);
    }
    return f;
  };
  EdgeFeatures fit = collect(calibration);
  EdgeFeatures val = collect(val_triples(split));
  int dim = static_cast<int>(fit.inputs[0].size());

  std::vector<Branch> branches(1);
  branches[0].prefix = "c";
  branches[0].gam = Matrix(static_cast<int>(fit.inputs.size()), dim);
  for (size_t r = 0; r < fit.inputs.size(); ++r)
    for (int c = 0; c < dim; ++c)
      branches[0].gam.at(static_cast<int>(r), c) = fit.inputs[r][c];
  for (size_t i = 0; i < fit.inputs.size(); ++i)
    branches[0].idx.push_back(static_cast<int>(i));
  Matrix logits = column_of(fit.logits);
  Matrix labels = labels_column(fit.labels);

  std::vector<EmbMlpCalibrator> candidates(cfg.lambda_grid.size());
  std::vector<std::exception_ptr> errors(cfg.lambda_grid.size());
  {
    std::vector<std::thread> workers;
    for (size_t li = 0; li < cfg.lambda_grid.size(); ++li)
      workers.emplace_back([&, li] {
        try {
          EmbMlpCalibrator cal;
          cal.input_dim = dim;
          Rng rng(cfg.seed);
          add_mlp_params(cal.params, "c", dim, cfg.hidden, rng);
          fit_temperature_params(cal.params, branches, logits, labels,
                                 cfg.lambda_grid[li], cfg, &val);
          cal.chosen_lambda = cfg.lambda_grid[li];
          cal.fitted = true;
          candidates[li] = std::move(cal);
        } catch (...) {
          errors[li] = std::current_exception();
        }
      });
    for (std::thread& w : workers) w.join();
  }
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  if (val.logits.empty()) return candidates.front();

  EmbMlpCalibrator best;
  double best_ece = std::numeric_limits<double>::infinity();
  for (EmbMlpCalibrator& cal : candidates) {
    std::vector<double> conf(val.logits.size());
    for (size_t i = 0; i < val.logits.size(); ++i)
      conf[i] = stable_sigmoid(val.logits[i] / cal.temperature(val.inputs[i]));
    double e = ece(conf, val.labels, cfg.ece_bins);
    if (e < best_ece) {
      best_ece = e;
      best = std::move(cal);
    }
  }
  return best;
}

std::vector<ScoredEdge> calibrate_innout(const TemperatureNet& net,
                                         const Model& model, const Graph& g,
                                         const Matrix& x,
                                         const std::vector<Edge>& positives,
                                         const std::vector<Edge>& negatives) {
  if (!net.fitted) throw ContractError("temperature net is not fitted");
  CounterfactualEngine engine(model, g, x);
  std::vector<ScoredEdge> out;
  out.reserve(positives.size() + negatives.size());
  auto push = [&](const Edge& e, int label) {
    auto view = engine.edge_view(e.first, e.second);
    ScoredEdge se;
    se.u = e.first;
    se.v = e.second;
    se.logit = view.logit;
    se.label = label;
    se.temperature =
        net.temperature(gamma(view.h_uv, view.h_plus_uv, net.gamma), view.logit);
    se.calibrated = stable_sigmoid(se.logit / se.temperature);
    out.push_back(se);
  };
  for (const Edge& e : positives) push(e, 1);
  for (const Edge& e : negatives) push(e, 0);
  return out;
}

std::vector<ScoredEdge> calibrate_emb_mlp(const EmbMlpCalibrator& cal,
                                          const Model& model, const Graph& g,
                                          const Matrix& x,
                                          const std::vector<Edge>& positives,
                                          const std::vector<Edge>& negatives) {
  if (!cal.fitted) throw ContractError("emb-mlp calibrator is not fitted");
  GraphOps ops(g);
  Matrix h = encode_plain(model, ops, x);
  auto row = [&](int v) {
    const double* p = &h.data[static_cast<size_t>(v) * h.cols];
    return std::vector<double>(p, p + h.cols);
  };
  std::vector<ScoredEdge> out;
  out.reserve(positives.size() + negatives.size());
  auto push = [&](const Edge& e, int label) {
    std::vector<double> emb =
        edge_embedding_plain(model.scorer, row(e.first), row(e.second));
    ScoredEdge se;
    se.u = e.first;
    se.v = e.second;
    se.logit = score_edge_plain(model, emb);
    se.label = label;
    se.temperature = cal.temperature(emb);
    se.calibrated = stable_sigmoid(se.logit / se.temperature);
    out.push_back(se);
  };
  for (const Edge& e : positives) push(e, 1);
  for (const Edge& e : negatives) push(e, 0);
  return out;
}

}  // namespace edgecal
