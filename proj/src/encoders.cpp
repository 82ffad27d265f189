#include "edgecal/encoders.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "edgecal/error.hpp"

namespace edgecal {

using nlohmann::json;

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "gcn") return EncoderKind::Gcn;
  if (s == "gin") return EncoderKind::Gin;
  if (s == "sage") return EncoderKind::Sage;
  throw ContractError("unknown encoder variant: " + s);
}

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::Gcn: return "gcn";
    case EncoderKind::Gin: return "gin";
    case EncoderKind::Sage: return "sage";
  }
  return "?";
}

PsiKind psi_kind_from_string(const std::string& s) {
  if (s == "hadamard") return PsiKind::Hadamard;
  if (s == "sum") return PsiKind::Sum;
  if (s == "concat-sym") return PsiKind::ConcatSym;
  throw ContractError("unknown psi variant: " + s);
}

std::string to_string(PsiKind k) {
  switch (k) {
    case PsiKind::Hadamard: return "hadamard";
    case PsiKind::Sum: return "sum";
    case PsiKind::ConcatSym: return "concat-sym";
  }
  return "?";
}

void EncoderConfig::validate() const {
  if (layers < 1 || layers > 3)
    throw ContractError("encoder layer count must be in {1,2,3}");
  if (hidden <= 0 || out <= 0) throw ContractError("encoder dims must be positive");
}

namespace {

Matrix xavier_uniform(int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix w(fan_in, fan_out);
  for (double& v : w.data) v = dist(rng);
  return w;
}

std::string lkey(int layer, const char* suffix) {
  return "enc.l" + std::to_string(layer) + "." + suffix;
}

}  // namespace

Model make_model(const EncoderConfig& enc, const ScorerConfig& sc, int in_dim,
                 uint64_t seed) {
  enc.validate();
  if (in_dim <= 0) throw ContractError("feature dimension must be positive");
  if (sc.kind == ScorerKind::Dot && sc.psi != PsiKind::Hadamard)
    throw ContractError("dot scorer requires the hadamard composition");

  Model model;
  model.encoder = enc;
  model.scorer = sc;
  model.in_dim = in_dim;
  Rng rng(seed);

  int d_in = in_dim;
  for (int l = 0; l < enc.layers; ++l) {
    int d_out = enc.layer_out_dim(l);
    switch (enc.kind) {
      case EncoderKind::Gcn:
        model.params.add(lkey(l, "W"), xavier_uniform(d_in, d_out, rng));
        break;
      case EncoderKind::Gin:
        model.params.add(lkey(l, "eps"), Matrix(1, 1, 0.0));
        model.params.add(lkey(l, "W1"), xavier_uniform(d_in, d_out, rng));
        model.params.add(lkey(l, "b1"), Matrix(1, d_out, 0.0));
        model.params.add(lkey(l, "W2"), xavier_uniform(d_out, d_out, rng));
        model.params.add(lkey(l, "b2"), Matrix(1, d_out, 0.0));
        break;
      case EncoderKind::Sage:
        model.params.add(lkey(l, "W"), xavier_uniform(2 * d_in, d_out, rng));
        break;
    }
    d_in = d_out;
  }

  if (sc.kind == ScorerKind::Mlp) {
    int edge_dim = sc.edge_dim(enc.out);
    model.params.add("scorer.W1", xavier_uniform(edge_dim, sc.hidden, rng));
    model.params.add("scorer.b1", Matrix(1, sc.hidden, 0.0));
    model.params.add("scorer.W2", xavier_uniform(sc.hidden, 1, rng));
    model.params.add("scorer.b2", Matrix(1, 1, 0.0));
  }
  return model;
}

Var ParamBind::operator[](const std::string& name) const {
  const auto& names = store->names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return vars[i];
  throw ContractError("unbound parameter: " + name);
}

Var encode(Tape& tape, const EncoderConfig& cfg, const ParamBind& params,
           const GraphOps& ops, Var x) {
  cfg.validate();
  Var h = x;
  for (int l = 0; l < cfg.layers; ++l) {
    bool last = l == cfg.layers - 1;
    Var z;
    switch (cfg.kind) {
      case EncoderKind::Gcn:
        z = tape.matmul(tape.spmm(ops.norm, h), params[lkey(l, "W")]);
        break;
      case EncoderKind::Gin: {
        Var one_plus_eps =
            tape.add(params[lkey(l, "eps")], tape.constant(Matrix(1, 1, 1.0)));
        Var agg =
            tape.add(tape.scale_var(h, one_plus_eps), tape.spmm(ops.adj, h));
        Var z1 = tape.relu(tape.add_row_bias(tape.matmul(agg, params[lkey(l, "W1")]),
                                             params[lkey(l, "b1")]));
        z = tape.add_row_bias(tape.matmul(z1, params[lkey(l, "W2")]),
                              params[lkey(l, "b2")]);
        break;
      }
      case EncoderKind::Sage: {
        Var m = tape.spmm(ops.mean, h);
        z = tape.matmul(tape.hconcat(h, m), params[lkey(l, "W")]);
        break;
      }
    }
    h = last ? z : tape.relu(z);
  }
  return h;
}

Var edge_embeddings(Tape& tape, const ScorerConfig& cfg, Var h,
                    const std::vector<Edge>& pairs) {
  std::vector<int> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  for (const Edge& e : pairs) {
    us.push_back(e.first);
    vs.push_back(e.second);
  }
  Var hu = tape.gather_rows(h, us);
  Var hv = tape.gather_rows(h, vs);
  switch (cfg.psi) {
    case PsiKind::Hadamard: return tape.mul(hu, hv);
    case PsiKind::Sum: return tape.add(hu, hv);
    case PsiKind::ConcatSym:
      return tape.hconcat(tape.emin(hu, hv), tape.emax(hu, hv));
  }
  throw ContractError("unknown psi");
}

Var score_edges(Tape& tape, const ScorerConfig& cfg, const ParamBind& params,
                Var edge_emb) {
  if (cfg.kind == ScorerKind::Dot) return tape.row_sum(edge_emb);
  Var z1 = tape.relu(tape.add_row_bias(tape.matmul(edge_emb, params["scorer.W1"]),
                                       params["scorer.b1"]));
  return tape.add_row_bias(tape.matmul(z1, params["scorer.W2"]),
                           params["scorer.b2"]);
}

Var model_logits(Tape& tape, const Model& model, const ParamBind& params,
                 const GraphOps& ops, Var x, const std::vector<Edge>& pairs) {
  Var h = encode(tape, model.encoder, params, ops, x);
  Var e = edge_embeddings(tape, model.scorer, h, pairs);
  return score_edges(tape, model.scorer, params, e);
}

std::vector<Matrix> encode_layers_plain(const Model& model, const GraphOps& ops,
                                        const Matrix& x) {
  const EncoderConfig& cfg = model.encoder;
  cfg.validate();
  std::vector<Matrix> layers;
  layers.push_back(x);
  Matrix h = x;
  for (int l = 0; l < cfg.layers; ++l) {
    bool last = l == cfg.layers - 1;
    Matrix z;
    switch (cfg.kind) {
      case EncoderKind::Gcn:
        z = matmul(ops.norm.multiply(h), model.params.get(lkey(l, "W")));
        break;
      case EncoderKind::Gin: {
        double eps = model.params.get(lkey(l, "eps")).scalar();
        Matrix agg = ops.adj.multiply(h);
        for (size_t i = 0; i < agg.size(); ++i)
          agg.data[i] = (1.0 + eps) * h.data[i] + agg.data[i];
        Matrix z1 = matmul(agg, model.params.get(lkey(l, "W1")));
        const Matrix& b1 = model.params.get(lkey(l, "b1"));
        for (int i = 0; i < z1.rows; ++i)
          for (int j = 0; j < z1.cols; ++j) {
            double v = z1.at(i, j) + b1.at(0, j);
            z1.at(i, j) = v > 0.0 ? v : 0.0;
          }
        z = matmul(z1, model.params.get(lkey(l, "W2")));
        const Matrix& b2 = model.params.get(lkey(l, "b2"));
        for (int i = 0; i < z.rows; ++i)
          for (int j = 0; j < z.cols; ++j) z.at(i, j) += b2.at(0, j);
        break;
      }
      case EncoderKind::Sage: {
        Matrix m = ops.mean.multiply(h);
        Matrix c(h.rows, h.cols + m.cols);
        for (int i = 0; i < h.rows; ++i) {
          for (int j = 0; j < h.cols; ++j) c.at(i, j) = h.at(i, j);
          for (int j = 0; j < m.cols; ++j) c.at(i, h.cols + j) = m.at(i, j);
        }
        z = matmul(c, model.params.get(lkey(l, "W")));
        break;
      }
    }
    if (!last)
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    h = z;
    layers.push_back(h);
  }
  return layers;
}

Matrix encode_plain(const Model& model, const GraphOps& ops, const Matrix& x) {
  return encode_layers_plain(model, ops, x).back();
}

std::vector<double> edge_embedding_plain(const ScorerConfig& cfg,
                                         const std::vector<double>& hu,
                                         const std::vector<double>& hv) {
  if (hu.size() != hv.size())
    throw DimensionError("edge_embedding: endpoint dims differ");
  std::vector<double> out;
  switch (cfg.psi) {
    case PsiKind::Hadamard:
      out.resize(hu.size());
      for (size_t i = 0; i < hu.size(); ++i) out[i] = hu[i] * hv[i];
      break;
    case PsiKind::Sum:
      out.resize(hu.size());
      for (size_t i = 0; i < hu.size(); ++i) out[i] = hu[i] + hv[i];
      break;
    case PsiKind::ConcatSym:
      out.resize(2 * hu.size());
      for (size_t i = 0; i < hu.size(); ++i) {
        out[i] = std::min(hu[i], hv[i]);
        out[hu.size() + i] = std::max(hu[i], hv[i]);
      }
      break;
  }
  return out;
}

double score_edge_plain(const Model& model, const std::vector<double>& edge_emb) {
  if (model.scorer.kind == ScorerKind::Dot) {
    double acc = 0.0;
    for (double v : edge_emb) acc += v;
    return acc;
  }
  const Matrix& w1 = model.params.get("scorer.W1");
  const Matrix& b1 = model.params.get("scorer.b1");
  const Matrix& w2 = model.params.get("scorer.W2");
  const Matrix& b2 = model.params.get("scorer.b2");
  if (static_cast<int>(edge_emb.size()) != w1.rows)
    throw DimensionError("score_edge: edge embedding dim " +
                         std::to_string(edge_emb.size()) +
                         " does not match scorer input " +
                         std::to_string(w1.rows));
  double z = b2.at(0, 0);
  for (int j = 0; j < w1.cols; ++j) {
    double a = b1.at(0, j);
    for (int k = 0; k < w1.rows; ++k) a += edge_emb[k] * w1.at(k, j);
    if (a > 0.0) z += a * w2.at(j, 0);
  }
  return z;
}

json params_to_json(const ParamStore& params) {
  json arr = json::array();
  for (size_t i = 0; i < params.count(); ++i) {
    const Matrix& m = params.value_at(i);
    arr.push_back({{"name", params.names()[i]},
                   {"rows", m.rows},
                   {"cols", m.cols},
                   {"data", m.data}});
  }
  return arr;
}

ParamStore params_from_json(const json& j) {
  ParamStore store;
  for (const auto& p : j) {
    Matrix m(p.at("rows").get<int>(), p.at("cols").get<int>());
    m.data = p.at("data").get<std::vector<double>>();
    if (m.data.size() != static_cast<size_t>(m.rows) * m.cols)
      throw ContractError("checkpoint parameter size mismatch");
    store.add(p.at("name").get<std::string>(), std::move(m));
  }
  return store;
}

json model_to_json(const Model& model) {
  return json{{"magic", "EDGECAL1"},
              {"kind", "model"},
              {"encoder",
               {{"variant", to_string(model.encoder.kind)},
                {"layers", model.encoder.layers},
                {"hidden", model.encoder.hidden},
                {"out", model.encoder.out}}},
              {"scorer",
               {{"variant", model.scorer.kind == ScorerKind::Dot ? "dot" : "mlp"},
                {"psi", to_string(model.scorer.psi)},
                {"hidden", model.scorer.hidden}}},
              {"in_dim", model.in_dim},
              {"params", params_to_json(model.params)}};
}

Model model_from_json(const json& j) {
  if (j.value("magic", "") != "EDGECAL1" || j.value("kind", "") != "model")
    throw ContractError("not an EDGECAL1 model checkpoint");
  Model m;
  const auto& e = j.at("encoder");
  m.encoder.kind = encoder_kind_from_string(e.at("variant").get<std::string>());
  m.encoder.layers = e.at("layers").get<int>();
  m.encoder.hidden = e.at("hidden").get<int>();
  m.encoder.out = e.at("out").get<int>();
  const auto& s = j.at("scorer");
  m.scorer.kind =
      s.at("variant").get<std::string>() == "dot" ? ScorerKind::Dot : ScorerKind::Mlp;
  m.scorer.psi = psi_kind_from_string(s.at("psi").get<std::string>());
  m.scorer.hidden = s.at("hidden").get<int>();
  m.in_dim = j.at("in_dim").get<int>();
  m.params = params_from_json(j.at("params"));
  return m;
}

}  // namespace edgecal
