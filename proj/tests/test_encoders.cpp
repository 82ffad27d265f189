#include <cmath>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "edgecal/dataio.hpp"
#include "edgecal/encoders.hpp"
#include "edgecal/error.hpp"
#include "edgecal/graph.hpp"
#include "helpers.hpp"

using namespace edgecal;
using testutil::fd_max_rel_error;
using testutil::rand_mat;

namespace {

Model small_model(EncoderKind kind, int in_dim, uint64_t seed,
                  PsiKind psi = PsiKind::Hadamard) {
  EncoderConfig enc;
  enc.kind = kind;
  enc.layers = 2;
  enc.hidden = 5;
  enc.out = 3;
  ScorerConfig sc;
  sc.psi = psi;
  sc.hidden = 4;
  return make_model(enc, sc, in_dim, seed);
}

std::vector<double> row_of(const Matrix& m, int r) {
  std::vector<double> out(m.cols);
  for (int c = 0; c < m.cols; ++c) out[c] = m.at(r, c);
  return out;
}

}  // namespace

TEST_CASE("zero-edge GCN depends only on each node's own features") {
  Graph g(4, {});
  GraphOps ops(g);
  Model m = small_model(EncoderKind::Gcn, 3, 1);
  Rng rng(2);
  Matrix x = rand_mat(4, 3, rng);
  Matrix h = encode_plain(m, ops, x);

  Matrix x2 = x;
  for (int c = 0; c < 3; ++c) x2.at(2, c) += 1.0;  // perturb only node 2
  Matrix h2 = encode_plain(m, ops, x2);
  for (int v : {0, 1, 3})
    CHECK(row_of(h, v) == row_of(h2, v));
  CHECK(row_of(h, 2) != row_of(h2, 2));
}

TEST_CASE("hand-computed 1-layer GCN on a 3-node path") {
  Graph g(3, {{0, 1}, {1, 2}});
  GraphOps ops(g);
  EncoderConfig enc;
  enc.kind = EncoderKind::Gcn;
  enc.layers = 1;
  enc.hidden = 2;
  enc.out = 2;
  ScorerConfig sc;
  Model m = make_model(enc, sc, 2, 0);
  m.params.get("enc.l0.W") = Matrix::identity(2);

  Rng rng(4);
  Matrix x = rand_mat(3, 2, rng);
  Matrix h = encode_plain(m, ops, x);

  double a = 1.0 / 2.0;             // (0,0): degrees 1,1
  double b = 1.0 / std::sqrt(6.0);  // (0,1): degrees 1,2
  double c = 1.0 / 3.0;             // (1,1): degree 2
  double tilde[3][3] = {{a, b, 0}, {b, c, b}, {0, b, a}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double want = 0.0;
      for (int k = 0; k < 3; ++k) want += tilde[i][k] * x.at(k, j);
      CHECK(h.at(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("node-permutation equivariance for all encoder variants") {
  SbmSpec spec;
  spec.nodes_per_block = 12;
  spec.feature_dim = 3;
  auto [g, x] = generate_sbm(spec, 6);

  std::vector<int> perm(g.node_count());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  Rng rng(12);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Edge> pedges;
  for (const Edge& e : g.edges()) pedges.push_back({perm[e.first], perm[e.second]});
  Graph pg(g.node_count(), pedges);
  Matrix px(x.rows, x.cols);
  for (int v = 0; v < x.rows; ++v)
    for (int c = 0; c < x.cols; ++c) px.at(perm[v], c) = x.at(v, c);

  for (EncoderKind kind : {EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Sage}) {
    Model m = small_model(kind, spec.feature_dim, 3);
    Matrix h = encode_plain(m, GraphOps(g), x);
    Matrix ph = encode_plain(m, GraphOps(pg), px);
    double worst = 0.0;
    for (int v = 0; v < h.rows; ++v)
      for (int c = 0; c < h.cols; ++c)
        worst = std::max(worst, std::fabs(ph.at(perm[v], c) - h.at(v, c)));
    // permutation reorders the neighbor accumulations, so allow rounding
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("edge embedding composition") {
  ScorerConfig had, sum, cat;
  had.psi = PsiKind::Hadamard;
  sum.psi = PsiKind::Sum;
  cat.psi = PsiKind::ConcatSym;

  std::vector<double> h = {0.5, -1.0, 2.0};
  CHECK(edge_embedding_plain(sum, h, h) == std::vector<double>{1.0, -2.0, 4.0});
  CHECK(edge_embedding_plain(had, {1, 2}, {3, 4}) == std::vector<double>{3, 8});

  Rng rng(5);
  Matrix a = rand_mat(1, 6, rng), b = rand_mat(1, 6, rng);
  std::vector<double> hu(a.data), hv(b.data);
  for (const ScorerConfig& cfg : {had, sum, cat})
    CHECK(edge_embedding_plain(cfg, hu, hv) == edge_embedding_plain(cfg, hv, hu));

  CHECK_THROWS_AS(edge_embedding_plain(had, {1.0}, {1.0, 2.0}), DimensionError);
}

TEST_CASE("edge scorer values") {
  EncoderConfig enc;
  enc.layers = 1;
  enc.hidden = 1;
  enc.out = 1;
  ScorerConfig sc;
  sc.hidden = 4;
  Model zero = make_model(enc, sc, 1, 0);
  for (const std::string& name : {"scorer.W1", "scorer.b1", "scorer.W2",
                                  "scorer.b2"}) {
    Matrix& w = zero.params.get(name);
    for (double& v : w.data) v = 0.0;
  }
  CHECK(score_edge_plain(zero, {0.37}) == 0.0);
  CHECK(stable_sigmoid(score_edge_plain(zero, {0.37})) == 0.5);

  // identity-like pass-through: one hidden unit copying the input
  Model ident = zero;
  ident.params.get("scorer.W1") = Matrix(1, 4, 0.0);
  ident.params.get("scorer.W1").at(0, 0) = 1.0;
  ident.params.get("scorer.W2").at(0, 0) = 1.0;
  CHECK(score_edge_plain(ident, {0.8}) == 0.8);

  // independent two-matmul oracle against a random scorer
  Rng rng(9);
  Model m = small_model(EncoderKind::Gcn, 2, 9);
  std::vector<double> emb(m.scorer.edge_dim(m.encoder.out));
  for (double& v : emb) v = rand_mat(1, 1, rng).scalar();
  const Matrix& w1 = m.params.get("scorer.W1");
  const Matrix& b1 = m.params.get("scorer.b1");
  const Matrix& w2 = m.params.get("scorer.W2");
  const Matrix& b2 = m.params.get("scorer.b2");
  double want = b2.scalar();
  for (int j = 0; j < w1.cols; ++j) {
    double a = b1.at(0, j);
    for (int k = 0; k < w1.rows; ++k) a += emb[k] * w1.at(k, j);
    want += std::max(a, 0.0) * w2.at(j, 0);
  }
  CHECK(score_edge_plain(m, emb) == doctest::Approx(want).epsilon(1e-14));

  CHECK_THROWS_AS(score_edge_plain(m, {1.0}), DimensionError);
}

TEST_CASE("edge scores are exactly symmetric for every psi") {
  Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}});
  Rng rng(13);
  Matrix x = rand_mat(6, 3, rng);
  for (PsiKind psi : {PsiKind::Hadamard, PsiKind::Sum, PsiKind::ConcatSym}) {
    Model m = small_model(EncoderKind::Sage, 3, 21, psi);
    Matrix h = encode_plain(m, GraphOps(g), x);
    for (const Edge& e : g.edges()) {
      double suv = score_edge_plain(
          m, edge_embedding_plain(m.scorer, row_of(h, e.first), row_of(h, e.second)));
      double svu = score_edge_plain(
          m, edge_embedding_plain(m.scorer, row_of(h, e.second), row_of(h, e.first)));
      CHECK(suv == svu);
    }
  }
}

TEST_CASE("tape and plain forward paths agree bit-for-bit") {
  Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 4}});
  GraphOps ops(g);
  Rng rng(19);
  Matrix x = rand_mat(6, 3, rng);
  for (EncoderKind kind : {EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Sage}) {
    Model m = small_model(kind, 3, 31);
    Tape tape;
    ParamBind bind(tape, m.params);
    Var h = encode(tape, m.encoder, bind, ops, tape.constant(x));
    Matrix plain = encode_plain(m, ops, x);
    CHECK(tape.value(h).data == plain.data);

    std::vector<Edge> pairs = {{0, 3}, {2, 5}};
    Var logits = model_logits(tape, m, bind, ops, tape.constant(x), pairs);
    for (size_t i = 0; i < pairs.size(); ++i) {
      double plain_logit = score_edge_plain(
          m, edge_embedding_plain(m.scorer, row_of(plain, pairs[i].first),
                                  row_of(plain, pairs[i].second)));
      CHECK(tape.value(logits).at(static_cast<int>(i), 0) == plain_logit);
    }
  }
}

TEST_CASE("encoder gradients pass finite differences on a 6-node graph") {
  Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}});
  GraphOps ops(g);
  Rng rng(29);
  Matrix x = rand_mat(6, 3, rng);
  std::vector<Edge> pairs = {{0, 4}, {1, 5}, {2, 3}};

  for (EncoderKind kind : {EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Sage}) {
    Model m = small_model(kind, 3, 37);
    std::vector<Matrix> inputs;
    for (size_t i = 0; i < m.params.count(); ++i)
      inputs.push_back(m.params.value_at(i));
    auto build = [&](Tape& t, const std::vector<Var>& leaves) {
      ParamBind bind(m.params, leaves);
      return t.sum(t.sigmoid(
          model_logits(t, m, bind, ops, t.constant(x), pairs)));
    };
    CHECK(fd_max_rel_error(inputs, build) < 1e-4);
  }
}

TEST_CASE("encoder config contracts") {
  EncoderConfig enc;
  enc.layers = 4;
  CHECK_THROWS_AS(enc.validate(), ContractError);
  ScorerConfig dot;
  dot.kind = ScorerKind::Dot;
  dot.psi = PsiKind::Sum;
  EncoderConfig ok;
  CHECK_THROWS_AS(make_model(ok, dot, 3, 0), ContractError);
}

TEST_CASE("dot-product scorer equals the inner product") {
  EncoderConfig enc;
  enc.layers = 1;
  enc.hidden = 3;
  enc.out = 3;
  ScorerConfig dot;
  dot.kind = ScorerKind::Dot;
  dot.psi = PsiKind::Hadamard;
  Model m = make_model(enc, dot, 3, 0);
  std::vector<double> hu = {1.0, -2.0, 0.5}, hv = {2.0, 1.0, 4.0};
  double s = score_edge_plain(m, edge_embedding_plain(m.scorer, hu, hv));
  CHECK(s == doctest::Approx(1.0 * 2.0 - 2.0 * 1.0 + 0.5 * 4.0).epsilon(1e-15));
}

TEST_CASE("model checkpoint round-trip with EDGECAL1 magic") {
  Model m = small_model(EncoderKind::Gin, 4, 77, PsiKind::ConcatSym);
  nlohmann::json j = model_to_json(m);
  CHECK(j.at("magic") == "EDGECAL1");
  Model back = model_from_json(j);
  CHECK(back.encoder.kind == m.encoder.kind);
  CHECK(back.in_dim == m.in_dim);
  CHECK(back.params == m.params);

  j["magic"] = "NOPE";
  CHECK_THROWS_AS(model_from_json(j), ContractError);
}

TEST_CASE("deterministic initialization under a fixed seed") {
  Model a = small_model(EncoderKind::Sage, 3, 123);
  Model b = small_model(EncoderKind::Sage, 3, 123);
  Model c = small_model(EncoderKind::Sage, 3, 124);
  CHECK(a.params == b.params);
  CHECK_FALSE(a.params == c.params);
}
