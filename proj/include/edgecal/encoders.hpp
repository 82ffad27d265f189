#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edgecal/adam.hpp"
#include "edgecal/graph.hpp"
#include "edgecal/matrix.hpp"
#include "edgecal/tape.hpp"

namespace edgecal {

enum class EncoderKind { Gcn, Gin, Sage };
enum class PsiKind { Hadamard, Sum, ConcatSym };
enum class ScorerKind { Mlp, Dot };

EncoderKind encoder_kind_from_string(const std::string& s);
std::string to_string(EncoderKind k);
PsiKind psi_kind_from_string(const std::string& s);
std::string to_string(PsiKind k);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Gcn;
  int layers = 2;   // in {1,2,3}
  int hidden = 32;
  int out = 16;

  void validate() const;
  int layer_out_dim(int layer) const { return layer == layers - 1 ? out : hidden; }
};

struct ScorerConfig {
  ScorerKind kind = ScorerKind::Mlp;
  PsiKind psi = PsiKind::Hadamard;
  int hidden = 16;

  int edge_dim(int embed_dim) const {
    return psi == PsiKind::ConcatSym ? 2 * embed_dim : embed_dim;
  }
};

// Precomputed sparse operators for one graph.
struct GraphOps {
  SparseMatrix norm;  // GCN
  SparseMatrix adj;   // GIN
  SparseMatrix mean;  // SAGE

  explicit GraphOps(const Graph& g)
      : norm(g.normalized_adjacency()),
        adj(g.adjacency()),
        mean(g.mean_adjacency()) {}
};

// Encoder + scorer parameters bundled with their configuration.
struct Model {
  EncoderConfig encoder;
  ScorerConfig scorer;
  int in_dim = 0;
  ParamStore params;
};

Model make_model(const EncoderConfig& enc, const ScorerConfig& sc, int in_dim,
                 uint64_t seed);

// Binds a ParamStore's leaves on a tape for name-based lookup.
struct ParamBind {
  const ParamStore* store = nullptr;
  std::vector<Var> vars;

  ParamBind(Tape& tape, const ParamStore& s) : store(&s), vars(s.leaves(tape)) {}
  ParamBind(const ParamStore& s, std::vector<Var> leaves)
      : store(&s), vars(std::move(leaves)) {}
  Var operator[](const std::string& name) const;
};

// Full-graph message-passing forward; returns the n-by-out embedding node.
Var encode(Tape& tape, const EncoderConfig& cfg, const ParamBind& params,
           const GraphOps& ops, Var x);

// Edge embeddings for the listed pairs from node embeddings h, then logits
// through the scorer. Exactly symmetric in each pair's order.
Var edge_embeddings(Tape& tape, const ScorerConfig& cfg, Var h,
                    const std::vector<Edge>& pairs);
Var score_edges(Tape& tape, const ScorerConfig& cfg, const ParamBind& params,
                Var edge_emb);
// encode + edge_embeddings + score_edges.
Var model_logits(Tape& tape, const Model& model, const ParamBind& params,
                 const GraphOps& ops, Var x, const std::vector<Edge>& pairs);

// Untaped inference paths.
Matrix encode_plain(const Model& model, const GraphOps& ops, const Matrix& x);
// All layer outputs h^(0..L); index 0 is the input features.
std::vector<Matrix> encode_layers_plain(const Model& model, const GraphOps& ops,
                                        const Matrix& x);
std::vector<double> edge_embedding_plain(const ScorerConfig& cfg,
                                         const std::vector<double>& hu,
                                         const std::vector<double>& hv);
double score_edge_plain(const Model& model, const std::vector<double>& edge_emb);

// Parameter (de)serialization for the EDGECAL1 checkpoint format.
nlohmann::json params_to_json(const ParamStore& params);
ParamStore params_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

}  // namespace edgecal
