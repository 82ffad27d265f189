#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "edgecal/matrix.hpp"

namespace edgecal {

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Gradients keyed by leaf node id. Accumulation across backward passes is
// additive until reset().
struct GradientStore {
  std::unordered_map<int, Matrix> grads;

  const Matrix& grad(Var v) const;
  bool has(Var v) const { return grads.count(v.id) > 0; }
  void accumulate(const GradientStore& other);
  void reset() { grads.clear(); }
};

// Define-by-run tape of primitive operations. Rebuilt per forward pass;
// single-owner, single-threaded.
class Tape {
 public:
  // Differentiable leaf: gradients are reported for these nodes.
  Var leaf(const Matrix& m);
  // Non-differentiable input.
  Var constant(const Matrix& m);

  Var matmul(Var a, Var b);
  // y = s * x with s a fixed sparse operator (adjacency-style).
  Var spmm(const SparseMatrix& s, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  // x + broadcast of a 1-by-cols bias row.
  Var add_row_bias(Var x, Var bias);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var emin(Var a, Var b);  // elementwise; ties route the gradient to a
  Var emax(Var a, Var b);
  Var hconcat(Var a, Var b);
  Var gather_rows(Var x, std::vector<int> idx);
  // Inverse of two gathers: places rows of a at idx_a and rows of b at idx_b
  // in a matrix of total_rows rows. Index lists must partition [0,total_rows).
  Var merge_rows(Var a, Var b, std::vector<int> idx_a, std::vector<int> idx_b,
                 int total_rows);
  // y = numer ./ x, numer fixed. Used for logit / temperature.
  Var div_const_by(Matrix numer, Var x);
  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);           // m-by-d -> m-by-1
  Var scale_var(Var a, Var s);  // s is 1-by-1

  // Fused binary cross-entropy from logits; scalar result.
  Var bce_with_logits(Var logits, Matrix labels, bool mean_reduction);
  // mean of -(2y-1) * p over column vectors p, labels.
  Var confidence_penalty(Var probs, Matrix labels);
  // Equal-width-bin expected calibration error with straight-through binning:
  // bin membership is a constant of the forward pass (or supplied explicitly)
  // and gradients carry the per-bin residual sign.
  Var ece_loss(Var probs, Matrix labels, int n_bins,
               std::optional<std::vector<int>> fixed_bins = std::nullopt);

  const Matrix& value(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Gradients of a scalar root with respect to every differentiable leaf.
  GradientStore backward(Var root);

  // Recomputes every cached forward value from the leaves, in order.
  // Returns true iff the replay is bit-identical to the cached values.
  bool replay_forward();

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated lazily during backward
    bool is_leaf = false;
    std::function<void(Tape&, int)> forward;   // recompute value in place
    std::function<void(Tape&, int)> backward;  // scatter grad to parents
  };

  std::vector<Node> nodes_;

  int push(Matrix value, bool is_leaf, std::function<void(Tape&, int)> fwd,
           std::function<void(Tape&, int)> bwd);
  Matrix& grad_of(int id);
  void check(Var v) const;
  void check_same_shape(Var a, Var b, const char* op) const;

  friend struct TapeAccess;
};

// Stable elementwise scalar helpers shared by tape ops and plain paths.
double stable_sigmoid(double x);
double stable_softplus(double x);

// Untaped elementwise forms for inference paths.
Matrix sigmoid(const Matrix& x);
Matrix softplus(const Matrix& x);

}  // namespace edgecal
