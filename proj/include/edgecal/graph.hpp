#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "edgecal/matrix.hpp"

namespace edgecal {

using Edge = std::pair<int, int>;  // stored with first < second
using Rng = std::mt19937_64;

inline Edge make_edge(int u, int v) {
  return u < v ? Edge{u, v} : Edge{v, u};
}

// Undirected simple graph. Immutable after construction; adjacency lists are
// sorted ascending with no duplicates and no self-loops.
class Graph {
 public:
  Graph() = default;
  // Symmetrizes, deduplicates, and drops self-loops.
  Graph(int node_count, const std::vector<Edge>& edges);

  int node_count() const { return n_; }
  long edge_count() const { return static_cast<long>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors_offsets() const { return adj_ptr_; }
  const std::vector<int>& neighbors_flat() const { return adj_; }

  int degree(int v) const;
  // Iterable view of v's sorted neighbor list.
  std::pair<const int*, const int*> neighbors(int v) const;
  bool has_edge(int u, int v) const;

  // Returns a copy with (u,v) added if absent, removed if present.
  Graph toggle_edge(int u, int v) const;

  // All nodes within L hops of u or v in this graph with (u,v) toggled.
  std::vector<int> receptive_field(int u, int v, int layers) const;

  // (D+I)^{-1/2} (A+I) (D+I)^{-1/2}, sparse symmetric.
  SparseMatrix normalized_adjacency() const;
  // Plain binary adjacency (no self-loops).
  SparseMatrix adjacency() const;
  // Row-normalized adjacency D^{-1} A; zero row for isolated nodes.
  SparseMatrix mean_adjacency() const;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;     // sorted unique, u < v
  std::vector<int> adj_ptr_;    // CSR offsets, size n+1
  std::vector<int> adj_;        // flat sorted neighbor lists
  void build_adjacency();
};

// Disjoint positive partition plus fixed evaluation negatives.
struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
};

struct CalibrationTriple {
  int u = 0;
  int v = 0;
  int label = 0;  // 1 for observed, 0 for sampled negative
};

// Uniformly shuffled 3-way partition of the edges under the seed, with
// matching-size sampled negatives for val and test. Fractions must sum to 1.
EdgeSplit split_edges(const Graph& g, double train_frac, double val_frac,
                      double test_frac, uint64_t seed);

// k distinct unordered non-edges, none in the graph nor in exclude.
std::vector<Edge> sample_negative_edges(const Graph& g, long k, Rng& rng,
                                        const std::vector<Edge>& exclude = {});

}  // namespace edgecal
