#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "edgecal/graph.hpp"
#include "edgecal/matrix.hpp"

namespace edgecal {

struct SbmSpec {
  int blocks = 2;
  int nodes_per_block = 200;
  double p_in = 0.1;
  double p_out = 0.01;
  int feature_dim = 8;

  void validate() const;
};

// Stochastic block model with block-indicator-plus-noise features.
// Deterministic under the seed.
std::pair<Graph, Matrix> generate_sbm(const SbmSpec& spec, uint64_t seed);

// Edge list: one `u<TAB>v` pair per line; `#` starts a comment; blank lines
// ignored. Node count is max id + 1.
Graph load_edge_list(const std::string& path);

// Comma-separated doubles, one node per row.
Matrix load_feature_csv(const std::string& path);

// Degree plus a constant-1 column, used when no feature file is given.
Matrix fallback_features(const Graph& g);

// Loads a dataset; empty feature path selects the fallback features. When
// expected counts are non-negative they are asserted against the loaded data.
std::pair<Graph, Matrix> load_dataset(const std::string& edge_path,
                                      const std::string& feature_path = "",
                                      int expected_nodes = -1,
                                      int expected_features = -1);

void write_edge_list(const Graph& g, const std::string& path);
void write_feature_csv(const Matrix& x, const std::string& path);

}  // namespace edgecal
