#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "edgecal/dataio.hpp"
#include "edgecal/error.hpp"
#include "edgecal/graph.hpp"

using namespace edgecal;

namespace {

double sparse_at(const SparseMatrix& s, int i, int j) {
  for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p)
    if (s.col_idx[p] == j) return s.vals[p];
  return 0.0;
}

}  // namespace

TEST_CASE("graph construction symmetrizes, dedups, drops self-loops") {
  Graph g(3, {{0, 1}, {1, 0}, {0, 1}, {2, 2}});
  CHECK(g.edge_count() == 1);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(2, 2));
  CHECK(g.degree(2) == 0);
}

TEST_CASE("normalized adjacency hand values") {
  // 2 nodes, 1 edge: every entry is 1/sqrt(2*2) = 0.5
  Graph pair(2, {{0, 1}});
  SparseMatrix s = pair.normalized_adjacency();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(sparse_at(s, i, j) == doctest::Approx(0.5).epsilon(1e-15));

  Graph isolated(1, {});
  CHECK(sparse_at(isolated.normalized_adjacency(), 0, 0) == 1.0);

  // path 0-1-2: entry (0,1) = 1/sqrt((1+1)(2+1)) = 1/sqrt(6)
  Graph path(3, {{0, 1}, {1, 2}});
  SparseMatrix sp = path.normalized_adjacency();
  CHECK(sparse_at(sp, 0, 1) ==
        doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  // symmetry
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(sparse_at(sp, i, j) == sparse_at(sp, j, i));
}

TEST_CASE("normalized adjacency of a k-regular graph is constant 1/(k+1)") {
  // 4-cycle, k = 2
  Graph cyc(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  SparseMatrix s = cyc.normalized_adjacency();
  for (size_t p = 0; p < s.vals.size(); ++p)
    CHECK(s.vals[p] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("split_edges: counts, determinism, contract errors") {
  std::vector<Edge> edges;
  for (int i = 0; i < 100; ++i) edges.push_back({i, 100 + i});
  Graph g(200, edges);

  EdgeSplit s = split_edges(g, 0.8, 0.1, 0.1, 9);
  CHECK(s.train_pos.size() == 80);
  CHECK(s.val_pos.size() == 10);
  CHECK(s.test_pos.size() == 10);
  CHECK(s.val_neg.size() == 10);
  CHECK(s.test_neg.size() == 10);

  EdgeSplit s2 = split_edges(g, 0.8, 0.1, 0.1, 9);
  CHECK(s.train_pos == s2.train_pos);
  CHECK(s.val_neg == s2.val_neg);
  CHECK(s.test_neg == s2.test_neg);

  // positives partition E, negatives avoid E and each other
  std::set<Edge> all(s.train_pos.begin(), s.train_pos.end());
  all.insert(s.val_pos.begin(), s.val_pos.end());
  all.insert(s.test_pos.begin(), s.test_pos.end());
  CHECK(all.size() == 100);
  for (const Edge& e : s.val_neg) CHECK_FALSE(g.has_edge(e.first, e.second));
  for (const Edge& e : s.test_neg) {
    CHECK_FALSE(g.has_edge(e.first, e.second));
    CHECK(std::find(s.val_neg.begin(), s.val_neg.end(), e) == s.val_neg.end());
  }

  CHECK_THROWS_AS(split_edges(g, 0.8, 0.1, 0.2, 1), ContractError);
  Graph tiny(5, {{0, 1}, {1, 2}});
  CHECK_THROWS_AS(split_edges(tiny, 0.8, 0.1, 0.1, 1), ContractError);
}

TEST_CASE("negative sampling feasibility and exhaustion") {
  Graph k3(3, {{0, 1}, {0, 2}, {1, 2}});
  Rng rng(1);
  CHECK_THROWS_AS(sample_negative_edges(k3, 1, rng), ContractError);

  Graph empty4(4, {});
  std::vector<Edge> all = sample_negative_edges(empty4, 6, rng);
  CHECK(all.size() == 6);
  std::set<Edge> unique(all.begin(), all.end());
  CHECK(unique.size() == 6);
}

TEST_CASE("negative samples never overlap the edge set") {
  SbmSpec spec;
  spec.nodes_per_block = 100;
  auto [g, x] = generate_sbm(spec, 17);
  Rng rng(3);
  for (const Edge& e : sample_negative_edges(g, 1000, rng)) {
    CHECK_FALSE(g.has_edge(e.first, e.second));
    CHECK(e.first < e.second);
  }
}

TEST_CASE("toggle_edge involution and locality") {
  Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Graph added = g.toggle_edge(0, 4);
  CHECK(added.has_edge(0, 4));
  CHECK(added.degree(0) == g.degree(0) + 1);
  CHECK(added.degree(4) == g.degree(4) + 1);
  Graph back = added.toggle_edge(0, 4);
  CHECK(back.edges() == g.edges());

  Graph removed = g.toggle_edge(1, 2);
  CHECK_FALSE(removed.has_edge(1, 2));
  CHECK(removed.degree(1) == g.degree(1) - 1);
  // other adjacency lists untouched
  for (int v : {0, 3, 4}) {
    auto [lo1, hi1] = g.neighbors(v);
    auto [lo2, hi2] = removed.neighbors(v);
    CHECK(std::vector<int>(lo1, hi1) == std::vector<int>(lo2, hi2));
  }

  CHECK_THROWS_AS(g.toggle_edge(2, 2), ContractError);
}

TEST_CASE("receptive field definitions") {
  Graph g(7, {{0, 1}, {1, 2}, {2, 3}, {4, 5}});

  // L=1: {u,v} plus both neighborhoods
  std::vector<int> f1 = g.receptive_field(1, 2, 1);
  CHECK(f1 == std::vector<int>{0, 1, 2, 3});

  // disconnected endpoints with large L: union of the two components
  std::vector<int> f2 = g.receptive_field(0, 4, 10);
  CHECK(f2 == std::vector<int>{0, 1, 2, 3, 4, 5});

  CHECK_THROWS_AS(g.receptive_field(0, 1, 0), ContractError);
}

TEST_CASE("receptive field matches BFS oracle on SBM") {
  SbmSpec spec;
  spec.nodes_per_block = 40;
  auto [g, x] = generate_sbm(spec, 5);
  Rng rng(8);
  std::uniform_int_distribution<int> pick(0, g.node_count() - 1);
  for (int trial = 0; trial < 20; ++trial) {
    int u = pick(rng), v = pick(rng);
    if (u == v) continue;
    // brute-force BFS on the toggled graph from {u, v}
    Graph t = g.toggle_edge(u, v);
    std::vector<int> dist(g.node_count(), -1);
    std::vector<int> frontier = {u, v};
    dist[u] = dist[v] = 0;
    for (int hop = 1; hop <= 2; ++hop) {
      std::vector<int> next;
      for (int w : frontier) {
        auto [lo, hi] = t.neighbors(w);
        for (const int* p = lo; p != hi; ++p)
          if (dist[*p] < 0) {
            dist[*p] = hop;
            next.push_back(*p);
          }
      }
      frontier = std::move(next);
    }
    std::vector<int> oracle;
    for (int w = 0; w < g.node_count(); ++w)
      if (dist[w] >= 0) oracle.push_back(w);
    CHECK(g.receptive_field(u, v, 2) == oracle);
  }
}
