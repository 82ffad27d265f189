#include "edgecal/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "edgecal/error.hpp"

namespace edgecal {

Graph::Graph(int node_count, const std::vector<Edge>& edges) : n_(node_count) {
  if (node_count < 0) throw ContractError("negative node count");
  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.first == e.second) continue;  // self-loops dropped
    if (e.first < 0 || e.second < 0 || e.first >= n_ || e.second >= n_)
      throw ContractError("edge endpoint out of range");
    edges_.push_back(make_edge(e.first, e.second));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  build_adjacency();
}

void Graph::build_adjacency() {
  adj_ptr_.assign(n_ + 1, 0);
  for (const Edge& e : edges_) {
    adj_ptr_[e.first + 1]++;
    adj_ptr_[e.second + 1]++;
  }
  for (int i = 0; i < n_; ++i) adj_ptr_[i + 1] += adj_ptr_[i];
  adj_.assign(adj_ptr_[n_], 0);
  std::vector<int> cursor(adj_ptr_.begin(), adj_ptr_.end() - 1);
  for (const Edge& e : edges_) {
    adj_[cursor[e.first]++] = e.second;
    adj_[cursor[e.second]++] = e.first;
  }
  for (int v = 0; v < n_; ++v)
    std::sort(adj_.begin() + adj_ptr_[v], adj_.begin() + adj_ptr_[v + 1]);
}

int Graph::degree(int v) const {
  if (v < 0 || v >= n_) throw ContractError("node id out of range");
  return adj_ptr_[v + 1] - adj_ptr_[v];
}

std::pair<const int*, const int*> Graph::neighbors(int v) const {
  if (v < 0 || v >= n_) throw ContractError("node id out of range");
  return {adj_.data() + adj_ptr_[v], adj_.data() + adj_ptr_[v + 1]};
}

bool Graph::has_edge(int u, int v) const {
  if (u == v) return false;
  auto [lo, hi] = neighbors(u);
  return std::binary_search(lo, hi, v);
}

Graph Graph::toggle_edge(int u, int v) const {
  if (u == v) throw ContractError("toggle_edge: u must differ from v");
  if (u < 0 || v < 0 || u >= n_ || v >= n_)
    throw ContractError("toggle_edge: node id out of range");
  std::vector<Edge> edges = edges_;
  Edge e = make_edge(u, v);
  auto it = std::lower_bound(edges.begin(), edges.end(), e);
  if (it != edges.end() && *it == e)
    edges.erase(it);
  else
    edges.insert(it, e);
  return Graph(n_, edges);
}

std::vector<int> Graph::receptive_field(int u, int v, int layers) const {
  if (layers < 1) throw ContractError("receptive_field: layers must be >= 1");
  if (u < 0 || v < 0 || u >= n_ || v >= n_)
    throw ContractError("receptive_field: node id out of range");
  // Multi-source BFS from {u,v}. Since the toggled edge joins the two
  // sources, hop distances from the pair agree between the original and the
  // toggled graph, so this set matches BFS in either one.
  std::vector<int> dist(n_, -1);
  std::queue<int> q;
  dist[u] = 0;
  q.push(u);
  if (dist[v] < 0) {
    dist[v] = 0;
    q.push(v);
  }
  std::vector<int> out;
  while (!q.empty()) {
    int w = q.front();
    q.pop();
    out.push_back(w);
    if (dist[w] == layers) continue;
    auto [lo, hi] = neighbors(w);
    for (const int* p = lo; p != hi; ++p) {
      if (dist[*p] < 0) {
        dist[*p] = dist[w] + 1;
        q.push(*p);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SparseMatrix Graph::normalized_adjacency() const {
  SparseMatrix s;
  s.rows = s.cols = n_;
  s.row_ptr.assign(n_ + 1, 0);
  std::vector<double> inv_sqrt(n_);
  for (int v = 0; v < n_; ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(degree(v) + 1));
  for (int v = 0; v < n_; ++v) s.row_ptr[v + 1] = s.row_ptr[v] + degree(v) + 1;
  s.col_idx.reserve(s.row_ptr[n_]);
  s.vals.reserve(s.row_ptr[n_]);
  for (int v = 0; v < n_; ++v) {
    auto [lo, hi] = neighbors(v);
    const int* p = lo;
    bool self_emitted = false;
    // keep columns sorted with the self-loop in place
    for (; p != hi; ++p) {
      if (!self_emitted && *p > v) {
        s.col_idx.push_back(v);
        s.vals.push_back(inv_sqrt[v] * inv_sqrt[v]);
        self_emitted = true;
      }
      s.col_idx.push_back(*p);
      s.vals.push_back(inv_sqrt[v] * inv_sqrt[*p]);
    }
    if (!self_emitted) {
      s.col_idx.push_back(v);
      s.vals.push_back(inv_sqrt[v] * inv_sqrt[v]);
    }
  }
  return s;
}

SparseMatrix Graph::adjacency() const {
  SparseMatrix s;
  s.rows = s.cols = n_;
  s.row_ptr.assign(n_ + 1, 0);
  for (int v = 0; v < n_; ++v) s.row_ptr[v + 1] = s.row_ptr[v] + degree(v);
  s.col_idx.assign(adj_.begin(), adj_.end());
  s.vals.assign(adj_.size(), 1.0);
  return s;
}

SparseMatrix Graph::mean_adjacency() const {
  SparseMatrix s = adjacency();
  for (int v = 0; v < n_; ++v) {
    int d = degree(v);
    if (d == 0) continue;
    double w = 1.0 / d;
    for (int p = s.row_ptr[v]; p < s.row_ptr[v + 1]; ++p) s.vals[p] = w;
  }
  return s;
}

EdgeSplit split_edges(const Graph& g, double train_frac, double val_frac,
                      double test_frac, uint64_t seed) {
  if (std::fabs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ContractError("split_edges: fractions must sum to 1");
  if (train_frac <= 0.0 || val_frac < 0.0 || test_frac < 0.0)
    throw ContractError("split_edges: invalid fractions");
  long m = g.edge_count();
  if (m < 10) throw ContractError("split_edges: need at least 10 edges");

  Rng rng(seed);
  std::vector<Edge> shuffled = g.edges();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  long n_train = static_cast<long>(train_frac * static_cast<double>(m) + 0.5);
  long n_val = static_cast<long>(val_frac * static_cast<double>(m) + 0.5);
  if (n_train + n_val > m) n_val = m - n_train;
  long n_test = m - n_train - n_val;

  EdgeSplit split;
  split.train_pos.assign(shuffled.begin(), shuffled.begin() + n_train);
  split.val_pos.assign(shuffled.begin() + n_train,
                       shuffled.begin() + n_train + n_val);
  split.test_pos.assign(shuffled.begin() + n_train + n_val, shuffled.end());

  split.val_neg = sample_negative_edges(g, n_val, rng);
  split.test_neg = sample_negative_edges(g, n_test, rng, split.val_neg);
  return split;
}

namespace {

struct EdgeKey {
  size_t operator()(const Edge& e) const {
    return std::hash<long long>()((static_cast<long long>(e.first) << 32) |
                                  static_cast<unsigned>(e.second));
  }
};

}  // namespace

std::vector<Edge> sample_negative_edges(const Graph& g, long k, Rng& rng,
                                        const std::vector<Edge>& exclude) {
  if (k < 0) throw ContractError("sample_negative_edges: negative count");
  long n = g.node_count();
  long total_pairs = n * (n - 1) / 2;
  long available = total_pairs - g.edge_count();
  if (k > available)
    throw ContractError("sample_negative_edges: requested " + std::to_string(k) +
                        " non-edges but only " + std::to_string(available) +
                        " exist");
  std::unordered_set<Edge, EdgeKey> taken(exclude.begin(), exclude.end());

  std::vector<Edge> out;
  out.reserve(k);
  if (k * 3 >= available) {
    // Near-exhaustive request: enumerate and shuffle.
    std::vector<Edge> pool;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (!g.has_edge(u, v) && !taken.count({u, v})) pool.push_back({u, v});
    if (static_cast<long>(pool.size()) < k)
      throw ContractError("sample_negative_edges: exclusions leave too few pairs");
    std::shuffle(pool.begin(), pool.end(), rng);
    out.assign(pool.begin(), pool.begin() + k);
    return out;
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
  while (static_cast<long>(out.size()) < k) {
    int u = pick(rng);
    int v = pick(rng);
    if (u == v) continue;
    Edge e = make_edge(u, v);
    if (g.has_edge(e.first, e.second) || taken.count(e)) continue;
    taken.insert(e);
    out.push_back(e);
  }
  return out;
}

}  // namespace edgecal
