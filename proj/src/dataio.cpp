#include "edgecal/dataio.hpp"

#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include "edgecal/error.hpp"

namespace edgecal {

void SbmSpec::validate() const {
  if (blocks < 1 || nodes_per_block < 1)
    throw ContractError("sbm: blocks and nodes_per_block must be positive");
  if (feature_dim < 1) throw ContractError("sbm: feature_dim must be positive");
  if (!(0.0 <= p_out && p_out < p_in && p_in <= 1.0))
    throw ContractError("sbm: need 0 <= p_out < p_in <= 1");
}

std::pair<Graph, Matrix> generate_sbm(const SbmSpec& spec, uint64_t seed) {
  spec.validate();
  int n = spec.blocks * spec.nodes_per_block;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    int bu = u / spec.nodes_per_block;
    for (int v = u + 1; v < n; ++v) {
      double p = bu == v / spec.nodes_per_block ? spec.p_in : spec.p_out;
      if (unif(rng) < p) edges.push_back({u, v});
    }
  }

  std::normal_distribution<double> noise(0.0, 0.1);
  Matrix x(n, spec.feature_dim, 0.0);
  for (int i = 0; i < n; ++i) {
    x.at(i, (i / spec.nodes_per_block) % spec.feature_dim) = 1.0;
    for (int j = 0; j < spec.feature_dim; ++j) x.at(i, j) += noise(rng);
  }
  return {Graph(n, edges), x};
}

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open edge file: " + path);
  std::vector<Edge> edges;
  int max_id = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u >> v))
      throw ParseError("edge line needs two integer node ids", line_no);
    std::string trailing;
    if (ss >> trailing) throw ParseError("trailing tokens on edge line", line_no);
    if (u < 0 || v < 0 || u > 1'000'000'000 || v > 1'000'000'000)
      throw ParseError("node id out of range", line_no);
    edges.push_back({static_cast<int>(u), static_cast<int>(v)});
    max_id = std::max(max_id, static_cast<int>(std::max(u, v)));
  }
  return Graph(max_id + 1, edges);
}

Matrix load_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open feature file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
          ++pos;
        if (pos != cell.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("malformed feature value '" + cell + "'", line_no);
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw ParseError("feature row width differs from first row", line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ContractError("feature file is empty: " + path);
  return Matrix::from_rows(rows);
}

Matrix fallback_features(const Graph& g) {
  Matrix x(g.node_count(), 2);
  for (int v = 0; v < g.node_count(); ++v) {
    x.at(v, 0) = g.degree(v);
    x.at(v, 1) = 1.0;
  }
  return x;
}

std::pair<Graph, Matrix> load_dataset(const std::string& edge_path,
                                      const std::string& feature_path,
                                      int expected_nodes, int expected_features) {
  Graph g = load_edge_list(edge_path);
  Matrix x = feature_path.empty() ? fallback_features(g)
                                  : load_feature_csv(feature_path);
  if (x.rows != g.node_count())
    throw ContractError("feature rows (" + std::to_string(x.rows) +
                        ") do not match node count (" +
                        std::to_string(g.node_count()) + ")");
  if (expected_nodes >= 0 && g.node_count() != expected_nodes)
    throw ContractError("dataset sanity check: expected " +
                        std::to_string(expected_nodes) + " nodes, loaded " +
                        std::to_string(g.node_count()));
  if (expected_features >= 0 && x.cols != expected_features)
    throw ContractError("dataset sanity check: expected " +
                        std::to_string(expected_features) + " features, loaded " +
                        std::to_string(x.cols));
  return {std::move(g), std::move(x)};
}

void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write edge file: " + path);
  out << "# " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
  for (const Edge& e : g.edges()) out << e.first << '\t' << e.second << '\n';
}

void write_feature_csv(const Matrix& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write feature file: " + path);
  out.precision(17);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) out << (j ? "," : "") << x.at(i, j);
    out << '\n';
  }
}

}  // namespace edgecal
