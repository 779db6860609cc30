// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "binary_io.hpp"

namespace linkdistill {

struct GraphBuilder {
  static Graph build(std::size_t num_nodes, std::span<const Edge> pairs, BuildStats* stats) {
    BuildStats local;
    std::vector<Edge> canon;
    canon.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      if (a >= num_nodes || b >= num_nodes)
        throw GraphError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                         ") references a node >= num_nodes=" + std::to_string(num_nodes));
      if (a == b) {
        ++local.dropped_self_loops;
        continue;
      }
      canon.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(canon.begin(), canon.end());
    const auto last = std::unique(canon.begin(), canon.end());
    local.dropped_duplicates = static_cast<std::size_t>(canon.end() - last);
    canon.erase(last, canon.end());

    Graph g;
    g.offsets_.assign(num_nodes + 1, 0);
    for (const auto& [a, b] : canon) {
      ++g.offsets_[a + 1];
      ++g.offsets_[b + 1];
    }
    for (std::size_t i = 0; i < num_nodes; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.neighbors_.resize(2 * canon.size());
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& [a, b] : canon) g.neighbors_[cursor[a]++] = b;
    for (const auto& [a, b] : canon) g.neighbors_[cursor[b]++] = a;
    for (std::size_t i = 0; i < num_nodes; ++i)
      std::sort(g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]),
                g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]));

    if (local.dropped_self_loops + local.dropped_duplicates > 0)
      std::clog << "build_graph: dropped " << local.dropped_self_loops << " self-loop(s), "
                << local.dropped_duplicates << " duplicate edge(s)\n";
    if (stats) *stats = local;
    return g;
  }
};

Graph build_graph(std::size_t num_nodes, std::span<const Edge> edge_pairs, BuildStats* stats) {
  return GraphBuilder::build(num_nodes, edge_pairs, stats);
}

bool Graph::has_edge(NodeId i, NodeId j) const {
  auto ni = neighbors(i);
  auto nj = neighbors(j);
  if (ni.size() > nj.size()) {
    std::swap(ni, nj);
    std::swap(i, j);
  }
  return std::binary_search(ni.begin(), ni.end(), j);
}

std::vector<NodeId> Graph::intersect_neighbors(NodeId i, NodeId j) const {
  const auto a = neighbors(i);
  const auto b = neighbors(j);
  std::vector<NodeId> out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId i = 0; i < num_nodes(); ++i)
    for (NodeId j : neighbors(i))
      if (i < j) out.emplace_back(i, j);
  return out;
}

FeatureMatrix::FeatureMatrix(std::size_t num_nodes, std::size_t dim, std::vector<float> values)
    : num_nodes_(num_nodes), dim_(dim), values_(std::move(values)) {
  if (values_.size() != num_nodes_ * dim_)
    throw GraphError("feature matrix size mismatch: expected " + std::to_string(num_nodes_ * dim_) +
                     " values, got " + std::to_string(values_.size()));
  for (float v : values_)
    if (!std::isfinite(v)) throw GraphError("feature matrix contains a non-finite value");
}

// ---- file formats ----------------------------------------------------------

namespace {

constexpr std::string_view kFeatureMagic = "EHDMFEA1";

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, mode);
  if (!in) throw GraphError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    long long a = -1, b = -1;
    if (!(ss >> a >> b) || a < 0 || b < 0 || a > UINT32_MAX || b > UINT32_MAX)
      throw GraphError(path.string() + ":" + std::to_string(lineno) + ": expected two node ids");
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }
  return edges;
}

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges,
                     const std::string& header) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write " + path.string());
  if (!header.empty()) out << '#' << header << '\n';
  for (const auto& [a, b] : edges) out << a << ' ' << b << '\n';
}

Graph load_graph(const std::filesystem::path& path, std::size_t num_nodes, BuildStats* stats) {
  const auto edges = read_edge_list(path);
  std::size_t n = num_nodes;
  if (n == 0)
    for (const auto& [a, b] : edges) n = std::max<std::size_t>(n, std::max(a, b) + 1u);
  return build_graph(n, edges, stats);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::string magic(kFeatureMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kFeatureMagic) return load_features_csv(path);
  const auto n = binio::read_u64(in);
  const auto f = binio::read_u64(in);
  std::vector<float> values(n * f);
  for (auto& v : values) v = binio::read_f32(in);
  return FeatureMatrix(n, f, std::move(values));
}

FeatureMatrix load_features_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<float> values;
  std::size_t rows = 0, dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t cols = 0;
    float v = 0;
    while (ss >> v) {
      values.push_back(v);
      ++cols;
    }
    if (!ss.eof()) throw GraphError(path.string() + ": non-numeric feature value in row " +
                                    std::to_string(rows));
    if (cols == 0) continue;
    if (rows == 0) dim = cols;
    if (cols != dim) throw GraphError(path.string() + ": ragged feature row " + std::to_string(rows));
    ++rows;
  }
  return FeatureMatrix(rows, dim, std::move(values));
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GraphError("cannot write " + path.string());
  binio::write_magic(out, kFeatureMagic);
  binio::write_u64(out, x.num_nodes());
  binio::write_u64(out, x.dim());
  for (float v : x.values()) binio::write_f32(out, v);
}

}  // namespace linkdistill
