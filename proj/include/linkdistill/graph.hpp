// SPDX-License-Identifier: Apache-2.0
/**
 * @file   graph.hpp
 * @brief  Immutable undirected graph in compressed adjacency form, node
 *         feature matrix, and their file formats.
 */
#ifndef LINKDISTILL_GRAPH_HPP_
#define LINKDISTILL_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace linkdistill {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Raised for malformed input files and out-of-range node ids.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Undirected simple graph stored as offsets + flat sorted neighbor ids.
 *
 * Invariants: symmetric adjacency, strictly increasing neighbor lists, no
 * self loops, offsets()[num_nodes()] == 2 * num_edges(). Instances are never
 * mutated after construction and may be shared freely between threads.
 */
class Graph {
 public:
  Graph() : offsets_(1, 0) {}

  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId i) const {
    check_node(i);
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }

  std::size_t degree(NodeId i) const {
    check_node(i);
    return offsets_[i + 1] - offsets_[i];
  }

  /// Binary search in the shorter of the two neighbor lists.
  bool has_edge(NodeId i, NodeId j) const;

  /// Sorted common neighbors of i and j (merge of two sorted lists).
  std::vector<NodeId> intersect_neighbors(NodeId i, NodeId j) const;

  /// Canonical edge list, each edge once with first < second, sorted.
  std::vector<Edge> edges() const;

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> flat_neighbors() const { return neighbors_; }

  void check_node(NodeId i) const {
    if (i >= num_nodes())
      throw GraphError("node " + std::to_string(i) + " out of range (num_nodes=" +
                       std::to_string(num_nodes()) + ")");
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend struct GraphBuilder;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
};

struct BuildStats {
  std::size_t dropped_self_loops = 0;
  std::size_t dropped_duplicates = 0;
};

/// Canonicalizes an arbitrary pair list into a Graph. Mirrored pairs and
/// repeats count as duplicates; both kinds of dropped input are reported.
Graph build_graph(std::size_t num_nodes, std::span<const Edge> edge_pairs,
                  BuildStats* stats = nullptr);

/// Row-major dense node features. Sparse inputs (bag-of-words) are common;
/// the MLP layers skip zero entries.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t num_nodes, std::size_t dim, std::vector<float> values);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> row(NodeId i) const {
    return {values_.data() + static_cast<std::size_t>(i) * dim_, dim_};
  }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t num_nodes_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// ---- file formats ----------------------------------------------------------

/// Whitespace-separated pairs, one per line; '#' lines are comments.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges,
                     const std::string& header = {});

/// Graph from an edge list; num_nodes defaults to 1 + max id seen.
Graph load_graph(const std::filesystem::path& path, std::size_t num_nodes = 0,
                 BuildStats* stats = nullptr);

/// Binary "EHDMFEA1" format or CSV, chosen by sniffing the magic bytes.
FeatureMatrix load_features(const std::filesystem::path& path);
FeatureMatrix load_features_csv(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureMatrix& x);

}  // namespace linkdistill

#endif  // LINKDISTILL_GRAPH_HPP_
