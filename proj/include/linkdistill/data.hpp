// SPDX-License-Identifier: Apache-2.0
/**
 * @file   data.hpp
 * @brief  Dataset loading, random edge splits and negative sampling.
 */
#ifndef LINKDISTILL_DATA_HPP_
#define LINKDISTILL_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "linkdistill/graph.hpp"

namespace linkdistill {

/**
 * Train/valid/test partition of a graph's edges plus sampled non-edges.
 *
 * Positives of the three parts are disjoint and cover the original edge
 * set. Valid/test negatives are non-edges of the full graph, equal in number
 * to the matching positives, and free of duplicates across both sets.
 */
struct EdgeSplit {
  std::size_t num_nodes = 0;
  std::vector<Edge> train;
  std::vector<Edge> valid_pos;
  std::vector<Edge> valid_neg;
  std::vector<Edge> test_pos;
  std::vector<Edge> test_neg;
  std::uint64_t seed = 0;
  double val_frac = 0.05;
  double test_frac = 0.15;

  /// Graph over train edges only.
  Graph train_graph() const;

  friend bool operator==(const EdgeSplit&, const EdgeSplit&) = default;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform random edge partition: floor(val_frac * m) validation and
/// floor(test_frac * m) test positives, the rest for training.
EdgeSplit make_split(const Graph& g, double val_frac = 0.05, double test_frac = 0.15,
                     std::uint64_t seed = 0);

/// count uniform non-edges of g (node pairs i != j, stored with i < j),
/// drawn from a stream determined by (seed, epoch). Pairs may repeat.
std::vector<Edge> sample_training_negatives(const Graph& g, std::size_t count,
                                            std::uint64_t seed, std::uint64_t epoch);

/// Split directory: train.txt, valid_pos.txt, valid_neg.txt, test_pos.txt,
/// test_neg.txt (edge lists) and meta.txt (key=value).
void save_split(const std::filesystem::path& dir, const EdgeSplit& split);
EdgeSplit load_split(const std::filesystem::path& dir);

/// Arbitrary string ids remapped to dense 0-based ids in order of first use.
struct IdMap {
  std::vector<std::string> names;
  NodeId intern(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  NodeId at(const std::string& name) const;

 private:
  std::unordered_map<std::string, NodeId> index_;
};

struct LabeledDataset {
  Graph graph;
  FeatureMatrix features;
  std::vector<std::string> node_names;
  std::vector<std::string> labels;
};

/// LINQS citation format (e.g. cora.content / cora.cites):
/// content rows "<paper> <f_1> ... <f_F> <label>", cites rows "<cited> <citing>".
/// Citations that reference papers without a content row are skipped.
LabeledDataset load_linqs(const std::filesystem::path& content, const std::filesystem::path& cites);

}  // namespace linkdistill

#endif  // LINKDISTILL_DATA_HPP_
