// SPDX-License-Identifier: Apache-2.0
// Shared test fixtures: random graphs and a small featured citation-like graph.
#ifndef LINKDISTILL_TESTS_FIXTURES_HPP_
#define LINKDISTILL_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "linkdistill/graph.hpp"

namespace fixtures {

using linkdistill::Edge;
using linkdistill::NodeId;

inline std::vector<Edge> erdos_renyi(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return edges;
}

inline linkdistill::Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return linkdistill::build_graph(n, edges);
}

inline linkdistill::Graph complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return linkdistill::build_graph(n, edges);
}

struct FeaturedGraph {
  linkdistill::Graph graph;
  linkdistill::FeatureMatrix features;
};

/**
 * Nodes sit on a circle; nearby nodes link with high probability, plus a few
 * random long-range edges. Each node's binary bag-of-words mixes words tied
 * to its position with random words, so features predict links partially and
 * common neighbors carry extra signal.
 */
inline FeaturedGraph featured_graph(std::size_t n, std::size_t dim, std::uint64_t seed,
                                    double radius = 0.012, double p_near = 0.5,
                                    double p_far = 0.0006) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> pos(n);
  for (auto& p : pos) p = unit(rng);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) {
      double d = std::abs(pos[i] - pos[j]);
      d = std::min(d, 1.0 - d);
      const double p = d < radius ? p_near : p_far;
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  std::vector<float> x(n * dim, 0.0f);
  std::normal_distribution<double> jitter(0.0, 0.02);
  std::uniform_int_distribution<std::size_t> any(0, dim - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (int w = 0; w < 12; ++w) {
      double c = pos[i] + jitter(rng);
      c -= std::floor(c);
      x[i * dim + std::min(dim - 1, static_cast<std::size_t>(c * static_cast<double>(dim)))] = 1.0f;
    }
    for (int w = 0; w < 6; ++w) x[i * dim + any(rng)] = 1.0f;
  }
  return {linkdistill::build_graph(n, edges), linkdistill::FeatureMatrix(n, dim, std::move(x))};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("linkdistill_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures

#endif  // LINKDISTILL_TESTS_FIXTURES_HPP_
