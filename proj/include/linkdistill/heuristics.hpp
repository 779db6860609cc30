// SPDX-License-Identifier: Apache-2.0
/**
 * @file   heuristics.hpp
 * @brief  Structural teacher heuristics: common neighbors (CN), Adamic-Adar
 *         (AA), resource allocation (RA) and capped shortest path (CSP).
 *
 * All scores are computed on whatever graph is passed in. For distillation
 * guidance that is the training graph, never the full graph.
 */
#ifndef LINKDISTILL_HEURISTICS_HPP_
#define LINKDISTILL_HEURISTICS_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linkdistill/graph.hpp"

namespace linkdistill {

enum class HeuristicTag { CN, AA, RA, CSP };

struct HeuristicKind {
  HeuristicTag tag = HeuristicTag::CN;
  int tau = 0;  ///< path-length cap; meaningful for CSP only

  static HeuristicKind cn() { return {HeuristicTag::CN, 0}; }
  static HeuristicKind aa() { return {HeuristicTag::AA, 0}; }
  static HeuristicKind ra() { return {HeuristicTag::RA, 0}; }
  /// Throws std::invalid_argument unless tau >= 2 and even.
  static HeuristicKind csp(int tau = 6);

  /// Accepts "CN", "AA", "RA", "CSP" (tau 6) or "CSP:<tau>", case-insensitive.
  static HeuristicKind parse(std::string_view text);

  std::string name() const;  ///< "CN", "AA", "RA" or "CSP"
  std::string spec() const;  ///< round-trips through parse(), e.g. "CSP:6"

  friend bool operator==(const HeuristicKind&, const HeuristicKind&) = default;
};

struct ScoredPair {
  NodeId i = 0;
  NodeId j = 0;
  double score = 0.0;
};

double score_cn(const Graph& g, NodeId i, NodeId j);
double score_aa(const Graph& g, NodeId i, NodeId j);  ///< natural log
double score_ra(const Graph& g, NodeId i, NodeId j);

/// Unweighted shortest-path length by bidirectional BFS with each side
/// limited to tau/2 levels. Returns 0 when i == j and tau + 1 when no path
/// of length <= tau exists.
int capped_distance(const Graph& g, NodeId i, NodeId j, int tau);

/// 1 / min(tau, SP(i, j)); unreachable pairs score 1/tau. Rejects i == j.
double score_csp(const Graph& g, NodeId i, NodeId j, int tau);

double score_pair(const Graph& g, NodeId i, NodeId j, const HeuristicKind& kind);

/// Order-preserving batch scoring, OpenMP-parallel over pairs.
std::vector<ScoredPair> score_batch(const Graph& g, std::span<const Edge> pairs,
                                    const HeuristicKind& kind);

/// Single-threaded reference for score_batch; kept for tests and benchmarks.
std::vector<ScoredPair> score_batch_serial(const Graph& g, std::span<const Edge> pairs,
                                           const HeuristicKind& kind);

/// Raw scores only, same order as pairs.
std::vector<double> score_values(const Graph& g, std::span<const Edge> pairs,
                                 const HeuristicKind& kind);

/// Per-anchor max normalization into [0, 1]; all-zero lists stay zero.
std::vector<double> normalize_scores(std::span<const double> scores);
std::vector<std::vector<double>> normalize_guidance(
    const std::vector<std::vector<double>>& per_anchor_scores);

}  // namespace linkdistill

#endif  // LINKDISTILL_HEURISTICS_HPP_
