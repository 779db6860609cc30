// SPDX-License-Identifier: Apache-2.0
/**
 * @file   distill.hpp
 * @brief  Heuristic-to-MLP distillation: anchor/context sampling, teacher
 *         guidance, the ranking and distribution losses, and the student
 *         training loop (BCE + alpha * ranking + beta * distribution).
 */
#ifndef LINKDISTILL_DISTILL_HPP_
#define LINKDISTILL_DISTILL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "linkdistill/data.hpp"
#include "linkdistill/graph.hpp"
#include "linkdistill/heuristics.hpp"
#include "linkdistill/nn.hpp"
#include "linkdistill/rng.hpp"

namespace linkdistill {

struct DistillConfig {
  double alpha = 1.0;   ///< ranking loss weight
  double beta = 1.0;    ///< distribution loss weight
  double delta = 0.1;   ///< ranking margin
  double temperature = 1.0;

  // context sampling
  std::size_t num_nearby = 10;   ///< random walks per anchor
  std::size_t walk_length = 2;   ///< each walk takes 1..walk_length steps
  std::size_t num_random = 10;   ///< uniform non-anchor nodes per anchor

  std::vector<std::size_t> hidden = {256, 256};  ///< encoder widths after the input
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 512;  ///< positive edges per mini-batch
  double grad_clip = 1.0;
  std::size_t eval_k = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One anchor with its context nodes and normalized teacher scores.
struct GuidanceRecord {
  NodeId anchor = 0;
  std::vector<NodeId> context;
  std::vector<double> scores;

  friend bool operator==(const GuidanceRecord&, const GuidanceRecord&) = default;
};

/**
 * Teacher guidance. rounds[r] is one independently sampled context set per
 * anchor; training epoch e reads round e mod rounds.size().
 */
struct GuidanceSet {
  std::string heuristic = "CN";  ///< CN/AA/RA/CSP or an external tag
  int tau = 0;                   ///< 0 when not applicable
  std::vector<std::vector<GuidanceRecord>> rounds;

  bool empty() const;
  std::size_t num_records() const;
  void validate() const;

  friend bool operator==(const GuidanceSet&, const GuidanceSet&) = default;
};

/// Distinct union of random-walk endpoints from v and uniform non-anchor
/// nodes. Throws DataError when fewer than two distinct candidates exist.
std::vector<NodeId> sample_context(const Graph& g, NodeId v, const DistillConfig& cfg, Rng& rng);

/// One guidance round over the given anchors, scored on g (the training
/// graph) and max-normalized per anchor. Scoring is parallel over anchors.
std::vector<GuidanceRecord> build_guidance_round(const Graph& g, const HeuristicKind& kind,
                                                 std::span<const NodeId> anchors,
                                                 const DistillConfig& cfg, std::uint64_t seed);

/// Anchors are all nodes with at least one training edge.
GuidanceSet build_guidance(const Graph& g, const HeuristicKind& kind, const DistillConfig& cfg,
                           std::size_t rounds, std::uint64_t seed);

/// Text format: header "#heuristic=<tag> tau=<int|na>", optional
/// "#round <r>" separators, then "anchor context p" lines. Consecutive lines
/// with the same anchor form one record.
void write_guidance(const std::filesystem::path& path, const GuidanceSet& guidance);
GuidanceSet read_guidance(const std::filesystem::path& path);

// ---- losses ----------------------------------------------------------------

/// Hinge ranking loss over ordered context pairs (i, j), i != j:
/// max(0, -r (q_i - q_j) + delta) with r = sign(p_i - p_j) when
/// |p_i - p_j| > delta. Pairs with r = 0 contribute nothing.
/// Adds d loss / d q into grad_q when given.
double loss_ranking(std::span<const double> p, std::span<const double> q, double delta,
                    std::span<double> grad_q = {});

/// Cross-entropy -sum softmax(p/t) log softmax(q/t). Adds d loss / d q into
/// grad_q when given.
double loss_distribution(std::span<const double> p, std::span<const double> q, double t,
                         std::span<double> grad_q = {});

struct LossWeights {
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 0.1;
  double temperature = 1.0;
};

struct LossBreakdown {
  double bce = 0.0;           ///< mean over labeled pairs
  double ranking = 0.0;       ///< mean over guidance records
  double distribution = 0.0;  ///< mean over guidance records
  double total = 0.0;
};

/// One mini-batch: labeled pairs plus guidance records.
struct DistillBatch {
  std::span<const Edge> positives;
  std::span<const Edge> negatives;
  std::span<const GuidanceRecord> records;
};

/**
 * Combined objective bce + alpha * ranking + beta * distribution for one
 * batch. When grad is non-null the exact parameter gradient is accumulated
 * into it. Used both by training (float) and by gradient checks (double).
 */
template <class Real>
LossBreakdown distill_batch_loss(const BasicStudent<Real>& model, const FeatureMatrix& x,
                                 const DistillBatch& batch, const LossWeights& w,
                                 BasicStudent<Real>* grad);

// ---- student training --------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  LossBreakdown loss;  ///< averaged over the epoch's batches
  double valid_hits = 0.0;
};

struct DistillResult {
  StudentModel model;  ///< parameters from the best validation epoch
  double best_valid_hits = -1.0;
  std::size_t best_epoch = 0;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains a student on split.train (+ 1:1 uniform negatives per epoch) and
/// the guidance records. With alpha = beta = 0 the guidance may be empty and
/// training reduces to a plain supervised MLP.
DistillResult train_student(const Graph& train_graph, const FeatureMatrix& x,
                            const GuidanceSet& guidance, const EdgeSplit& split,
                            const DistillConfig& cfg, const EpochCallback& on_epoch = {});

/// Link probabilities for arbitrary pairs; every node is encoded once.
std::vector<double> predict_pairs(const StudentModel& m, const FeatureMatrix& x,
                                  std::span<const Edge> pairs);

/// Embeddings of all nodes, row-major (num_nodes x embedding_dim).
std::vector<float> encode_all(const StudentModel& m, const FeatureMatrix& x);

}  // namespace linkdistill

#endif  // LINKDISTILL_DISTILL_HPP_
