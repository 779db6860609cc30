// SPDX-License-Identifier: Apache-2.0
/**
 * @file   ensemble.hpp
 * @brief  Gated ensemble over frozen heuristic-distilled students.
 *
 * The gate sees only the pair features [x_i * x_j ; x_i + x_j] and emits one
 * raw weight per student. The fused probability is
 * clamp(sum_h w_h q_h, eps, 1 - eps).
 */
#ifndef LINKDISTILL_ENSEMBLE_HPP_
#define LINKDISTILL_ENSEMBLE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "linkdistill/data.hpp"
#include "linkdistill/graph.hpp"
#include "linkdistill/nn.hpp"

namespace linkdistill {

inline constexpr double kGateEpsilon = 1e-6;

struct EnsembleConfig {
  double lambda = 0.1;  ///< L1 weight on per-example gate outputs
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  std::size_t hidden = 128;
  double grad_clip = 1.0;
  std::size_t eval_k = 20;
  std::uint64_t seed = 0;
  std::size_t min_students = 2;  ///< 1 permits the degenerate single-student gate

  void validate() const;
};

/// Provenance of one student slot; the gate's output h belongs to it.
struct StudentRef {
  std::string heuristic;
  std::string path;
  std::uint64_t digest = 0;

  friend bool operator==(const StudentRef&, const StudentRef&) = default;
};

struct GateModel {
  Mlp mlp;  ///< dims {2F, hidden, H}
  std::vector<StudentRef> students;
  double epsilon = kGateEpsilon;

  std::size_t num_students() const { return mlp.output_dim(); }
  std::size_t feature_dim() const { return mlp.input_dim() / 2; }

  friend bool operator==(const GateModel&, const GateModel&) = default;
};

/// [x_i * x_j ; x_i + x_j] written into out (size 2F).
template <class Real>
void gate_features(std::span<const float> xi, std::span<const float> xj, std::span<Real> out);

std::vector<float> gate_features(std::span<const float> xi, std::span<const float> xj);

/// clamp(sum_h w_h q_h, eps, 1 - eps).
double fuse(std::span<const double> weights, std::span<const double> q, double eps = kGateEpsilon);

/// Precomputed embeddings of one frozen student for every node.
struct StudentTable {
  const StudentModel* model = nullptr;
  std::vector<float> embeddings;  ///< num_nodes x dim

  StudentTable(const StudentModel& m, const FeatureMatrix& x);
  double probability(NodeId i, NodeId j) const;
};

/// Student probabilities for pairs, row-major (pairs x H).
std::vector<double> student_probabilities(std::span<const StudentTable> students,
                                          std::span<const Edge> pairs);

/// Fused probability for one pair.
double ensemble_predict(const GateModel& gate, std::span<const StudentModel> students,
                        const FeatureMatrix& x, NodeId i, NodeId j);

/// Fused probabilities for many pairs.
std::vector<double> ensemble_predict_pairs(const GateModel& gate,
                                           std::span<const StudentTable> students,
                                           const FeatureMatrix& x, std::span<const Edge> pairs);

/// Raw gate outputs for pairs, row-major (pairs x H).
std::vector<float> gate_weights(const GateModel& gate, const FeatureMatrix& x,
                                std::span<const Edge> pairs);

struct GateLoss {
  double bce = 0.0;  ///< mean over rows
  double l1 = 0.0;   ///< mean over rows of sum_h |w_h|
  double total = 0.0;
};

/**
 * Gate objective on a batch: features (rows x 2F), frozen student
 * probabilities q (rows x H), labels. Accumulates the parameter gradient
 * into grad when non-null.
 */
template <class Real>
GateLoss gate_batch_loss(const BasicMlp<Real>& mlp, std::span<const Real> features,
                         std::size_t rows, std::span<const double> q, std::span<const int> labels,
                         double lambda, double eps, BasicMlp<Real>* grad);

struct GateEpochStats {
  std::size_t epoch = 0;
  GateLoss loss;
  double valid_hits = 0.0;
  double mean_abs_weight = 0.0;  ///< mean over training rows of sum_h |w_h|
};

struct GateResult {
  GateModel gate;
  double best_valid_hits = -1.0;
  std::size_t best_epoch = 0;
  std::vector<GateEpochStats> history;
};

using GateCallback = std::function<void(const GateEpochStats&)>;

/// Trains the gate on split.train plus 1:1 uniform negatives; students stay
/// frozen. Needs at least cfg.min_students students.
GateResult train_gate(const Graph& train_graph, const FeatureMatrix& x,
                      std::span<const StudentModel> students, std::vector<StudentRef> refs,
                      const EdgeSplit& split, const EnsembleConfig& cfg,
                      const GateCallback& on_epoch = {});

/// "EHDMGAT1", epsilon (f64), student count, then per student the digest
/// and length-prefixed heuristic and path strings, then the MLP block.
void save_gate(const std::filesystem::path& path, const GateModel& gate);
GateModel load_gate(const std::filesystem::path& path);

/// Loads the students listed in a gate checkpoint and checks their digests.
std::vector<StudentModel> load_gate_students(const GateModel& gate);

}  // namespace linkdistill

#endif  // LINKDISTILL_ENSEMBLE_HPP_
