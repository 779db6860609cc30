// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Ranking metrics (Hits@K, MRR), positive-edge-set analysis and the
 *         exact KL decomposition used to compare teachers.
 *
 * Ranking convention: a positive counts as a hit only if its score is
 * strictly greater than the K-th largest negative. Ties therefore count
 * against the positive, which matters for heuristics that produce large
 * blocks of equal scores (CSP at its 1/tau floor).
 */
#ifndef LINKDISTILL_METRICS_HPP_
#define LINKDISTILL_METRICS_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace linkdistill {

/// The single comparator that implements the tie rule above.
inline bool ranks_above(double positive, double negative) { return positive > negative; }

/// K-th largest negative score (1-based K). Throws if K > negatives.
double kth_largest(std::span<const double> neg_scores, std::size_t k);

/// Fraction of positives strictly above the K-th largest negative of the
/// shared pool. OpenMP-parallel over positives.
double hits_at_k(std::span<const double> pos_scores, std::span<const double> neg_scores,
                 std::size_t k);

/// Per-positive hit flags under the same rule.
std::vector<bool> hit_flags(std::span<const double> pos_scores, std::span<const double> neg_scores,
                            std::size_t k);

/// Mean of 1 / (1 + #{negatives of that positive scoring strictly higher}).
double mrr(std::span<const double> pos_scores,
           std::span<const std::vector<double>> neg_scores_per_positive);

struct EvalReport {
  std::map<std::size_t, double> hits;  ///< K -> Hits@K
  std::optional<double> mrr;
  std::vector<bool> hit_flags;  ///< at the smallest K
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;
};

/// Hits at every K in ks (ascending); hit_flags at ks.front().
EvalReport evaluate(std::span<const double> pos_scores, std::span<const double> neg_scores,
                    std::span<const std::size_t> ks);

/// key=value report; keys hits@K, num_pos, num_neg, mrr (when set) plus any
/// extra entries.
void write_report(const std::filesystem::path& path, const EvalReport& report,
                  const std::map<std::string, std::string>& extra = {});

/// Indices of positive edges that hit at K.
struct PositiveEdgeSet {
  std::size_t k = 0;
  std::size_t universe = 0;  ///< number of positives the set was drawn from
  std::vector<std::size_t> members;  ///< sorted indices into the positive list

  std::size_t size() const { return members.size(); }
};

PositiveEdgeSet positive_edge_set(std::span<const double> pos_scores,
                                  std::span<const double> neg_scores, std::size_t k);

struct Ratio {
  double value = 0.0;
  bool defined = true;  ///< false when the denominator was empty
};

/// |a n b| / |a|; 0 and undefined when a is empty.
Ratio subset_ratio(const PositiveEdgeSet& a, const PositiveEdgeSet& b);

/// |a n b| / |a u b|; 1 and undefined when both are empty.
Ratio jaccard_overlap(const PositiveEdgeSet& a, const PositiveEdgeSet& b);

// ---- KL decomposition -------------------------------------------------------

/**
 * Finite joint distribution over (x, s) with per-cell link probabilities.
 * prob[x][s] > 0 sums to one; f, teacher tables hold P(link) in (0, 1).
 */
struct DiscreteJoint {
  std::vector<std::vector<double>> prob;
};

using ScoreTable = std::vector<std::vector<double>>;

/// KL between Bernoulli(a) and Bernoulli(b).
double bernoulli_kl(double a, double b);

/// E[teacher | x]: the best feature-only student of a teacher.
std::vector<double> conditional_mean(const DiscreteJoint& joint, const ScoreTable& teacher);

struct KlDecomposition {
  double lhs = 0.0;         ///< KL(f || E[teacher | x]), expected over the joint
  double teacher_kl = 0.0;  ///< KL(f || teacher)
  double correction = 0.0;  ///< E_joint E_f[log teacher - log E[teacher | x]]
  double residual = 0.0;    ///< |lhs - (teacher_kl + correction)|
};

/// Evaluates both sides by exact summation. Throws std::invalid_argument on
/// zero-probability cells or probabilities outside (0, 1).
KlDecomposition verify_kl_decomposition(const DiscreteJoint& joint, const ScoreTable& f,
                                        const ScoreTable& teacher);

struct TeacherComparison {
  KlDecomposition heuristic;
  KlDecomposition other;
  /// The sufficient condition: heuristic.teacher_kl + heuristic.correction
  /// <= other.teacher_kl + other.correction.
  bool condition_favors_heuristic = false;
  /// Direct check of the conclusion: KL(f || E h) <= KL(f || E f~).
  bool heuristic_student_better = false;
};

TeacherComparison compare_teachers(const DiscreteJoint& joint, const ScoreTable& f,
                                   const ScoreTable& heuristic, const ScoreTable& other);

}  // namespace linkdistill

#endif  // LINKDISTILL_METRICS_HPP_
