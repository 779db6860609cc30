// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace linkdistill {

double kth_largest(std::span<const double> neg_scores, std::size_t k) {
  if (k == 0) throw std::invalid_argument("hits: K must be >= 1");
  if (k > neg_scores.size())
    throw std::invalid_argument("hits: K=" + std::to_string(k) + " exceeds the " +
                                std::to_string(neg_scores.size()) + " available negatives");
  std::vector<double> tmp(neg_scores.begin(), neg_scores.end());
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k - 1), tmp.end(),
                   std::greater<>());
  return tmp[k - 1];
}

std::vector<bool> hit_flags(std::span<const double> pos_scores, std::span<const double> neg_scores,
                            std::size_t k) {
  const double threshold = kth_largest(neg_scores, k);
  std::vector<bool> flags(pos_scores.size());
  for (std::size_t i = 0; i < pos_scores.size(); ++i)
    flags[i] = ranks_above(pos_scores[i], threshold);
  return flags;
}

double hits_at_k(std::span<const double> pos_scores, std::span<const double> neg_scores,
                 std::size_t k) {
  const double threshold = kth_largest(neg_scores, k);
  if (pos_scores.empty()) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(pos_scores.size());
  std::ptrdiff_t hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (ranks_above(pos_scores[static_cast<std::size_t>(i)], threshold)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pos_scores.size());
}

double mrr(std::span<const double> pos_scores,
           std::span<const std::vector<double>> neg_scores_per_positive) {
  if (pos_scores.empty()) throw std::invalid_argument("mrr: no positives");
  if (neg_scores_per_positive.size() != pos_scores.size())
    throw std::invalid_argument("mrr: every positive needs its own negative list");
  const auto n = static_cast<std::ptrdiff_t>(pos_scores.size());
  std::vector<std::size_t> rank(pos_scores.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    std::size_t above = 0;
    for (double s : neg_scores_per_positive[idx])
      if (ranks_above(s, pos_scores[idx])) ++above;
    rank[idx] = above + 1;
  }
  // summed in index order so the result does not depend on the thread count
  double sum = 0.0;
  for (std::size_t r : rank) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(pos_scores.size());
}

EvalReport evaluate(std::span<const double> pos_scores, std::span<const double> neg_scores,
                    std::span<const std::size_t> ks) {
  if (ks.empty()) throw std::invalid_argument("evaluate: no cutoffs given");
  EvalReport r;
  r.num_pos = pos_scores.size();
  r.num_neg = neg_scores.size();
  for (auto k : ks) r.hits[k] = hits_at_k(pos_scores, neg_scores, k);
  r.hit_flags = hit_flags(pos_scores, neg_scores, *std::min_element(ks.begin(), ks.end()));
  return r;
}

void write_report(const std::filesystem::path& path, const EvalReport& report,
                  const std::map<std::string, std::string>& extra) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  for (const auto& [k, v] : report.hits) out << "hits@" << k << '=' << v << '\n';
  if (report.mrr) out << "mrr=" << *report.mrr << '\n';
  out << "num_pos=" << report.num_pos << "\nnum_neg=" << report.num_neg << '\n';
  for (const auto& [key, value] : extra) out << key << '=' << value << '\n';
}

PositiveEdgeSet positive_edge_set(std::span<const double> pos_scores,
                                  std::span<const double> neg_scores, std::size_t k) {
  const auto flags = hit_flags(pos_scores, neg_scores, k);
  PositiveEdgeSet s;
  s.k = k;
  s.universe = pos_scores.size();
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) s.members.push_back(i);
  return s;
}

namespace {

std::size_t intersection_size(const PositiveEdgeSet& a, const PositiveEdgeSet& b) {
  std::size_t count = 0;
  auto ia = a.members.begin();
  auto ib = b.members.begin();
  while (ia != a.members.end() && ib != b.members.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

}  // namespace

Ratio subset_ratio(const PositiveEdgeSet& a, const PositiveEdgeSet& b) {
  if (a.members.empty()) return {0.0, false};
  return {static_cast<double>(intersection_size(a, b)) / static_cast<double>(a.size()), true};
}

Ratio jaccard_overlap(const PositiveEdgeSet& a, const PositiveEdgeSet& b) {
  const auto inter = intersection_size(a, b);
  const auto uni = a.size() + b.size() - inter;
  if (uni == 0) return {1.0, false};
  return {static_cast<double>(inter) / static_cast<double>(uni), true};
}

// ---- KL decomposition -------------------------------------------------------

double bernoulli_kl(double a, double b) {
  return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
}

namespace {

void check_table(const DiscreteJoint& joint, const ScoreTable& t, const char* name) {
  if (t.size() != joint.prob.size())
    throw std::invalid_argument(std::string(name) + ": x-support size mismatch");
  for (std::size_t x = 0; x < t.size(); ++x) {
    if (t[x].size() != joint.prob[x].size())
      throw std::invalid_argument(std::string(name) + ": s-support size mismatch");
    for (double v : t[x])
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument(std::string(name) + ": probabilities must lie in (0,1)");
  }
}

void check_joint(const DiscreteJoint& joint) {
  if (joint.prob.empty()) throw std::invalid_argument("joint: empty support");
  double total = 0.0;
  for (const auto& row : joint.prob) {
    if (row.empty()) throw std::invalid_argument("joint: empty s-support");
    for (double p : row) {
      if (!(p > 0.0)) throw std::invalid_argument("joint: zero-probability cell");
      total += p;
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("joint: probabilities must sum to 1");
}

}  // namespace

std::vector<double> conditional_mean(const DiscreteJoint& joint, const ScoreTable& teacher) {
  check_joint(joint);
  check_table(joint, teacher, "teacher");
  std::vector<double> out(joint.prob.size());
  for (std::size_t x = 0; x < joint.prob.size(); ++x) {
    double mass = 0.0, acc = 0.0;
    for (std::size_t s = 0; s < joint.prob[x].size(); ++s) {
      mass += joint.prob[x][s];
      acc += joint.prob[x][s] * teacher[x][s];
    }
    out[x] = acc / mass;
  }
  return out;
}

KlDecomposition verify_kl_decomposition(const DiscreteJoint& joint, const ScoreTable& f,
                                        const ScoreTable& teacher) {
  check_joint(joint);
  check_table(joint, f, "f");
  const auto mean = conditional_mean(joint, teacher);
  KlDecomposition d;
  for (std::size_t x = 0; x < joint.prob.size(); ++x) {
    for (std::size_t s = 0; s < joint.prob[x].size(); ++s) {
      const double w = joint.prob[x][s];
      const double fy = f[x][s];
      const double t = teacher[x][s];
      d.lhs += w * bernoulli_kl(fy, mean[x]);
      d.teacher_kl += w * bernoulli_kl(fy, t);
      d.correction += w * (fy * (std::log(t) - std::log(mean[x])) +
                           (1.0 - fy) * (std::log(1.0 - t) - std::log(1.0 - mean[x])));
    }
  }
  d.residual = std::abs(d.lhs - (d.teacher_kl + d.correction));
  return d;
}

TeacherComparison compare_teachers(const DiscreteJoint& joint, const ScoreTable& f,
                                   const ScoreTable& heuristic, const ScoreTable& other) {
  TeacherComparison c;
  c.heuristic = verify_kl_decomposition(joint, f, heuristic);
  c.other = verify_kl_decomposition(joint, f, other);
  c.condition_favors_heuristic = c.heuristic.teacher_kl + c.heuristic.correction <=
                                 c.other.teacher_kl + c.other.correction;
  c.heuristic_student_better = c.heuristic.lhs <= c.other.lhs;
  return c;
}

}  // namespace linkdistill
