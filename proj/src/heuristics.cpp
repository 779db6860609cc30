// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/heuristics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace linkdistill {

// ---- HeuristicKind ---------------------------------------------------------

HeuristicKind HeuristicKind::csp(int tau) {
  if (tau < 2 || tau % 2 != 0)
    throw std::invalid_argument("CSP cap tau must be even and >= 2, got " + std::to_string(tau));
  return {HeuristicTag::CSP, tau};
}

HeuristicKind HeuristicKind::parse(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  const auto colon = s.find(':');
  const std::string head = s.substr(0, colon);
  if (colon != std::string::npos && head != "CSP")
    throw std::invalid_argument("only CSP takes a parameter: " + std::string(text));
  if (head == "CN") return cn();
  if (head == "AA") return aa();
  if (head == "RA") return ra();
  if (head == "CSP") {
    if (colon == std::string::npos) return csp();
    int tau = 0;
    const auto tail = s.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), tau);
    if (ec != std::errc{} || ptr != tail.data() + tail.size())
      throw std::invalid_argument("bad CSP cap in " + std::string(text));
    return csp(tau);
  }
  throw std::invalid_argument("unknown heuristic " + std::string(text));
}

std::string HeuristicKind::name() const {
  switch (tag) {
    case HeuristicTag::CN: return "CN";
    case HeuristicTag::AA: return "AA";
    case HeuristicTag::RA: return "RA";
    case HeuristicTag::CSP: return "CSP";
  }
  return "?";
}

std::string HeuristicKind::spec() const {
  return tag == HeuristicTag::CSP ? "CSP:" + std::to_string(tau) : name();
}

// ---- local heuristics ------------------------------------------------------

namespace {

/// Merge over two sorted neighbor lists, calling f(k) per common neighbor.
template <class F>
void for_each_common(const Graph& g, NodeId i, NodeId j, F&& f) {
  const auto a = g.neighbors(i);
  const auto b = g.neighbors(j);
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      f(*ia);
      ++ia;
      ++ib;
    }
  }
}

}  // namespace

double score_cn(const Graph& g, NodeId i, NodeId j) {
  std::size_t count = 0;
  for_each_common(g, i, j, [&](NodeId) { ++count; });
  return static_cast<double>(count);
}

double score_aa(const Graph& g, NodeId i, NodeId j) {
  double sum = 0.0;
  // Deg(k) >= 2 for any common neighbor of distinct i, j. For i == j a leaf
  // neighbor has degree 1 and log(1) = 0; skip it rather than divide by zero.
  for_each_common(g, i, j, [&](NodeId k) {
    const auto d = g.degree(k);
    if (d > 1) sum += 1.0 / std::log(static_cast<double>(d));
  });
  return sum;
}

double score_ra(const Graph& g, NodeId i, NodeId j) {
  double sum = 0.0;
  for_each_common(g, i, j, [&](NodeId k) { sum += 1.0 / static_cast<double>(g.degree(k)); });
  return sum;
}

// ---- capped shortest path --------------------------------------------------

namespace {

/// Per-thread BFS scratch. Visit marks use a generation stamp so that no
/// O(N) clear is needed between queries.
struct BfsScratch {
  std::vector<std::uint32_t> stamp[2];
  std::vector<int> dist[2];
  std::vector<NodeId> frontier[2];
  std::vector<NodeId> next;
  std::uint32_t generation = 0;

  void begin(std::size_t n) {
    for (int s = 0; s < 2; ++s) {
      if (stamp[s].size() != n) {
        stamp[s].assign(n, 0);
        dist[s].assign(n, 0);
        generation = 0;
      }
    }
    if (++generation == 0) {
      for (auto& st : stamp) std::fill(st.begin(), st.end(), 0);
      generation = 1;
    }
  }
  bool seen(int side, NodeId v) const { return stamp[side][v] == generation; }
  void mark(int side, NodeId v, int d) {
    stamp[side][v] = generation;
    dist[side][v] = d;
  }
};

BfsScratch& scratch() {
  thread_local BfsScratch s;
  return s;
}

}  // namespace

int capped_distance(const Graph& g, NodeId i, NodeId j, int tau) {
  g.check_node(i);
  g.check_node(j);
  if (i == j) return 0;
  if (tau < 1) throw std::invalid_argument("capped_distance: tau must be >= 1");

  auto& ws = scratch();
  ws.begin(g.num_nodes());
  const int cap[2] = {(tau + 1) / 2, tau / 2};
  int level[2] = {0, 0};
  ws.mark(0, i, 0);
  ws.mark(1, j, 0);
  ws.frontier[0].assign(1, i);
  ws.frontier[1].assign(1, j);
  int best = std::numeric_limits<int>::max();

  // After levels l0 and l1 are fully expanded every path of length
  // <= l0 + l1 has a node seen from both sides, so best is exact once
  // best <= l0 + l1.
  while (best > level[0] + level[1] && level[0] + level[1] < tau) {
    if (ws.frontier[0].empty() || ws.frontier[1].empty()) break;
    int side = -1;
    for (int s = 0; s < 2; ++s) {
      if (level[s] >= cap[s]) continue;
      if (side < 0 || ws.frontier[s].size() < ws.frontier[side].size()) side = s;
    }
    if (side < 0) break;
    const int other = 1 - side;
    const int d = level[side] + 1;
    ws.next.clear();
    for (NodeId u : ws.frontier[side]) {
      for (NodeId w : g.neighbors(u)) {
        if (ws.seen(side, w)) continue;
        ws.mark(side, w, d);
        ws.next.push_back(w);
        if (ws.seen(other, w)) best = std::min(best, d + ws.dist[other][w]);
      }
    }
    std::swap(ws.frontier[side], ws.next);
    level[side] = d;
  }
  return best <= tau ? best : tau + 1;
}

double score_csp(const Graph& g, NodeId i, NodeId j, int tau) {
  if (tau < 2) throw std::invalid_argument("score_csp: tau must be >= 2");
  g.check_node(i);
  g.check_node(j);
  if (i == j) throw std::invalid_argument("score_csp: i == j has no shortest-path score");
  const int sp = capped_distance(g, i, j, tau);
  return 1.0 / static_cast<double>(std::min(tau, sp));
}

double score_pair(const Graph& g, NodeId i, NodeId j, const HeuristicKind& kind) {
  switch (kind.tag) {
    case HeuristicTag::CN: return score_cn(g, i, j);
    case HeuristicTag::AA: return score_aa(g, i, j);
    case HeuristicTag::RA: return score_ra(g, i, j);
    case HeuristicTag::CSP: return score_csp(g, i, j, kind.tau);
  }
  return 0.0;
}

// ---- batch kernels ---------------------------------------------------------

namespace {

// Exceptions must not escape an OpenMP region, so every per-pair
// precondition is checked up front.
void validate_pairs(const Graph& g, std::span<const Edge> pairs, const HeuristicKind& kind) {
  if (kind.tag == HeuristicTag::CSP && kind.tau < 2)
    throw std::invalid_argument("CSP requires tau >= 2");
  for (const auto& [i, j] : pairs) {
    g.check_node(i);
    g.check_node(j);
    if (kind.tag == HeuristicTag::CSP && i == j)
      throw std::invalid_argument("CSP pair with i == j (" + std::to_string(i) + ")");
  }
}

}  // namespace

std::vector<ScoredPair> score_batch(const Graph& g, std::span<const Edge> pairs,
                                    const HeuristicKind& kind) {
  validate_pairs(g, pairs, kind);
  std::vector<ScoredPair> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(k)] = {i, j, score_pair(g, i, j, kind)};
  }
  return out;
}

std::vector<ScoredPair> score_batch_serial(const Graph& g, std::span<const Edge> pairs,
                                           const HeuristicKind& kind) {
  validate_pairs(g, pairs, kind);
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) out.push_back({i, j, score_pair(g, i, j, kind)});
  return out;
}

std::vector<double> score_values(const Graph& g, std::span<const Edge> pairs,
                                 const HeuristicKind& kind) {
  const auto scored = score_batch(g, pairs, kind);
  std::vector<double> out(scored.size());
  std::transform(scored.begin(), scored.end(), out.begin(),
                 [](const ScoredPair& s) { return s.score; });
  return out;
}

// ---- normalization ---------------------------------------------------------

std::vector<double> normalize_scores(std::span<const double> scores) {
  double max = 0.0;
  for (double s : scores) max = std::max(max, s);
  std::vector<double> out(scores.size(), 0.0);
  if (max > 0.0)
    for (std::size_t k = 0; k < scores.size(); ++k) out[k] = scores[k] / max;
  return out;
}

std::vector<std::vector<double>> normalize_guidance(
    const std::vector<std::vector<double>>& per_anchor_scores) {
  std::vector<std::vector<double>> out;
  out.reserve(per_anchor_scores.size());
  for (const auto& s : per_anchor_scores) out.push_back(normalize_scores(s));
  return out;
}

}  // namespace linkdistill
