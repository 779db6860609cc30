// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "linkdistill/heuristics.hpp"
#include "linkdistill/parallel.hpp"

using namespace linkdistill;
using doctest::Approx;

namespace {

Graph four_node() { return build_graph(4, std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}, {1, 3}}); }

}  // namespace

TEST_CASE("HeuristicKind parsing and validation") {
  CHECK(HeuristicKind::parse("cn") == HeuristicKind::cn());
  CHECK(HeuristicKind::parse("AA") == HeuristicKind::aa());
  CHECK(HeuristicKind::parse("Ra") == HeuristicKind::ra());
  CHECK(HeuristicKind::parse("CSP").tau == 6);
  CHECK(HeuristicKind::parse("csp:4").tau == 4);
  CHECK(HeuristicKind::parse(HeuristicKind::csp(8).spec()) == HeuristicKind::csp(8));
  CHECK_THROWS(HeuristicKind::csp(3));
  CHECK_THROWS(HeuristicKind::csp(0));
  CHECK_THROWS(HeuristicKind::parse("katz"));
  CHECK_THROWS(HeuristicKind::parse("CSP:x"));
}

TEST_CASE("CN examples") {
  const auto g = four_node();
  CHECK(score_cn(g, 2, 3) == 1);
  const auto tri = build_graph(3, std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(score_cn(tri, 0, 1) == 1);
  const auto two = build_graph(4, std::vector<Edge>{{0, 1}, {2, 3}});
  CHECK(score_cn(two, 0, 2) == 0);
  CHECK_THROWS_AS(score_cn(g, 0, 7), GraphError);
}

TEST_CASE("AA examples") {
  const auto g = four_node();
  CHECK(score_aa(g, 2, 3) == Approx(1.0 / std::log(3.0)).epsilon(1e-12));
  CHECK(score_aa(g, 2, 3) == Approx(0.91024).epsilon(1e-5));
  // 4-cycle: nodes 0 and 2 share neighbors 1 and 3, both of degree 2
  const auto cyc = build_graph(4, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  CHECK(score_aa(cyc, 0, 2) == Approx(2.0 / std::log(2.0)).epsilon(1e-12));
  CHECK(score_aa(cyc, 0, 2) == Approx(2.8854).epsilon(1e-4));
  const auto two = build_graph(4, std::vector<Edge>{{0, 1}, {2, 3}});
  CHECK(score_aa(two, 0, 2) == 0);
}

TEST_CASE("RA examples") {
  const auto g = four_node();
  CHECK(score_ra(g, 2, 3) == Approx(1.0 / 3.0).epsilon(1e-12));
  // common neighbors 1 (degree 2) and 2 (degree 4)
  const auto h = build_graph(6, std::vector<Edge>{{0, 1}, {3, 1}, {0, 2}, {3, 2}, {2, 4}, {2, 5}});
  CHECK(score_ra(h, 0, 3) == Approx(0.75).epsilon(1e-12));
  CHECK(score_ra(build_graph(3, std::vector<Edge>{{0, 1}}), 0, 2) == 0);
}

TEST_CASE("CSP examples") {
  const auto path = fixtures::path_graph(3);
  CHECK(score_csp(path, 0, 2, 6) == 0.5);
  CHECK(score_csp(path, 0, 1, 2) == 1.0);
  CHECK(score_csp(path, 0, 1, 6) == 1.0);
  const auto two = build_graph(4, std::vector<Edge>{{0, 1}, {2, 3}});
  CHECK(score_csp(two, 0, 3, 6) == Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS(score_csp(path, 1, 1, 6));
  CHECK_THROWS(score_csp(path, 0, 1, 1));
  // long path: distance beyond the cap scores exactly 1/tau
  const auto long_path = fixtures::path_graph(20);
  CHECK(score_csp(long_path, 0, 19, 6) == Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(score_csp(long_path, 0, 6, 6) == Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(score_csp(long_path, 0, 5, 6) == Approx(1.0 / 5.0).epsilon(1e-15));
  CHECK(capped_distance(long_path, 0, 5, 6) == 5);
  CHECK(capped_distance(long_path, 0, 6, 6) == 6);
  CHECK(capped_distance(long_path, 0, 7, 6) == 7);
  CHECK(capped_distance(long_path, 3, 3, 6) == 0);
}

TEST_CASE("score_batch examples") {
  const auto g = four_node();
  const std::vector<Edge> pairs{{2, 3}, {1, 3}, {0, 1}};
  const auto cn = score_values(g, pairs, HeuristicKind::cn());
  CHECK(cn == std::vector<double>{1, 0, 1});
  // oracle: brute force for the same pairs
  oracle::Naive naive(4, {{0, 1}, {0, 2}, {1, 2}, {1, 3}});
  for (std::size_t k = 0; k < pairs.size(); ++k)
    CHECK(cn[k] == naive.cn(pairs[k].first, pairs[k].second));
  const std::vector<Edge> other{{2, 3}, {2, 3}, {0, 3}};
  const auto mixed = score_batch(build_graph(4, std::vector<Edge>{{0, 1}, {1, 2}}), other,
                                 HeuristicKind::cn());
  CHECK(mixed.size() == 3);
  CHECK(mixed[2].i == 0);
  CHECK(mixed[2].j == 3);
  CHECK(score_batch(g, {}, HeuristicKind::cn()).empty());
  for (double s : score_values(g, pairs, HeuristicKind::csp(2))) CHECK((s == 1.0 || s == 0.5));
  CHECK_THROWS(score_batch(g, std::vector<Edge>{{0, 9}}, HeuristicKind::cn()));
  CHECK_THROWS(score_batch(g, std::vector<Edge>{{1, 1}}, HeuristicKind::csp(6)));
}

TEST_CASE("normalization") {
  CHECK(normalize_scores(std::vector<double>{2, 1, 0}) == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(normalize_scores(std::vector<double>{0, 0}) == std::vector<double>{0, 0});
  CHECK(normalize_scores(std::vector<double>{5}) == std::vector<double>{1.0});
  const auto many = normalize_guidance({{4, 2}, {0, 0, 0}, {3}});
  CHECK(many[0] == std::vector<double>{1.0, 0.5});
  CHECK(many[1] == std::vector<double>{0, 0, 0});
  CHECK(many[2] == std::vector<double>{1.0});
}

TEST_CASE("all heuristics match naive references on random graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 30 + 14 * static_cast<std::size_t>(trial);
    const auto edges = fixtures::erdos_renyi(n, trial % 2 ? 0.1 : 0.02, rng);
    const auto g = build_graph(n, edges);
    const oracle::Naive naive(n, edges);
    for (NodeId i = 0; i < n; ++i) {
      const auto dist = naive.bfs(i);
      for (NodeId j = 0; j < n; ++j) {
        REQUIRE(score_cn(g, i, j) == naive.cn(i, j));
        if (i == j) continue;
        REQUIRE(score_aa(g, i, j) == naive.aa(i, j));
        REQUIRE(score_ra(g, i, j) == naive.ra(i, j));
        for (int tau : {2, 4, 6}) {
          REQUIRE(score_csp(g, i, j, tau) == oracle::naive_csp(dist[j], tau));
          const int d = capped_distance(g, i, j, tau);
          if (dist[j] >= 0 && dist[j] <= tau) REQUIRE(d == dist[j]);
          else REQUIRE(d == tau + 1);
        }
      }
    }
  }
}

TEST_CASE("symmetry, CSP range and CN monotonicity") {
  std::mt19937_64 rng(5);
  const std::size_t n = 90;
  auto edges = fixtures::erdos_renyi(n, 0.05, rng);
  const auto g = build_graph(n, edges);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) {
      for (auto kind : {HeuristicKind::cn(), HeuristicKind::aa(), HeuristicKind::ra(),
                        HeuristicKind::csp(6)}) {
        CHECK(score_pair(g, i, j, kind) == score_pair(g, j, i, kind));
      }
      const double c = score_csp(g, i, j, 6);
      CHECK(c >= 1.0 / 6.0);
      CHECK(c <= 1.0);
    }
  // adding (k, i) with k in N(j) raises CN(i, j) by exactly one
  std::uniform_int_distribution<NodeId> pick(0, n - 1);
  int checked = 0;
  while (checked < 50) {
    const NodeId i = pick(rng), j = pick(rng);
    if (i == j || g.degree(j) == 0) continue;
    NodeId k = n;
    for (NodeId cand : g.neighbors(j))
      if (cand != i && !g.has_edge(cand, i)) {
        k = cand;
        break;
      }
    if (k == n) continue;
    auto more = edges;
    more.emplace_back(k, i);
    const auto g2 = build_graph(n, more);
    CHECK(score_cn(g2, i, j) == score_cn(g, i, j) + 1);
    ++checked;
  }
}

TEST_CASE("parallel batch scoring equals the serial reference") {
  std::mt19937_64 rng(77);
  const std::size_t n = 400;
  const auto g = build_graph(n, fixtures::erdos_renyi(n, 0.02, rng));
  std::vector<Edge> pairs;
  std::uniform_int_distribution<NodeId> pick(0, n - 1);
  while (pairs.size() < 5000) {
    const NodeId a = pick(rng), b = pick(rng);
    if (a != b) pairs.emplace_back(a, b);
  }
  const int original = par::max_threads();
  for (auto kind : {HeuristicKind::cn(), HeuristicKind::aa(), HeuristicKind::ra(),
                    HeuristicKind::csp(6)}) {
    const auto serial = score_batch_serial(g, pairs, kind);
    for (int threads : {1, 2, 4}) {
      par::set_num_threads(threads);
      const auto parallel = score_batch(g, pairs, kind);
      REQUIRE(parallel.size() == serial.size());
      for (std::size_t k = 0; k < serial.size(); ++k) {
        REQUIRE(parallel[k].i == serial[k].i);
        REQUIRE(parallel[k].score == serial[k].score);
      }
    }
  }
  par::set_num_threads(original);
}
