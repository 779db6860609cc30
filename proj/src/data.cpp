// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "linkdistill/rng.hpp"

namespace linkdistill {

Graph EdgeSplit::train_graph() const { return build_graph(num_nodes, train); }

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

Edge random_pair(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  NodeId a = pick(rng), b = pick(rng);
  while (a == b) b = pick(rng);
  return {std::min(a, b), std::max(a, b)};
}

std::size_t count_for(double frac, std::size_t m) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(m) + 1e-9));
}

}  // namespace

EdgeSplit make_split(const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
  if (!(val_frac > 0 && val_frac < 1 && test_frac > 0 && test_frac < 1) ||
      val_frac + test_frac >= 1)
    throw std::invalid_argument("split fractions must lie in (0,1) and sum to less than 1");
  auto edges = g.edges();
  const std::size_t m = edges.size();
  const std::size_t n_val = count_for(val_frac, m);
  const std::size_t n_test = count_for(test_frac, m);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= m)
    throw DataError("graph with " + std::to_string(m) + " edges is too small for a " +
                    std::to_string(val_frac) + "/" + std::to_string(test_frac) + " split");
  const std::size_t n = g.num_nodes();
  const double non_edges = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) -
                           static_cast<double>(m);
  if (non_edges < static_cast<double>(n_val + n_test))
    throw DataError("not enough non-edges for validation/test negatives");

  Rng rng(derive_seed(seed, "split.edges"));
  std::shuffle(edges.begin(), edges.end(), rng);

  EdgeSplit s;
  s.num_nodes = n;
  s.seed = seed;
  s.val_frac = val_frac;
  s.test_frac = test_frac;
  s.valid_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val),
                    edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), edges.end());
  std::sort(s.train.begin(), s.train.end());

  Rng neg_rng(derive_seed(seed, "split.negatives"));
  std::set<std::uint64_t> used;
  const std::size_t cap = 1000 + 200 * (n_val + n_test);
  std::size_t attempts = 0;
  auto draw = [&](std::size_t count, std::vector<Edge>& out) {
    while (out.size() < count) {
      if (++attempts > cap) throw DataError("negative sampling exceeded its rejection cap");
      const auto e = random_pair(neg_rng, n);
      if (g.has_edge(e.first, e.second)) continue;
      if (!used.insert(pair_key(e.first, e.second)).second) continue;
      out.push_back(e);
    }
  };
  draw(n_val, s.valid_neg);
  draw(n_test, s.test_neg);
  return s;
}

std::vector<Edge> sample_training_negatives(const Graph& g, std::size_t count,
                                            std::uint64_t seed, std::uint64_t epoch) {
  if (count == 0) throw std::invalid_argument("sample_training_negatives: count must be > 0");
  const std::size_t n = g.num_nodes();
  if (n < 2) throw DataError("graph has fewer than two nodes");
  const double non_edges =
      0.5 * static_cast<double>(n) * static_cast<double>(n - 1) - static_cast<double>(g.num_edges());
  if (non_edges < 1.0) throw DataError("graph is complete: no non-edges to sample");
  Rng rng(derive_seed(derive_seed(seed, "train.negatives"), epoch));
  std::vector<Edge> out;
  out.reserve(count);
  const std::size_t cap = 1000 + 200 * count;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > cap) throw DataError("training negative sampling exceeded its rejection cap");
    const auto e = random_pair(rng, n);
    if (!g.has_edge(e.first, e.second)) out.push_back(e);
  }
  return out;
}

// ---- split directory -------------------------------------------------------

void save_split(const std::filesystem::path& dir, const EdgeSplit& s) {
  std::filesystem::create_directories(dir);
  write_edge_list(dir / "train.txt", s.train);
  write_edge_list(dir / "valid_pos.txt", s.valid_pos);
  write_edge_list(dir / "valid_neg.txt", s.valid_neg);
  write_edge_list(dir / "test_pos.txt", s.test_pos);
  write_edge_list(dir / "test_neg.txt", s.test_neg);
  std::ofstream meta(dir / "meta.txt");
  meta.precision(17);
  meta << "seed=" << s.seed << "\nval_frac=" << s.val_frac << "\ntest_frac=" << s.test_frac
       << "\nnum_nodes=" << s.num_nodes << '\n';
  if (!meta) throw DataError("cannot write " + (dir / "meta.txt").string());
}

EdgeSplit load_split(const std::filesystem::path& dir) {
  EdgeSplit s;
  std::ifstream meta(dir / "meta.txt");
  if (!meta) throw DataError("missing " + (dir / "meta.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    if (kv.count("seed")) s.seed = std::stoull(kv["seed"]);
    if (kv.count("val_frac")) s.val_frac = std::stod(kv["val_frac"]);
    if (kv.count("test_frac")) s.test_frac = std::stod(kv["test_frac"]);
    if (kv.count("num_nodes")) s.num_nodes = std::stoull(kv["num_nodes"]);
  } catch (const std::exception&) {
    throw DataError("malformed " + (dir / "meta.txt").string());
  }
  s.train = read_edge_list(dir / "train.txt");
  s.valid_pos = read_edge_list(dir / "valid_pos.txt");
  s.valid_neg = read_edge_list(dir / "valid_neg.txt");
  s.test_pos = read_edge_list(dir / "test_pos.txt");
  s.test_neg = read_edge_list(dir / "test_neg.txt");
  if (s.num_nodes == 0)
    for (const auto* part : {&s.train, &s.valid_pos, &s.valid_neg, &s.test_pos, &s.test_neg})
      for (const auto& [a, b] : *part) s.num_nodes = std::max<std::size_t>(s.num_nodes, std::max(a, b) + 1u);
  return s;
}

// ---- id remapping / LINQS --------------------------------------------------

NodeId IdMap::intern(const std::string& name) {
  const auto [it, inserted] = index_.try_emplace(name, static_cast<NodeId>(names.size()));
  if (inserted) names.push_back(name);
  return it->second;
}

NodeId IdMap::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown node id " + name);
  return it->second;
}

LabeledDataset load_linqs(const std::filesystem::path& content, const std::filesystem::path& cites) {
  std::ifstream in(content);
  if (!in) throw DataError("cannot open " + content.string());
  IdMap ids;
  std::vector<float> values;
  std::vector<std::string> labels;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw DataError(content.string() + ": short content row");
    const std::size_t f = tok.size() - 2;
    if (dim == 0) dim = f;
    if (f != dim) throw DataError(content.string() + ": ragged content row for " + tok[0]);
    if (ids.contains(tok[0])) throw DataError(content.string() + ": duplicate paper " + tok[0]);
    ids.intern(tok[0]);
    for (std::size_t k = 1; k <= f; ++k) values.push_back(std::stof(tok[k]));
    labels.push_back(tok.back());
  }
  const std::size_t n = ids.names.size();

  std::ifstream cin(cites);
  if (!cin) throw DataError("cannot open " + cites.string());
  std::vector<Edge> edges;
  std::size_t skipped = 0;
  while (std::getline(cin, line)) {
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a >> b)) continue;
    if (!ids.contains(a) || !ids.contains(b)) {
      ++skipped;
      continue;
    }
    edges.emplace_back(ids.at(a), ids.at(b));
  }
  if (skipped) std::clog << "load_linqs: skipped " << skipped << " citation(s) to unknown papers\n";

  LabeledDataset ds;
  ds.graph = build_graph(n, edges);
  ds.features = FeatureMatrix(n, dim, std::move(values));
  ds.node_names = ids.names;
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace linkdistill
