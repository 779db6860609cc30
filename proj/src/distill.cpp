// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "linkdistill/metrics.hpp"

namespace linkdistill {

void DistillConfig::validate() const {
  if (!(alpha >= 0 && beta >= 0)) throw std::invalid_argument("alpha and beta must be >= 0");
  if (!(delta > 0)) throw std::invalid_argument("delta must be > 0");
  if (!(temperature > 0)) throw std::invalid_argument("temperature must be > 0");
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  if (eval_k == 0) throw std::invalid_argument("eval K must be > 0");
  for (auto h : hidden)
    if (h == 0) throw std::invalid_argument("hidden widths must be > 0");
}

// ---- guidance ----------------------------------------------------------------

bool GuidanceSet::empty() const { return num_records() == 0; }

std::size_t GuidanceSet::num_records() const {
  std::size_t n = 0;
  for (const auto& r : rounds) n += r.size();
  return n;
}

void GuidanceSet::validate() const {
  for (const auto& round : rounds)
    for (const auto& rec : round) {
      if (rec.context.size() < 2)
        throw std::invalid_argument("guidance record for anchor " + std::to_string(rec.anchor) +
                                    " has fewer than two context nodes");
      if (rec.scores.size() != rec.context.size())
        throw std::invalid_argument("guidance scores not aligned with context nodes");
      for (double p : rec.scores)
        if (!(p >= 0.0 && p <= 1.0))
          throw std::invalid_argument("guidance score outside [0,1]");
    }
}

std::vector<NodeId> sample_context(const Graph& g, NodeId v, const DistillConfig& cfg, Rng& rng) {
  g.check_node(v);
  const std::size_t n = g.num_nodes();
  if (n < 3) throw DataError("graph has fewer than two candidate context nodes");

  std::vector<NodeId> ctx;
  auto seen = [&](NodeId u) { return u == v || std::find(ctx.begin(), ctx.end(), u) != ctx.end(); };

  if (cfg.walk_length > 0) {
    std::uniform_int_distribution<std::size_t> steps(1, cfg.walk_length);
    for (std::size_t w = 0; w < cfg.num_nearby; ++w) {
      const std::size_t len = steps(rng);
      NodeId cur = v;
      for (std::size_t s = 0; s < len; ++s) {
        const auto nb = g.neighbors(cur);
        if (nb.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
        cur = nb[pick(rng)];
      }
      if (!seen(cur)) ctx.push_back(cur);
    }
  }

  const std::size_t available = n - 1 - ctx.size();
  const std::size_t take = std::min(cfg.num_random, available);
  if (take == 0) return ctx;
  if (2 * take > available) {
    std::vector<NodeId> pool;
    for (NodeId u = 0; u < n; ++u)
      if (!seen(u)) pool.push_back(u);
    std::shuffle(pool.begin(), pool.end(), rng);
    ctx.insert(ctx.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  } else {
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
    std::size_t added = 0;
    while (added < take) {
      const NodeId u = pick(rng);
      if (seen(u)) continue;
      ctx.push_back(u);
      ++added;
    }
  }
  return ctx;
}

std::vector<GuidanceRecord> build_guidance_round(const Graph& g, const HeuristicKind& kind,
                                                 std::span<const NodeId> anchors,
                                                 const DistillConfig& cfg, std::uint64_t seed) {
  if (g.num_nodes() < 3) throw DataError("graph too small to sample context sets");
  if (kind.tag == HeuristicTag::CSP && kind.tau < 2) throw std::invalid_argument("CSP needs tau >= 2");
  for (NodeId a : anchors) g.check_node(a);

  std::vector<GuidanceRecord> out(anchors.size());
  const auto n = static_cast<std::ptrdiff_t>(anchors.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const NodeId v = anchors[static_cast<std::size_t>(t)];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(v)));
    auto& rec = out[static_cast<std::size_t>(t)];
    rec.anchor = v;
    rec.context = sample_context(g, v, cfg, rng);
    std::vector<double> raw(rec.context.size());
    for (std::size_t k = 0; k < rec.context.size(); ++k)
      raw[k] = score_pair(g, v, rec.context[k], kind);
    rec.scores = normalize_scores(raw);
  }
  std::erase_if(out, [](const GuidanceRecord& r) { return r.context.size() < 2; });
  return out;
}

GuidanceSet build_guidance(const Graph& g, const HeuristicKind& kind, const DistillConfig& cfg,
                           std::size_t rounds, std::uint64_t seed) {
  if (rounds == 0) throw std::invalid_argument("guidance needs at least one round");
  std::vector<NodeId> anchors;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (g.degree(v) > 0) anchors.push_back(v);
  GuidanceSet gs;
  gs.heuristic = kind.name();
  gs.tau = kind.tag == HeuristicTag::CSP ? kind.tau : 0;
  for (std::size_t r = 0; r < rounds; ++r)
    gs.rounds.push_back(build_guidance_round(g, kind, anchors, cfg, derive_seed(seed, r)));
  return gs;
}

void write_guidance(const std::filesystem::path& path, const GuidanceSet& gs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "#heuristic=" << gs.heuristic << " tau=" << (gs.tau > 0 ? std::to_string(gs.tau) : "na")
      << '\n';
  out.precision(9);
  for (std::size_t r = 0; r < gs.rounds.size(); ++r) {
    if (gs.rounds.size() > 1) out << "#round " << r << '\n';
    for (const auto& rec : gs.rounds[r])
      for (std::size_t k = 0; k < rec.context.size(); ++k)
        out << rec.anchor << ' ' << rec.context[k] << ' ' << rec.scores[k] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GuidanceSet read_guidance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GuidanceSet gs;
  gs.heuristic = "EXT";
  gs.rounds.emplace_back();
  std::size_t dropped = 0;
  auto close_record = [&] {
    auto& round = gs.rounds.back();
    if (!round.empty() && round.back().context.size() < 2) {
      round.pop_back();
      ++dropped;
    }
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#heuristic=", 0) == 0) {
        std::istringstream ss(line.substr(1));
        for (std::string tok; ss >> tok;) {
          const auto eq = tok.find('=');
          if (eq == std::string::npos) continue;
          const auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
          if (key == "heuristic") gs.heuristic = value;
          if (key == "tau") gs.tau = value == "na" ? 0 : std::stoi(value);
        }
      } else if (line.rfind("#round", 0) == 0) {
        close_record();
        if (!gs.rounds.back().empty()) gs.rounds.emplace_back();
      }
      continue;
    }
    std::istringstream ss(line);
    long long a = -1, c = -1;
    double p = -1;
    if (!(ss >> a >> c >> p) || a < 0 || c < 0)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 'anchor context p'");
    if (!(p >= 0.0 && p <= 1.0))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": teacher score outside [0,1]");
    auto& round = gs.rounds.back();
    if (round.empty() || round.back().anchor != static_cast<NodeId>(a)) {
      close_record();
      round.push_back({static_cast<NodeId>(a), {}, {}});
    }
    round.back().context.push_back(static_cast<NodeId>(c));
    round.back().scores.push_back(p);
  }
  close_record();
  if (gs.rounds.back().empty() && gs.rounds.size() > 1) gs.rounds.pop_back();
  if (dropped) std::clog << "read_guidance: dropped " << dropped << " single-context record(s)\n";
  return gs;
}

// ---- losses ----------------------------------------------------------------

double loss_ranking(std::span<const double> p, std::span<const double> q, double delta,
                    std::span<double> grad_q) {
  if (p.size() != q.size()) throw std::invalid_argument("loss_ranking: p and q differ in length");
  if (p.size() < 2) throw std::invalid_argument("loss_ranking: needs at least two context nodes");
  const bool want_grad = !grad_q.empty();
  if (want_grad && grad_q.size() != q.size())
    throw std::invalid_argument("loss_ranking: gradient buffer size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      const double dp = p[i] - p[j];
      const double r = dp > delta ? 1.0 : (dp < -delta ? -1.0 : 0.0);
      if (r == 0.0) continue;
      const double term = -r * (q[i] - q[j]) + delta;
      if (term <= 0.0) continue;
      loss += term;
      if (want_grad) {
        grad_q[i] -= r;
        grad_q[j] += r;
      }
    }
  }
  return loss;
}

namespace {

std::vector<double> log_softmax(std::span<const double> v, double t) {
  double mx = -INFINITY;
  for (double x : v) mx = std::max(mx, x / t);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x / t - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] / t - lse;
  return out;
}

}  // namespace

double loss_distribution(std::span<const double> p, std::span<const double> q, double t,
                         std::span<double> grad_q) {
  if (p.size() != q.size())
    throw std::invalid_argument("loss_distribution: p and q differ in length");
  if (!(t > 0)) throw std::invalid_argument("loss_distribution: temperature must be > 0");
  if (p.empty()) return 0.0;
  const auto lp = log_softmax(p, t);
  const auto lq = log_softmax(q, t);
  double loss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) loss -= std::exp(lp[k]) * lq[k];
  if (!grad_q.empty()) {
    if (grad_q.size() != q.size())
      throw std::invalid_argument("loss_distribution: gradient buffer size mismatch");
    for (std::size_t k = 0; k < q.size(); ++k) grad_q[k] += (std::exp(lq[k]) - std::exp(lp[k])) / t;
  }
  return loss;
}

// ---- batch objective ---------------------------------------------------------

namespace {

/// Dense row assignment for the nodes touched by one batch.
class NodeBatch {
 public:
  std::uint32_t add(NodeId v) {
    const auto [it, inserted] = rows_.try_emplace(v, static_cast<std::uint32_t>(nodes_.size()));
    if (inserted) nodes_.push_back(v);
    return it->second;
  }
  const std::vector<NodeId>& nodes() const { return nodes_; }

 private:
  std::unordered_map<NodeId, std::uint32_t> rows_;
  std::vector<NodeId> nodes_;
};

}  // namespace

template <class Real>
LossBreakdown distill_batch_loss(const BasicStudent<Real>& model, const FeatureMatrix& x,
                                 const DistillBatch& batch, const LossWeights& w,
                                 BasicStudent<Real>* grad) {
  if (x.dim() != model.encoder.input_dim())
    throw ShapeError("feature dim " + std::to_string(x.dim()) + " does not match encoder input " +
                     std::to_string(model.encoder.input_dim()));
  NodeBatch nb;
  std::vector<PairIndex> pairs;
  for (const auto& [a, b] : batch.positives) pairs.push_back({nb.add(a), nb.add(b)});
  for (const auto& [a, b] : batch.negatives) pairs.push_back({nb.add(a), nb.add(b)});
  const std::size_t n_lab = pairs.size();
  for (const auto& rec : batch.records)
    for (NodeId c : rec.context) pairs.push_back({nb.add(rec.anchor), nb.add(c)});
  for (NodeId v : nb.nodes()) {
    if (v >= x.num_nodes()) throw GraphError("batch node " + std::to_string(v) + " has no features");
  }

  LossBreakdown out;
  if (pairs.empty()) return out;
  const auto rows = gather_rows<Real>(x, nb.nodes());
  StudentPass<Real> pass;
  const auto logits = pass.forward(model, rows, nb.nodes().size(), pairs);
  std::vector<double> q(logits.size());
  for (std::size_t t = 0; t < q.size(); ++t) q[t] = sigmoid(logits[t]);
  std::vector<double> g(pairs.size(), 0.0);

  if (n_lab > 0) {
    const std::size_t n_pos = batch.positives.size();
    double sum = 0.0;
    for (std::size_t t = 0; t < n_lab; ++t) {
      const int y = t < n_pos ? 1 : 0;
      sum += bce_loss(q[t], y);
      g[t] = bce_grad_logit(q[t], y) / static_cast<double>(n_lab);
    }
    out.bce = sum / static_cast<double>(n_lab);
  }

  if (!batch.records.empty()) {
    const double inv = 1.0 / static_cast<double>(batch.records.size());
    std::size_t offset = n_lab;
    std::vector<double> gr, gd;
    for (const auto& rec : batch.records) {
      const std::size_t m = rec.context.size();
      const std::span<const double> qs(q.data() + offset, m);
      gr.assign(m, 0.0);
      gd.assign(m, 0.0);
      out.ranking += loss_ranking(rec.scores, qs, w.delta, gr) * inv;
      out.distribution += loss_distribution(rec.scores, qs, w.temperature, gd) * inv;
      for (std::size_t k = 0; k < m; ++k) {
        const double dq = (w.alpha * gr[k] + w.beta * gd[k]) * inv;
        g[offset + k] += dq * qs[k] * (1.0 - qs[k]);
      }
      offset += m;
    }
  }
  out.total = out.bce + w.alpha * out.ranking + w.beta * out.distribution;
  if (grad) pass.backward(model, g, *grad);
  return out;
}

template LossBreakdown distill_batch_loss<float>(const BasicStudent<float>&, const FeatureMatrix&,
                                                 const DistillBatch&, const LossWeights&,
                                                 BasicStudent<float>*);
template LossBreakdown distill_batch_loss<double>(const BasicStudent<double>&,
                                                  const FeatureMatrix&, const DistillBatch&,
                                                  const LossWeights&, BasicStudent<double>*);

// ---- inference ---------------------------------------------------------------

std::vector<float> encode_all(const StudentModel& m, const FeatureMatrix& x) {
  if (x.dim() != m.encoder.input_dim()) throw ShapeError("feature dim does not match encoder input");
  const std::size_t dim = m.embedding_dim();
  std::vector<float> out(x.num_nodes() * dim);
  constexpr std::size_t kChunk = 4096;
  MlpActivations<float> acts;
  std::vector<NodeId> ids;
  for (std::size_t start = 0; start < x.num_nodes(); start += kChunk) {
    const std::size_t end = std::min(x.num_nodes(), start + kChunk);
    ids.resize(end - start);
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<NodeId>(start + k);
    const auto rows = gather_rows<float>(x, ids);
    mlp_forward_batch(m.encoder, std::span<const float>(rows), ids.size(), acts);
    std::copy(acts.output().begin(), acts.output().end(),
              out.begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  return out;
}

std::vector<double> predict_pairs(const StudentModel& m, const FeatureMatrix& x,
                                  std::span<const Edge> pairs) {
  m.check();
  if (x.dim() != m.encoder.input_dim()) throw ShapeError("feature dim does not match encoder input");
  NodeBatch nb;
  std::vector<PairIndex> idx;
  idx.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a >= x.num_nodes() || b >= x.num_nodes()) throw GraphError("pair references unknown node");
    idx.push_back({nb.add(a), nb.add(b)});
  }
  const std::size_t dim = m.embedding_dim();
  std::vector<float> emb(nb.nodes().size() * dim);
  constexpr std::size_t kChunk = 4096;
  MlpActivations<float> acts;
  for (std::size_t start = 0; start < nb.nodes().size(); start += kChunk) {
    const std::size_t end = std::min(nb.nodes().size(), start + kChunk);
    const std::span<const NodeId> ids(nb.nodes().data() + start, end - start);
    const auto rows = gather_rows<float>(x, ids);
    mlp_forward_batch(m.encoder, std::span<const float>(rows), ids.size(), acts);
    std::copy(acts.output().begin(), acts.output().end(),
              emb.begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  std::vector<double> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(idx.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto& p = idx[static_cast<std::size_t>(t)];
    out[static_cast<std::size_t>(t)] = sigmoid(m.logit_from_embeddings(
        std::span<const float>(emb.data() + p.a * dim, dim),
        std::span<const float>(emb.data() + p.b * dim, dim)));
  }
  return out;
}

// ---- training ----------------------------------------------------------------

namespace {

double validation_hits(const StudentModel& m, const FeatureMatrix& x, const EdgeSplit& split,
                       std::size_t k) {
  if (split.valid_pos.empty() || split.valid_neg.empty()) return 0.0;
  const auto pos = predict_pairs(m, x, split.valid_pos);
  const auto neg = predict_pairs(m, x, split.valid_neg);
  return hits_at_k(pos, neg, std::min(k, neg.size()));
}

}  // namespace

DistillResult train_student(const Graph& train_graph, const FeatureMatrix& x,
                            const GuidanceSet& guidance, const EdgeSplit& split,
                            const DistillConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("train_student: no training edges");
  const bool distilling = cfg.alpha > 0 || cfg.beta > 0;
  if (distilling && guidance.empty())
    throw std::invalid_argument("train_student: empty guidance with nonzero alpha/beta");
  guidance.validate();
  if (x.num_nodes() < train_graph.num_nodes())
    throw ShapeError("feature matrix has fewer rows than the graph has nodes");

  std::vector<std::size_t> dims{x.dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  Rng init_rng(derive_seed(cfg.seed, "student.init"));
  Rng shuffle_rng(derive_seed(cfg.seed, "student.shuffle"));

  DistillResult result;
  StudentModel model = StudentModel::init(dims, init_rng);
  StudentModel grad = StudentModel::zeros_like(model);
  AdamState adam;
  adam.lr = cfg.lr;
  const LossWeights weights{cfg.alpha, cfg.beta, cfg.delta, cfg.temperature};
  result.model = model;

  std::vector<Edge> pos = split.train;
  std::vector<GuidanceRecord> records;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(pos.begin(), pos.end(), shuffle_rng);
    const auto neg = sample_training_negatives(train_graph, pos.size(), cfg.seed, epoch);
    records.clear();
    if (!guidance.rounds.empty()) {
      const auto& round = guidance.rounds[epoch % guidance.rounds.size()];
      records.assign(round.begin(), round.end());
      std::shuffle(records.begin(), records.end(), shuffle_rng);
    }

    const std::size_t nbatches = (pos.size() + cfg.batch_size - 1) / cfg.batch_size;
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t b = 0; b < nbatches; ++b) {
      const std::size_t p0 = b * cfg.batch_size;
      const std::size_t p1 = std::min(pos.size(), p0 + cfg.batch_size);
      const std::size_t r0 = b * records.size() / nbatches;
      const std::size_t r1 = (b + 1) * records.size() / nbatches;
      DistillBatch batch{std::span<const Edge>(pos).subspan(p0, p1 - p0),
                         std::span<const Edge>(neg).subspan(p0, p1 - p0),
                         std::span<const GuidanceRecord>(records).subspan(r0, r1 - r0)};
      grad.set_zero();
      const auto loss = distill_batch_loss(model, x, batch, weights, &grad);
      const auto gblocks = grad.blocks();
      clip_global_norm<float>(gblocks, cfg.grad_clip);
      const auto pblocks = model.blocks();
      const auto cgrad = std::as_const(grad).blocks();
      adam_step<float>(pblocks, cgrad, adam);
      stats.loss.bce += loss.bce / static_cast<double>(nbatches);
      stats.loss.ranking += loss.ranking / static_cast<double>(nbatches);
      stats.loss.distribution += loss.distribution / static_cast<double>(nbatches);
      stats.loss.total += loss.total / static_cast<double>(nbatches);
    }

    stats.valid_hits = validation_hits(model, x, split, cfg.eval_k);
    if (stats.valid_hits > result.best_valid_hits) {
      result.best_valid_hits = stats.valid_hits;
      result.best_epoch = epoch;
      result.model = model;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace linkdistill
