// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <utility>

#include "binary_io.hpp"
#include "linkdistill/distill.hpp"
#include "linkdistill/metrics.hpp"
#include "linkdistill/rng.hpp"

namespace linkdistill {

namespace {

constexpr std::string_view kGateMagic = "EHDMGAT1";
constexpr std::size_t kChunk = 2048;

void write_string(std::ostream& os, const std::string& s) {
  binio::write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto n = binio::read_u64(is);
  if (n > (1u << 16)) throw std::runtime_error("gate checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  binio::expect_good(is, "string");
  return s;
}

}  // namespace

void EnsembleConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(lr > 0)) throw std::invalid_argument("gate learning rate must be > 0");
  if (batch_size == 0 || hidden == 0 || eval_k == 0)
    throw std::invalid_argument("gate batch size, hidden width and K must be > 0");
}

template <class Real>
void gate_features(std::span<const float> xi, std::span<const float> xj, std::span<Real> out) {
  if (xi.size() != xj.size())
    throw ShapeError("gate_features: dims " + std::to_string(xi.size()) + " and " +
                     std::to_string(xj.size()) + " differ");
  if (out.size() != 2 * xi.size()) throw ShapeError("gate_features: output must hold 2F values");
  const std::size_t f = xi.size();
  for (std::size_t k = 0; k < f; ++k) {
    out[k] = static_cast<Real>(xi[k] * xj[k]);
    out[f + k] = static_cast<Real>(xi[k] + xj[k]);
  }
}

template void gate_features<float>(std::span<const float>, std::span<const float>, std::span<float>);
template void gate_features<double>(std::span<const float>, std::span<const float>,
                                    std::span<double>);

std::vector<float> gate_features(std::span<const float> xi, std::span<const float> xj) {
  std::vector<float> out(2 * xi.size());
  gate_features<float>(xi, xj, out);
  return out;
}

double fuse(std::span<const double> weights, std::span<const double> q, double eps) {
  if (weights.size() != q.size()) throw ShapeError("fuse: weight/student arity mismatch");
  double s = 0.0;
  for (std::size_t h = 0; h < q.size(); ++h) s += weights[h] * q[h];
  return std::clamp(s, eps, 1.0 - eps);
}

StudentTable::StudentTable(const StudentModel& m, const FeatureMatrix& x)
    : model(&m), embeddings(encode_all(m, x)) {}

double StudentTable::probability(NodeId i, NodeId j) const {
  const std::size_t d = model->embedding_dim();
  return sigmoid(model->logit_from_embeddings(std::span<const float>(embeddings.data() + i * d, d),
                                              std::span<const float>(embeddings.data() + j * d, d)));
}

std::vector<double> student_probabilities(std::span<const StudentTable> students,
                                          std::span<const Edge> pairs) {
  const std::size_t h_count = students.size();
  for (const auto& t : students) {
    const std::size_t n = t.embeddings.size() / t.model->embedding_dim();
    for (const auto& [a, b] : pairs)
      if (a >= n || b >= n) throw GraphError("pair references unknown node");
  }
  std::vector<double> q(pairs.size() * h_count);
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto& [a, b] = pairs[static_cast<std::size_t>(r)];
    for (std::size_t h = 0; h < h_count; ++h)
      q[static_cast<std::size_t>(r) * h_count + h] = students[h].probability(a, b);
  }
  return q;
}

std::vector<float> gate_weights(const GateModel& gate, const FeatureMatrix& x,
                                std::span<const Edge> pairs) {
  if (gate.feature_dim() != x.dim()) throw ShapeError("gate input does not match feature dim");
  const std::size_t h_count = gate.num_students();
  const std::size_t width = 2 * x.dim();
  std::vector<float> out(pairs.size() * h_count);
  std::vector<float> feats;
  MlpActivations<float> acts;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const std::size_t rows = std::min(kChunk, pairs.size() - start);
    feats.assign(rows * width, 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& [a, b] = pairs[start + r];
      if (a >= x.num_nodes() || b >= x.num_nodes()) throw GraphError("pair references unknown node");
      gate_features<float>(x.row(a), x.row(b), std::span<float>(feats.data() + r * width, width));
    }
    mlp_forward_batch(gate.mlp, std::span<const float>(feats), rows, acts);
    std::copy(acts.output().begin(), acts.output().end(),
              out.begin() + static_cast<std::ptrdiff_t>(start * h_count));
  }
  return out;
}

double ensemble_predict(const GateModel& gate, std::span<const StudentModel> students,
                        const FeatureMatrix& x, NodeId i, NodeId j) {
  if (students.size() != gate.num_students())
    throw ShapeError("gate has " + std::to_string(gate.num_students()) + " outputs but " +
                     std::to_string(students.size()) + " students were given");
  if (gate.feature_dim() != x.dim()) throw ShapeError("gate input does not match feature dim");
  if (i >= x.num_nodes() || j >= x.num_nodes()) throw GraphError("pair references unknown node");
  std::vector<double> q(students.size());
  for (std::size_t h = 0; h < students.size(); ++h) q[h] = students[h].predict(x.row(i), x.row(j));
  const auto feats = gate_features(x.row(i), x.row(j));
  const auto w32 = mlp_forward(gate.mlp, std::span<const float>(feats));
  const std::vector<double> w(w32.begin(), w32.end());
  return fuse(w, q, gate.epsilon);
}

std::vector<double> ensemble_predict_pairs(const GateModel& gate,
                                           std::span<const StudentTable> students,
                                           const FeatureMatrix& x, std::span<const Edge> pairs) {
  const std::size_t h_count = gate.num_students();
  if (students.size() != h_count)
    throw ShapeError("gate has " + std::to_string(h_count) + " outputs but " +
                     std::to_string(students.size()) + " students were given");
  const auto q = student_probabilities(students, pairs);
  const auto w = gate_weights(gate, x, pairs);
  std::vector<double> out(pairs.size());
  std::vector<double> wr(h_count);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    for (std::size_t h = 0; h < h_count; ++h) wr[h] = w[r * h_count + h];
    out[r] = fuse(wr, std::span<const double>(q.data() + r * h_count, h_count), gate.epsilon);
  }
  return out;
}

template <class Real>
GateLoss gate_batch_loss(const BasicMlp<Real>& mlp, std::span<const Real> features,
                         std::size_t rows, std::span<const double> q, std::span<const int> labels,
                         double lambda, double eps, BasicMlp<Real>* grad) {
  const std::size_t h_count = mlp.output_dim();
  if (features.size() != rows * mlp.input_dim()) throw ShapeError("gate batch: feature shape");
  if (q.size() != rows * h_count) throw ShapeError("gate batch: student probability shape");
  if (labels.size() != rows) throw ShapeError("gate batch: label count");
  GateLoss out;
  if (rows == 0) return out;

  MlpActivations<Real> acts;
  mlp_forward_batch(mlp, features, rows, acts);
  const auto w = acts.output();
  std::vector<Real> gout(rows * h_count);
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* qr = q.data() + r * h_count;
    const Real* wr = w.data() + r * h_count;
    double s = 0.0;
    for (std::size_t h = 0; h < h_count; ++h) s += static_cast<double>(wr[h]) * qr[h];
    const double f = std::clamp(s, eps, 1.0 - eps);
    const int y = labels[r];
    out.bce -= y ? std::log(f) : std::log(1.0 - f);
    const double ds = (s > eps && s < 1.0 - eps) ? (f - y) / (f * (1.0 - f)) : 0.0;
    for (std::size_t h = 0; h < h_count; ++h) {
      const double wv = static_cast<double>(wr[h]);
      out.l1 += std::abs(wv);
      const double sgn = wv > 0 ? 1.0 : (wv < 0 ? -1.0 : 0.0);
      gout[r * h_count + h] = static_cast<Real>((ds * qr[h] + lambda * sgn) * inv);
    }
  }
  out.bce *= inv;
  out.l1 *= inv;
  out.total = out.bce + lambda * out.l1;
  if (grad) mlp_backward_batch(mlp, acts, std::span<const Real>(gout), *grad);
  return out;
}

template GateLoss gate_batch_loss<float>(const BasicMlp<float>&, std::span<const float>,
                                         std::size_t, std::span<const double>,
                                         std::span<const int>, double, double, BasicMlp<float>*);
template GateLoss gate_batch_loss<double>(const BasicMlp<double>&, std::span<const double>,
                                          std::size_t, std::span<const double>,
                                          std::span<const int>, double, double,
                                          BasicMlp<double>*);

GateResult train_gate(const Graph& train_graph, const FeatureMatrix& x,
                      std::span<const StudentModel> students, std::vector<StudentRef> refs,
                      const EdgeSplit& split, const EnsembleConfig& cfg,
                      const GateCallback& on_epoch) {
  cfg.validate();
  const std::size_t h_count = students.size();
  if (h_count < std::max<std::size_t>(1, cfg.min_students))
    throw std::invalid_argument("train_gate: needs at least " +
                                std::to_string(std::max<std::size_t>(1, cfg.min_students)) +
                                " students, got " + std::to_string(h_count));
  if (refs.empty()) refs.resize(h_count);
  if (refs.size() != h_count) throw ShapeError("train_gate: student reference count mismatch");
  if (split.train.empty()) throw std::invalid_argument("train_gate: no training edges");
  for (const auto& s : students)
    if (s.encoder.input_dim() != x.dim()) throw ShapeError("student input does not match features");

  std::vector<StudentTable> tables;
  tables.reserve(h_count);
  for (const auto& s : students) tables.emplace_back(s, x);

  const std::size_t width = 2 * x.dim();
  Rng init_rng(derive_seed(cfg.seed, "gate.init"));
  Rng shuffle_rng(derive_seed(cfg.seed, "gate.shuffle"));
  GateModel gate;
  gate.mlp = Mlp::kaiming({width, cfg.hidden, h_count}, init_rng);
  // Start exactly at the plain average of the students: zero output weights,
  // bias 1/H. The fused score then begins inside (eps, 1 - eps).
  std::fill(gate.mlp.weight(1).begin(), gate.mlp.weight(1).end(), 0.0f);
  std::fill(gate.mlp.bias(1).begin(), gate.mlp.bias(1).end(), 1.0f / static_cast<float>(h_count));
  gate.students = std::move(refs);

  Mlp grad(gate.mlp.dims());
  AdamState adam;
  adam.lr = cfg.lr;

  GateResult result;
  result.gate = gate;

  auto validation_hits = [&]() {
    if (split.valid_pos.empty() || split.valid_neg.empty()) return 0.0;
    const auto pos = ensemble_predict_pairs(gate, tables, x, split.valid_pos);
    const auto neg = ensemble_predict_pairs(gate, tables, x, split.valid_neg);
    return hits_at_k(pos, neg, std::min(cfg.eval_k, neg.size()));
  };

  std::vector<Edge> pos = split.train;
  std::vector<Edge> pairs;
  std::vector<int> labels;
  std::vector<float> feats;
  const std::uint64_t neg_seed = derive_seed(cfg.seed, "gate.negatives");
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(pos.begin(), pos.end(), shuffle_rng);
    const auto neg = sample_training_negatives(train_graph, pos.size(), neg_seed, epoch);
    const std::size_t nbatches = (pos.size() + cfg.batch_size - 1) / cfg.batch_size;
    GateEpochStats stats;
    stats.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < nbatches; ++b) {
      const std::size_t p0 = b * cfg.batch_size;
      const std::size_t p1 = std::min(pos.size(), p0 + cfg.batch_size);
      pairs.assign(pos.begin() + static_cast<std::ptrdiff_t>(p0),
                   pos.begin() + static_cast<std::ptrdiff_t>(p1));
      labels.assign(p1 - p0, 1);
      pairs.insert(pairs.end(), neg.begin() + static_cast<std::ptrdiff_t>(p0),
                   neg.begin() + static_cast<std::ptrdiff_t>(p1));
      labels.resize(pairs.size(), 0);
      const std::size_t rows = pairs.size();
      feats.assign(rows * width, 0.0f);
      for (std::size_t r = 0; r < rows; ++r)
        gate_features<float>(x.row(pairs[r].first), x.row(pairs[r].second),
                             std::span<float>(feats.data() + r * width, width));
      const auto q = student_probabilities(tables, pairs);
      grad.set_zero();
      const auto loss = gate_batch_loss<float>(gate.mlp, feats, rows, q, labels, cfg.lambda,
                                               gate.epsilon, &grad);
      const auto gblocks = grad.blocks();
      clip_global_norm<float>(gblocks, cfg.grad_clip);
      const auto pblocks = gate.mlp.blocks();
      const auto cgrad = std::as_const(grad).blocks();
      adam_step<float>(pblocks, cgrad, adam);
      const double wgt = static_cast<double>(rows);
      stats.loss.bce += loss.bce * wgt;
      stats.loss.l1 += loss.l1 * wgt;
      stats.loss.total += loss.total * wgt;
      seen += rows;
    }
    stats.loss.bce /= static_cast<double>(seen);
    stats.loss.l1 /= static_cast<double>(seen);
    stats.loss.total /= static_cast<double>(seen);
    stats.mean_abs_weight = stats.loss.l1;
    stats.valid_hits = validation_hits();
    if (stats.valid_hits > result.best_valid_hits) {
      result.best_valid_hits = stats.valid_hits;
      result.best_epoch = epoch;
      result.gate = gate;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void save_gate(const std::filesystem::path& path, const GateModel& gate) {
  if (gate.students.size() != gate.num_students())
    throw ShapeError("gate: student list does not match output width");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  binio::write_magic(out, kGateMagic);
  binio::write_u64(out, std::bit_cast<std::uint64_t>(gate.epsilon));
  binio::write_u64(out, gate.students.size());
  for (const auto& s : gate.students) {
    binio::write_u64(out, s.digest);
    write_string(out, s.heuristic);
    write_string(out, s.path);
  }
  write_mlp(out, gate.mlp);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GateModel load_gate(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(in, kGateMagic);
  GateModel gate;
  gate.epsilon = std::bit_cast<double>(binio::read_u64(in));
  const auto n = binio::read_u64(in);
  if (n == 0 || n > 1024) throw std::runtime_error("gate checkpoint: implausible student count");
  gate.students.resize(n);
  for (auto& s : gate.students) {
    s.digest = binio::read_u64(in);
    s.heuristic = read_string(in);
    s.path = read_string(in);
  }
  gate.mlp = read_mlp(in);
  if (gate.mlp.output_dim() != n)
    throw std::runtime_error("gate checkpoint: output width does not match student count");
  return gate;
}

std::vector<StudentModel> load_gate_students(const GateModel& gate) {
  std::vector<StudentModel> out;
  for (const auto& s : gate.students) {
    if (file_digest(s.path) != s.digest)
      throw std::runtime_error("student checkpoint " + s.path +
                               " does not match the digest recorded in the gate");
    out.push_back(load_student(s.path));
  }
  return out;
}

}  // namespace linkdistill
