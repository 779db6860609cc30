// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "binary_io.hpp"

namespace linkdistill {

namespace {

std::string shape_str(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace

// ---- BasicMlp --------------------------------------------------------------

template <class Real>
BasicMlp<Real>::BasicMlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ShapeError("an MLP needs at least input and output dims");
  for (auto d : dims_)
    if (d == 0) throw ShapeError("MLP layer dims must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.emplace_back(dims_[l] * dims_[l + 1], Real{0});
    biases_.emplace_back(dims_[l + 1], Real{0});
  }
}

template <class Real>
BasicMlp<Real> BasicMlp<Real>::kaiming(std::vector<std::size_t> dims, std::mt19937_64& rng) {
  BasicMlp net(std::move(dims));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(net.dims_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : net.weights_[l]) w = static_cast<Real>(u(rng));
  }
  return net;
}

template <class Real>
std::vector<std::span<Real>> BasicMlp<Real>::blocks() {
  std::vector<std::span<Real>> out;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    out.emplace_back(weights_[l]);
    out.emplace_back(biases_[l]);
  }
  return out;
}

template <class Real>
std::vector<std::span<const Real>> BasicMlp<Real>::blocks() const {
  std::vector<std::span<const Real>> out;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    out.emplace_back(weights_[l]);
    out.emplace_back(biases_[l]);
  }
  return out;
}

template <class Real>
void BasicMlp<Real>::set_zero() {
  for (auto& w : weights_) std::fill(w.begin(), w.end(), Real{0});
  for (auto& b : biases_) std::fill(b.begin(), b.end(), Real{0});
}

template <class Real>
template <class Other>
BasicMlp<Other> BasicMlp<Real>::cast() const {
  BasicMlp<Other> out(dims_);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    std::transform(weights_[l].begin(), weights_[l].end(), out.weights_[l].begin(),
                   [](Real v) { return static_cast<Other>(v); });
    std::transform(biases_[l].begin(), biases_[l].end(), out.biases_[l].begin(),
                   [](Real v) { return static_cast<Other>(v); });
  }
  return out;
}

// ---- batch kernels ---------------------------------------------------------

template <class Real>
void mlp_forward_batch(const BasicMlp<Real>& net, std::span<const Real> input, std::size_t rows,
                       MlpActivations<Real>& acts) {
  const auto& dims = net.dims();
  if (input.size() != rows * dims.front())
    throw ShapeError("mlp input size " + shape_str(input.size(), rows * dims.front()));
  acts.rows = rows;
  acts.layers.resize(dims.size());
  acts.layers[0].assign(input.begin(), input.end());
  const auto last = net.num_layers() - 1;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const Real* a = acts.layers[l].data();
    const Real* w = net.weight(l).data();
    const Real* b = net.bias(l).data();
    auto& next = acts.layers[l + 1];
    next.resize(rows * out);
    Real* z = next.data();
    const bool relu = l != last;
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      Real* zr = z + r * out;
      const Real* ar = a + r * in;
      std::copy(b, b + out, zr);
      for (std::size_t k = 0; k < in; ++k) {
        const Real ak = ar[k];
        if (ak == Real{0}) continue;
        const Real* wk = w + k * out;
        for (std::size_t o = 0; o < out; ++o) zr[o] += ak * wk[o];
      }
      if (relu)
        for (std::size_t o = 0; o < out; ++o) zr[o] = std::max(zr[o], Real{0});
    }
  }
}

template <class Real>
std::vector<Real> mlp_backward_batch(const BasicMlp<Real>& net, const MlpActivations<Real>& acts,
                                     std::span<const Real> grad_output, BasicMlp<Real>& grad,
                                     bool want_input_grad) {
  const auto& dims = net.dims();
  const std::size_t rows = acts.rows;
  if (grad_output.size() != rows * dims.back())
    throw ShapeError("mlp grad_output size " + shape_str(grad_output.size(), rows * dims.back()));
  if (grad.dims() != dims) throw ShapeError("gradient buffer shape does not match network");

  std::vector<Real> delta(grad_output.begin(), grad_output.end());
  std::vector<Real> prev;
  const auto last = net.num_layers() - 1;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    if (l != last) {
      const auto& post = acts.layers[l + 1];
      for (std::size_t t = 0; t < delta.size(); ++t)
        if (!(post[t] > Real{0})) delta[t] = Real{0};
    }
    const Real* a = acts.layers[l].data();
    const Real* d = delta.data();
    Real* gw = grad.weight(l).data();
    const auto nin = static_cast<std::ptrdiff_t>(in);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < nin; ++k) {
      Real* gwk = gw + k * out;
      for (std::size_t r = 0; r < rows; ++r) {
        const Real ark = a[r * in + k];
        if (ark == Real{0}) continue;
        const Real* dr = d + r * out;
        for (std::size_t o = 0; o < out; ++o) gwk[o] += ark * dr[o];
      }
    }
    auto& gb = grad.bias(l);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) gb[o] += d[r * out + o];

    if (l == 0 && !want_input_grad) break;
    prev.assign(rows * in, Real{0});
    const Real* w = net.weight(l).data();
    const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < nrows; ++r) {
      const Real* dr = d + r * out;
      Real* pr = prev.data() + r * in;
      for (std::size_t k = 0; k < in; ++k) {
        const Real* wk = w + k * out;
        Real s{0};
        for (std::size_t o = 0; o < out; ++o) s += wk[o] * dr[o];
        pr[k] = s;
      }
    }
    delta.swap(prev);
  }
  if (!want_input_grad) return {};
  return delta;
}

template <class Real>
std::vector<Real> mlp_forward(const BasicMlp<Real>& net, std::span<const Real> x) {
  MlpActivations<Real> acts;
  mlp_forward_batch(net, x, 1, acts);
  return acts.layers.back();
}

namespace reference {

template <class Real>
std::vector<Real> mlp_forward_batch(const BasicMlp<Real>& net, std::span<const Real> input,
                                    std::size_t rows) {
  std::vector<Real> a(input.begin(), input.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.dims()[l], out = net.dims()[l + 1];
    std::vector<Real> z(rows * out);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) {
        Real s = net.bias(l)[o];
        for (std::size_t k = 0; k < in; ++k) s += a[r * in + k] * net.weight(l)[k * out + o];
        z[r * out + o] = (l + 1 < net.num_layers()) ? std::max(s, Real{0}) : s;
      }
    a.swap(z);
  }
  return a;
}

template <class Real>
void mlp_backward_batch(const BasicMlp<Real>& net, std::span<const Real> input, std::size_t rows,
                        std::span<const Real> grad_output, BasicMlp<Real>& grad) {
  // Recompute every layer's activations naively.
  std::vector<std::vector<Real>> acts{std::vector<Real>(input.begin(), input.end())};
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    BasicMlp<Real> one({net.dims()[l], net.dims()[l + 1]});
    one.weight(0) = net.weight(l);
    one.bias(0) = net.bias(l);
    auto z = reference::mlp_forward_batch<Real>(one, acts.back(), rows);
    if (l + 1 < net.num_layers())
      for (auto& v : z) v = std::max(v, Real{0});
    acts.push_back(std::move(z));
  }
  std::vector<Real> delta(grad_output.begin(), grad_output.end());
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const std::size_t in = net.dims()[l], out = net.dims()[l + 1];
    if (l + 1 < net.num_layers())
      for (std::size_t t = 0; t < delta.size(); ++t)
        if (acts[l + 1][t] <= Real{0}) delta[t] = Real{0};
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out; ++o) {
        grad.bias(l)[o] += delta[r * out + o];
        for (std::size_t k = 0; k < in; ++k)
          grad.weight(l)[k * out + o] += acts[l][r * in + k] * delta[r * out + o];
      }
    std::vector<Real> prev(rows * in, Real{0});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < in; ++k)
        for (std::size_t o = 0; o < out; ++o)
          prev[r * in + k] += net.weight(l)[k * out + o] * delta[r * out + o];
    delta.swap(prev);
  }
}

}  // namespace reference

// ---- BasicStudent ----------------------------------------------------------

template <class Real>
BasicStudent<Real> BasicStudent<Real>::init(std::vector<std::size_t> encoder_dims,
                                            std::mt19937_64& rng) {
  BasicStudent m;
  m.encoder = BasicMlp<Real>::kaiming(std::move(encoder_dims), rng);
  const auto d = m.encoder.output_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> u(-bound, bound);
  m.decoder_weight.resize(d);
  for (auto& w : m.decoder_weight) w = static_cast<Real>(u(rng));
  m.decoder_bias = Real{0};
  return m;
}

template <class Real>
BasicStudent<Real> BasicStudent<Real>::zeros_like(const BasicStudent& m) {
  BasicStudent z;
  z.encoder = BasicMlp<Real>(m.encoder.dims());
  z.decoder_weight.assign(m.decoder_weight.size(), Real{0});
  z.decoder_bias = Real{0};
  return z;
}

template <class Real>
std::vector<std::span<Real>> BasicStudent<Real>::blocks() {
  auto out = encoder.blocks();
  out.emplace_back(decoder_weight);
  out.emplace_back(&decoder_bias, 1);
  return out;
}

template <class Real>
std::vector<std::span<const Real>> BasicStudent<Real>::blocks() const {
  auto out = encoder.blocks();
  out.emplace_back(decoder_weight);
  out.emplace_back(&decoder_bias, 1);
  return out;
}

template <class Real>
void BasicStudent<Real>::set_zero() {
  encoder.set_zero();
  std::fill(decoder_weight.begin(), decoder_weight.end(), Real{0});
  decoder_bias = Real{0};
}

template <class Real>
void BasicStudent<Real>::check() const {
  if (decoder_weight.size() != encoder.output_dim())
    throw ShapeError("decoder weight length " +
                     shape_str(decoder_weight.size(), encoder.output_dim()));
}

template <class Real>
double BasicStudent<Real>::logit_from_embeddings(std::span<const Real> zi,
                                                 std::span<const Real> zj) const {
  double s = static_cast<double>(decoder_bias);
  for (std::size_t d = 0; d < decoder_weight.size(); ++d)
    s += static_cast<double>(decoder_weight[d]) * static_cast<double>(zi[d]) *
         static_cast<double>(zj[d]);
  return s;
}

template <class Real>
double BasicStudent<Real>::predict(std::span<const Real> xi, std::span<const Real> xj) const {
  check();
  if (xi.size() != encoder.input_dim() || xj.size() != encoder.input_dim())
    throw ShapeError("student input dim " + shape_str(xi.size(), encoder.input_dim()));
  const auto zi = mlp_forward(encoder, xi);
  const auto zj = mlp_forward(encoder, xj);
  return sigmoid(logit_from_embeddings(zi, zj));
}

template <class Real>
template <class Other>
BasicStudent<Other> BasicStudent<Real>::cast() const {
  BasicStudent<Other> out;
  out.encoder = encoder.template cast<Other>();
  out.decoder_weight.assign(decoder_weight.begin(), decoder_weight.end());
  out.decoder_bias = static_cast<Other>(decoder_bias);
  return out;
}

// ---- StudentPass -----------------------------------------------------------

template <class Real>
std::span<const double> StudentPass<Real>::forward(const BasicStudent<Real>& m,
                                                   std::span<const Real> node_rows,
                                                   std::size_t num_nodes,
                                                   std::span<const PairIndex> pairs) {
  m.check();
  mlp_forward_batch(m.encoder, node_rows, num_nodes, acts_);
  pairs_.assign(pairs.begin(), pairs.end());
  logits_.resize(pairs.size());
  for (const auto& p : pairs_)
    if (p.a >= num_nodes || p.b >= num_nodes) throw ShapeError("pair index outside node batch");
  const auto n = static_cast<std::ptrdiff_t>(pairs_.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto& p = pairs_[static_cast<std::size_t>(t)];
    logits_[static_cast<std::size_t>(t)] = m.logit_from_embeddings(embedding(p.a), embedding(p.b));
  }
  return logits_;
}

template <class Real>
void StudentPass<Real>::backward(const BasicStudent<Real>& m, std::span<const double> grad_logits,
                                 BasicStudent<Real>& grad) const {
  if (grad_logits.size() != pairs_.size())
    throw ShapeError("grad_logits size " + shape_str(grad_logits.size(), pairs_.size()));
  const std::size_t dim = m.embedding_dim();
  std::vector<Real> grad_z(acts_.rows * dim, Real{0});
  std::vector<double> gu(dim, 0.0);
  double gb = 0.0;
  for (std::size_t t = 0; t < pairs_.size(); ++t) {
    const double g = grad_logits[t];
    if (g == 0.0) continue;
    const auto& p = pairs_[t];
    const auto za = embedding(p.a);
    const auto zb = embedding(p.b);
    Real* ga = grad_z.data() + p.a * dim;
    Real* gbz = grad_z.data() + p.b * dim;
    gb += g;
    for (std::size_t d = 0; d < dim; ++d) {
      const double u = static_cast<double>(m.decoder_weight[d]);
      gu[d] += g * static_cast<double>(za[d]) * static_cast<double>(zb[d]);
      ga[d] += static_cast<Real>(g * u * static_cast<double>(zb[d]));
      gbz[d] += static_cast<Real>(g * u * static_cast<double>(za[d]));
    }
  }
  for (std::size_t d = 0; d < dim; ++d) grad.decoder_weight[d] += static_cast<Real>(gu[d]);
  grad.decoder_bias += static_cast<Real>(gb);
  mlp_backward_batch(m.encoder, acts_, std::span<const Real>(grad_z), grad.encoder, false);
}

template <class Real>
std::vector<Real> gather_rows(const FeatureMatrix& x, std::span<const NodeId> nodes) {
  std::vector<Real> out(nodes.size() * x.dim());
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto row = x.row(nodes[r]);
    std::transform(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(r * x.dim()),
                   [](float v) { return static_cast<Real>(v); });
  }
  return out;
}

// ---- optimization ----------------------------------------------------------

template <class Real>
void adam_step(std::span<const std::span<Real>> params,
               std::span<const std::span<const Real>> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam: block count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b)
    if (params[b].size() != grads[b].size() || state.m[b].size() != params[b].size())
      throw ShapeError("adam: block " + std::to_string(b) + " shape mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double g = static_cast<double>(grads[b][k]);
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double update = state.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
      params[b][k] = static_cast<Real>(static_cast<double>(params[b][k]) - update);
    }
  }
}

template <class Real>
double clip_global_norm(std::span<const std::span<Real>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (Real v : g) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads)
      for (Real& v : g) v = static_cast<Real>(static_cast<double>(v) * scale);
  }
  return norm;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(double q, int y) {
  const double c = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
  return y ? -std::log(c) : -std::log(1.0 - c);
}

// ---- checkpoints -----------------------------------------------------------

namespace {
constexpr std::string_view kMlpMagic = "EHDMMLP1";
}

void write_mlp(std::ostream& os, const Mlp& net) {
  binio::write_magic(os, kMlpMagic);
  binio::write_u64(os, net.num_layers());
  for (auto d : net.dims()) binio::write_u64(os, d);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.dims()[l], out = net.dims()[l + 1];
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t k = 0; k < in; ++k) binio::write_f32(os, net.weight(l)[k * out + o]);
    for (float b : net.bias(l)) binio::write_f32(os, b);
  }
}

Mlp read_mlp(std::istream& is) {
  binio::expect_magic(is, kMlpMagic);
  const auto layers = binio::read_u64(is);
  if (layers == 0 || layers > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<std::size_t> dims(layers + 1);
  for (auto& d : dims) {
    d = binio::read_u64(is);
    if (d == 0 || d > (1u << 24)) throw std::runtime_error("checkpoint: implausible layer dim");
  }
  Mlp net(dims);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t k = 0; k < in; ++k) net.weight(l)[k * out + o] = binio::read_f32(is);
    for (auto& b : net.bias(l)) b = binio::read_f32(is);
  }
  return net;
}

void save_student(const std::filesystem::path& path, const StudentModel& m) {
  m.check();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_mlp(out, m.encoder);
  for (float w : m.decoder_weight) binio::write_f32(out, w);
  binio::write_f32(out, m.decoder_bias);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

StudentModel load_student(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  StudentModel m;
  m.encoder = read_mlp(in);
  m.decoder_weight.resize(m.encoder.output_dim());
  for (auto& w : m.decoder_weight) w = binio::read_f32(in);
  m.decoder_bias = binio::read_f32(in);
  return m;
}

std::uint64_t file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

// ---- explicit instantiations -----------------------------------------------

#define LINKDISTILL_INSTANTIATE(Real)                                                        \
  template class BasicMlp<Real>;                                                             \
  template struct BasicStudent<Real>;                                                        \
  template class StudentPass<Real>;                                                          \
  template void mlp_forward_batch<Real>(const BasicMlp<Real>&, std::span<const Real>,        \
                                        std::size_t, MlpActivations<Real>&);                 \
  template std::vector<Real> mlp_backward_batch<Real>(                                       \
      const BasicMlp<Real>&, const MlpActivations<Real>&, std::span<const Real>,             \
      BasicMlp<Real>&, bool);                                                                \
  template std::vector<Real> mlp_forward<Real>(const BasicMlp<Real>&, std::span<const Real>); \
  template std::vector<Real> reference::mlp_forward_batch<Real>(                             \
      const BasicMlp<Real>&, std::span<const Real>, std::size_t);                            \
  template void reference::mlp_backward_batch<Real>(const BasicMlp<Real>&,                   \
                                                    std::span<const Real>, std::size_t,      \
                                                    std::span<const Real>, BasicMlp<Real>&); \
  template std::vector<Real> gather_rows<Real>(const FeatureMatrix&, std::span<const NodeId>); \
  template void adam_step<Real>(std::span<const std::span<Real>>,                            \
                                std::span<const std::span<const Real>>, AdamState&);         \
  template double clip_global_norm<Real>(std::span<const std::span<Real>>, double);

LINKDISTILL_INSTANTIATE(float)
LINKDISTILL_INSTANTIATE(double)
#undef LINKDISTILL_INSTANTIATE

template BasicMlp<double> BasicMlp<float>::cast<double>() const;
template BasicMlp<float> BasicMlp<double>::cast<float>() const;
template BasicStudent<double> BasicStudent<float>::cast<double>() const;
template BasicStudent<float> BasicStudent<double>::cast<float>() const;

}  // namespace linkdistill
