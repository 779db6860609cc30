// SPDX-License-Identifier: Apache-2.0
/**
 * @file   nn.hpp
 * @brief  Small feedforward networks with hand-derived gradients: ReLU MLP,
 *         the Hadamard pair decoder used by student models, Adam, BCE.
 *
 * Every type is templated on the scalar. Production code runs on float;
 * gradient checks instantiate the identical code on double so that central
 * finite differences are accurate enough to compare against.
 */
#ifndef LINKDISTILL_NN_HPP_
#define LINKDISTILL_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "linkdistill/graph.hpp"

namespace linkdistill {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Affine-ReLU chain: ReLU after every layer but the last, identity output.
 * Weights of layer l are stored input-major, w[k * out + o], so a nonzero
 * input k touches one contiguous row; sparse bag-of-words inputs then cost
 * O(nnz * out) per row.
 */
template <class Real>
class BasicMlp {
 public:
  BasicMlp() = default;
  /// Zero-initialized parameters; dims = {in, h_1, ..., out}.
  explicit BasicMlp(std::vector<std::size_t> dims);

  /// Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  static BasicMlp kaiming(std::vector<std::size_t> dims, std::mt19937_64& rng);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t num_layers() const { return weights_.size(); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }

  std::vector<Real>& weight(std::size_t l) { return weights_[l]; }
  const std::vector<Real>& weight(std::size_t l) const { return weights_[l]; }
  std::vector<Real>& bias(std::size_t l) { return biases_[l]; }
  const std::vector<Real>& bias(std::size_t l) const { return biases_[l]; }

  /// Parameter blocks in checkpoint order: w0, b0, w1, b1, ...
  std::vector<std::span<Real>> blocks();
  std::vector<std::span<const Real>> blocks() const;

  void set_zero();

  template <class Other>
  BasicMlp<Other> cast() const;

  friend bool operator==(const BasicMlp&, const BasicMlp&) = default;

 private:
  template <class>
  friend class BasicMlp;
  std::vector<std::size_t> dims_;
  std::vector<std::vector<Real>> weights_;
  std::vector<std::vector<Real>> biases_;
};

/// Per-layer activations of a batch, retained for the backward pass.
/// layers[0] is the input, layers[l + 1] the output of layer l.
template <class Real>
struct MlpActivations {
  std::size_t rows = 0;
  std::vector<std::vector<Real>> layers;
  std::span<const Real> output() const { return layers.back(); }
};

/// Row-major batch forward; OpenMP-parallel over rows.
template <class Real>
void mlp_forward_batch(const BasicMlp<Real>& net, std::span<const Real> input, std::size_t rows,
                       MlpActivations<Real>& acts);

/// Accumulates parameter gradients into grad (same shape as net) given
/// dL/doutput. Returns dL/dinput only when want_input_grad is set.
/// Reductions run in a fixed order, so results do not depend on the
/// thread count.
template <class Real>
std::vector<Real> mlp_backward_batch(const BasicMlp<Real>& net, const MlpActivations<Real>& acts,
                                     std::span<const Real> grad_output, BasicMlp<Real>& grad,
                                     bool want_input_grad = false);

/// Single-vector convenience wrapper.
template <class Real>
std::vector<Real> mlp_forward(const BasicMlp<Real>& net, std::span<const Real> x);

/// Straightforward dense triple-loop versions of the batch kernels, kept as
/// the reference for tests and the benchmark.
namespace reference {
template <class Real>
std::vector<Real> mlp_forward_batch(const BasicMlp<Real>& net, std::span<const Real> input,
                                    std::size_t rows);
template <class Real>
void mlp_backward_batch(const BasicMlp<Real>& net, std::span<const Real> input, std::size_t rows,
                        std::span<const Real> grad_output, BasicMlp<Real>& grad);
}  // namespace reference

/**
 * Student link predictor: an encoder MLP maps node features to z, and a
 * pair is scored as sigmoid(u . (z_i * z_j) + b). Symmetric in (i, j).
 */
template <class Real>
struct BasicStudent {
  BasicMlp<Real> encoder;
  std::vector<Real> decoder_weight;
  Real decoder_bias{};

  static BasicStudent init(std::vector<std::size_t> encoder_dims, std::mt19937_64& rng);
  /// Zero model with the same shapes, used as a gradient buffer.
  static BasicStudent zeros_like(const BasicStudent& m);

  std::vector<std::span<Real>> blocks();
  std::vector<std::span<const Real>> blocks() const;
  void set_zero();
  void check() const;

  std::size_t embedding_dim() const { return encoder.output_dim(); }

  double logit_from_embeddings(std::span<const Real> zi, std::span<const Real> zj) const;
  double predict(std::span<const Real> xi, std::span<const Real> xj) const;

  template <class Other>
  BasicStudent<Other> cast() const;

  friend bool operator==(const BasicStudent&, const BasicStudent&) = default;
};

using Mlp = BasicMlp<float>;
using StudentModel = BasicStudent<float>;

/// Index pair into the row set of a node batch.
struct PairIndex {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
};

/**
 * Forward/backward over a set of node pairs. Nodes are encoded once each;
 * pairs reference rows of the node batch.
 */
template <class Real>
class StudentPass {
 public:
  /// Encodes rows (rows x input_dim) and decodes pairs. Returns logits.
  std::span<const double> forward(const BasicStudent<Real>& m, std::span<const Real> node_rows,
                                  std::size_t num_nodes, std::span<const PairIndex> pairs);

  /// Accumulates gradients given dL/dlogit per pair.
  void backward(const BasicStudent<Real>& m, std::span<const double> grad_logits,
                BasicStudent<Real>& grad) const;

  std::span<const Real> embedding(std::size_t row) const {
    const auto d = acts_.layers.back().size() / acts_.rows;
    return {acts_.layers.back().data() + row * d, d};
  }

 private:
  MlpActivations<Real> acts_;
  std::vector<PairIndex> pairs_;
  std::vector<double> logits_;
};

/// Copies feature rows of the given nodes into a contiguous Real buffer.
template <class Real>
std::vector<Real> gather_rows(const FeatureMatrix& x, std::span<const NodeId> nodes);

// ---- optimization ----------------------------------------------------------

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update. Moment buffers are sized on first use
/// and must keep matching shapes afterwards.
template <class Real>
void adam_step(std::span<const std::span<Real>> params,
               std::span<const std::span<const Real>> grads, AdamState& state);

/// Scales gradients in place so their global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
template <class Real>
double clip_global_norm(std::span<const std::span<Real>> grads, double max_norm);

inline constexpr double kProbClamp = 1e-7;

/// -y log q - (1 - y) log(1 - q) with q clamped to [1e-7, 1 - 1e-7].
double bce_loss(double q, int y);

/// d bce / d logit, where q = sigmoid(logit): q - y.
inline double bce_grad_logit(double q, int y) { return q - static_cast<double>(y); }

double sigmoid(double x);

// ---- checkpoints -----------------------------------------------------------

/// "EHDMMLP1", layer count, dims, then per layer weights (out x in,
/// row-major) and bias; all counts u64 LE, parameters f32 LE.
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

/// write_mlp followed by the decoder weight and bias.
void save_student(const std::filesystem::path& path, const StudentModel& m);
StudentModel load_student(const std::filesystem::path& path);

/// FNV-1a 64 over a file's bytes; identifies student checkpoints.
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace linkdistill

#endif  // LINKDISTILL_NN_HPP_
