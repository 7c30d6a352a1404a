#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "aq/geometry.hpp"

namespace aq {

/// Fully-connected tanh network with a linear output layer.
struct MlpArch {
  int in_dim = 1;
  int out_dim = 1;
  int hidden_layers = 1;
  int width = 1;

  void validate() const;
  int n_affine() const { return hidden_layers + 1; }
  int rows(int layer) const { return layer == hidden_layers ? out_dim : width; }
  int cols(int layer) const { return layer == 0 ? in_dim : width; }
  long param_count() const;
};

/// Flat parameter vector with per-layer offsets. Layout: W0, b0, W1, b1,
/// ..., W_out, b_out with weights in column-major storage order.
struct MlpParams {
  MlpArch arch;
  std::uint64_t seed = 0;
  VectorXd values;

  long weight_offset(int layer) const;
  long bias_offset(int layer) const;
  Eigen::Map<const MatrixXd> weight(int layer) const;
  Eigen::Map<const VectorXd> bias(int layer) const;
};

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)) from a splitmix64 stream,
/// biases zero; identical vectors for identical (arch, seed).
MlpParams init_glorot(const MlpArch& arch, std::uint64_t seed);

/// How much of the spatial jet a consumer needs.
enum class JetOrder { value = 0, gradient = 1, hessian = 2 };

inline int tri_count(int d) { return d * (d + 1) / 2; }
/// Index of the (s,t) upper-triangle Hessian channel, s <= t.
inline int tri_index(int s, int t, int d) { return s * d - s * (s - 1) / 2 + (t - s); }

/// Network outputs and their spatial derivatives over a batch of points,
/// one column per point. hess holds the upper-triangle channels (s <= t).
struct BatchJets {
  MatrixXd value;               // m x N
  std::vector<MatrixXd> grad;   // d entries, m x N
  std::vector<MatrixXd> hess;   // tri_count(d) entries, m x N
};

/// Intermediate state of a jet forward pass, kept for the reverse sweep.
struct JetTrace {
  MatrixXd X;
  std::vector<MatrixXd> A;                 // post-tanh values per hidden layer
  std::vector<std::vector<MatrixXd>> GZ;   // pre-activation gradient channels
  std::vector<std::vector<MatrixXd>> HZ;   // pre-activation Hessian channels
  JetOrder order = JetOrder::value;
};

/// Forward propagation of (value, gradient, Hessian) through the layers.
BatchJets jet_forward(const MlpParams& p, const MatrixXd& X, JetOrder order,
                      JetTrace* trace = nullptr);

/// Reverse sweep: gradient w.r.t. the flat parameter vector of
/// sum over points of <seeds, output jets>. Seeds play the role of the
/// loss adjoints; absent (empty) seed channels are treated as zero.
/// Off-diagonal Hessian seeds must already combine both symmetric entries.
VectorXd jet_vjp(const MlpParams& p, const JetTrace& trace, const BatchJets& seeds);

/// Network values at a batch of points (m x N).
MatrixXd forward_batch(const MlpParams& p, const MatrixXd& X);

/// Network value at one point.
VectorXd forward(const MlpParams& p, const VectorXd& x);

/// Value, gradient and (symmetric) Hessian of each output at one point.
struct SpatialJet {
  VectorXd value;                // m
  MatrixXd gradient;             // m x d
  std::vector<MatrixXd> hessian; // m entries of d x d
};

SpatialJet spatial_jet(const MlpParams& p, const VectorXd& x);

/// Checkpoint file: versioned magic, arch header, then the raw 64-bit
/// parameter array.
void save_checkpoint(const MlpParams& p, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace aq
