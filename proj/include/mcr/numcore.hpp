#pragma once

#include "mcr/error.hpp"
#include "mcr/rng.hpp"
#include "mcr/tensor.hpp"

#include <algorithm>
#include <vector>

namespace mcr {

inline constexpr double kNormEpsilon = 1e-12;

// ---------------------------------------------------------------------------
// Dropout

enum class DropoutMode { Disabled, Stochastic };

/// Inverted dropout: kept units are scaled by 1/(1-rate) when sampling, so the
/// disabled mode is the plain identity.
struct DropoutSpec {
  double rate = 0.0;
  DropoutMode mode = DropoutMode::Disabled;

  void validate() const;
  bool active() const { return mode == DropoutMode::Stochastic; }
};

/// Per-unit multipliers drawn by dropout_apply; empty means identity.
struct DropoutMask {
  Matrix scale;
  bool identity() const { return scale.size() == 0; }
};

Matrix dropout_apply(const Matrix& x, const DropoutSpec& spec, RngStream& rng,
                     DropoutMask* mask = nullptr);
Matrix dropout_backward(const Matrix& grad_out, const DropoutMask& mask);

// ---------------------------------------------------------------------------
// Dense layer: y = x W + b, x is [batch, in], W is [in, out], b is [1, out].

Matrix dense_forward(const Matrix& x, const Parameter& weight, const Parameter& bias);
/// Accumulates into weight.grad and bias.grad; returns dL/dx.
Matrix dense_backward(const Matrix& x, const Matrix& grad_out, Parameter& weight, Parameter& bias);

/// Saved state of one dropout + dense application.
struct DenseTrace {
  DropoutMask mask;
  Matrix dropped_input;
};

struct DenseLayer {
  Parameter weight;
  Parameter bias;

  DenseLayer() = default;
  DenseLayer(const std::string& name, Index in, Index out);

  Index in_dim() const { return weight.value.rows(); }
  Index out_dim() const { return weight.value.cols(); }
};

/// Glorot-uniform weights, zero bias.
void init_dense(DenseLayer& layer, RngStream& rng);

// ---------------------------------------------------------------------------
// Elman recurrent encoder:
//   h_t = tanh(W_x drop(x_t) + W_h h_{t-1} + b), h_0 = 0.
// Only the input path is dropped.

struct RnnLayer {
  Parameter input_weight;      // [in, hidden]
  Parameter recurrent_weight;  // [hidden, hidden]
  Parameter bias;              // [1, hidden]

  RnnLayer() = default;
  RnnLayer(const std::string& name, Index in, Index hidden);

  Index in_dim() const { return input_weight.value.rows(); }
  Index hidden_dim() const { return input_weight.value.cols(); }
};

void init_rnn(RnnLayer& layer, RngStream& rng);

struct RnnTrace {
  DropoutMask mask;
  Matrix dropped_inputs;  // [T, in]
  Matrix hidden;          // [T + 1, hidden]; row 0 is h_0
};

RowVector rnn_forward(const Matrix& seq, const RnnLayer& rnn, const DropoutSpec& drop, RngStream& rng,
                      RnnTrace* trace = nullptr);
/// Backpropagates dL/dh_T through time; returns dL/dseq.
Matrix rnn_backward(const RnnTrace& trace, const RowVector& grad_last, RnnLayer& rnn);

// ---------------------------------------------------------------------------
// L2 normalization: x / max(|x|, eps).

template <typename Derived>
typename Derived::PlainObject l2_normalize(const Eigen::MatrixBase<Derived>& x) {
  return x / std::max(x.norm(), kNormEpsilon);
}

/// Vector-Jacobian product of l2_normalize at x.
template <typename Derived, typename GradDerived>
typename Derived::PlainObject l2_normalize_backward(const Eigen::MatrixBase<Derived>& x,
                                                    const Eigen::MatrixBase<GradDerived>& grad_out) {
  const double norm = x.norm();
  if (norm <= kNormEpsilon) return grad_out / kNormEpsilon;
  const typename Derived::PlainObject unit = x / norm;
  return (grad_out - unit * unit.cwiseProduct(grad_out).sum()) / norm;
}

// ---------------------------------------------------------------------------
// Elementwise helpers.

inline Matrix tanh_forward(const Matrix& x) { return x.array().tanh().matrix(); }
/// Gradient through tanh given its output y.
inline Matrix tanh_backward(const Matrix& y, const Matrix& grad_out) {
  return (grad_out.array() * (1.0 - y.array().square())).matrix();
}

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace mcr
