#include "mcr/numcore.hpp"

#include <cmath>
#include <sstream>

namespace mcr {

namespace {

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "," << m.cols() << "]";
  return os.str();
}

void glorot(Matrix& w, RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
}

}  // namespace

void DropoutSpec::validate() const {
  if (!(rate >= 0.0 && rate < 1.0)) {
    std::ostringstream os;
    os << "dropout rate must lie in [0, 1), got " << rate;
    fail(ErrorKind::Parameter, os.str());
  }
}

Matrix dropout_apply(const Matrix& x, const DropoutSpec& spec, RngStream& rng, DropoutMask* mask) {
  spec.validate();
  if (!spec.active()) {
    if (mask) mask->scale.resize(0, 0);
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  Matrix scale(x.rows(), x.cols());
  for (Index i = 0; i < scale.size(); ++i) scale.data()[i] = rng.uniform() < spec.rate ? 0.0 : keep_scale;
  Matrix out = x.cwiseProduct(scale);
  if (mask) mask->scale = std::move(scale);
  return out;
}

Matrix dropout_backward(const Matrix& grad_out, const DropoutMask& mask) {
  if (mask.identity()) return grad_out;
  return grad_out.cwiseProduct(mask.scale);
}

Matrix dense_forward(const Matrix& x, const Parameter& weight, const Parameter& bias) {
  if (x.cols() != weight.value.rows() || bias.value.rows() != 1 || bias.value.cols() != weight.value.cols()) {
    fail(ErrorKind::Dimension, "dense " + weight.name + ": input " + shape_of(x) + " weight " +
                                   shape_of(weight.value) + " bias " + shape_of(bias.value));
  }
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix dense_backward(const Matrix& x, const Matrix& grad_out, Parameter& weight, Parameter& bias) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != weight.value.cols()) {
    fail(ErrorKind::Dimension, "dense " + weight.name + " backward: grad " + shape_of(grad_out));
  }
  weight.grad.noalias() += x.transpose() * grad_out;
  bias.grad += grad_out.colwise().sum();
  return grad_out * weight.value.transpose();
}

DenseLayer::DenseLayer(const std::string& name, Index in, Index out)
    : weight(name + ".weight", Matrix::Zero(in, out), true), bias(name + ".bias", Matrix::Zero(1, out), false) {}

void init_dense(DenseLayer& layer, RngStream& rng) {
  glorot(layer.weight.value, rng);
  layer.bias.value.setZero();
}

RnnLayer::RnnLayer(const std::string& name, Index in, Index hidden)
    : input_weight(name + ".input_weight", Matrix::Zero(in, hidden), true),
      recurrent_weight(name + ".recurrent_weight", Matrix::Zero(hidden, hidden), true),
      bias(name + ".bias", Matrix::Zero(1, hidden), false) {}

void init_rnn(RnnLayer& layer, RngStream& rng) {
  glorot(layer.input_weight.value, rng);
  glorot(layer.recurrent_weight.value, rng);
  layer.bias.value.setZero();
}

RowVector rnn_forward(const Matrix& seq, const RnnLayer& rnn, const DropoutSpec& drop, RngStream& rng,
                      RnnTrace* trace) {
  if (seq.rows() == 0) fail(ErrorKind::Input, "recurrent encoder " + rnn.bias.name + ": empty sequence");
  if (seq.cols() != rnn.in_dim()) {
    fail(ErrorKind::Dimension, "recurrent encoder " + rnn.bias.name + ": input " + shape_of(seq) +
                                   " expects width " + std::to_string(rnn.in_dim()));
  }
  DropoutMask mask;
  Matrix dropped = dropout_apply(seq, drop, rng, &mask);
  // Input projections for all steps at once; the recurrence is serial.
  Matrix projected = dropped * rnn.input_weight.value;
  projected.rowwise() += rnn.bias.value.row(0);

  const Index steps = seq.rows();
  Matrix hidden = Matrix::Zero(steps + 1, rnn.hidden_dim());
  for (Index t = 0; t < steps; ++t) {
    hidden.row(t + 1) = (projected.row(t) + hidden.row(t) * rnn.recurrent_weight.value).array().tanh().matrix();
  }
  RowVector last = hidden.row(steps);
  if (trace) {
    trace->mask = std::move(mask);
    trace->dropped_inputs = std::move(dropped);
    trace->hidden = std::move(hidden);
  }
  return last;
}

Matrix rnn_backward(const RnnTrace& trace, const RowVector& grad_last, RnnLayer& rnn) {
  const Index steps = trace.dropped_inputs.rows();
  Matrix grad_pre(steps, rnn.hidden_dim());
  RowVector grad_h = grad_last;
  for (Index t = steps - 1; t >= 0; --t) {
    const RowVector h = trace.hidden.row(t + 1);
    grad_pre.row(t) = grad_h.array() * (1.0 - h.array().square());
    grad_h = grad_pre.row(t) * rnn.recurrent_weight.value.transpose();
  }
  rnn.input_weight.grad.noalias() += trace.dropped_inputs.transpose() * grad_pre;
  rnn.recurrent_weight.grad.noalias() += trace.hidden.topRows(steps).transpose() * grad_pre;
  rnn.bias.grad += grad_pre.colwise().sum();
  Matrix grad_inputs = grad_pre * rnn.input_weight.value.transpose();
  return dropout_backward(grad_inputs, trace.mask);
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace mcr
