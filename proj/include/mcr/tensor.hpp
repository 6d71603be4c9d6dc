#pragma once

#include <Eigen/Dense>

#include <string>

namespace mcr {

using Index = Eigen::Index;

// Row-major so batches of row vectors map onto contiguous storage.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using RowVector = RowVectorT<double>;

/// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Whether the L2 weight penalty applies (weights yes, biases and masks no).
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, Matrix init, bool weight_decay = true)
      : name(std::move(n)), value(std::move(init)), grad(Matrix::Zero(value.rows(), value.cols())),
        decay(weight_decay) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

}  // namespace mcr
