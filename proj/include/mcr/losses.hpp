#pragma once

#include "mcr/tensor.hpp"

#include <compare>
#include <span>
#include <vector>

namespace mcr {

struct TripletIdx {
  Index anchor = 0;
  Index positive = 0;
  Index negative = 0;

  auto operator<=>(const TripletIdx&) const = default;
};

/// A loss value with its gradient with respect to each input embedding, in
/// input order. `pre_clamp` is the summed hinge arguments before [.]_+ (for a
/// single hinge, the signed distance to the hinge point).
struct LossValue {
  double value = 0.0;
  double pre_clamp = 0.0;
  std::vector<Vector> grads;
};

/// Tolerance on |x| = 1 for inputs of the unit-norm losses.
inline constexpr double kUnitNormTolerance = 1e-6;

template <typename DerivedA, typename DerivedB>
double euclidean_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).norm();
}

/// d|a - b| / da: the unit vector from b to a, zero when the points coincide.
template <typename DerivedA, typename DerivedB>
typename DerivedA::PlainObject distance_gradient(const Eigen::MatrixBase<DerivedA>& a,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  typename DerivedA::PlainObject diff = a - b;
  const double d = diff.norm();
  if (d == 0.0) return DerivedA::PlainObject::Zero(a.rows(), a.cols());
  return diff / d;
}

/// [D(a,p) - D(a,n) + m]_+ on unit embeddings, valued in [0, 2 + m].
LossValue triplet_regression(const Vector& anchor, const Vector& positive, const Vector& negative, double margin);

/// Sum over consecutive pairs of [D(x0,x_j) - D(x0,x_{j+1}) + m]_+ for a
/// k-tuple x0..x_{k-1} (k >= 3), valued in [0, 2 + (k-2) m]. Every middle
/// element must satisfy D(x0,x1) <= D(x0,x_j) <= D(x0,x_{k-1}) within 1e-9.
LossValue ktuplet_loss(std::span<const Vector> tuple, double margin);

/// Range ceiling 2 + (k - 2) m of the k-tuplet loss.
inline double ktuplet_bound(std::size_t k, double margin) { return 2.0 + static_cast<double>(k - 2) * margin; }

/// [D(a,p) - D(a,n)]_+ on unconstrained embeddings, valued in [0, inf).
LossValue softmargin_triplet(const Vector& anchor, const Vector& positive, const Vector& negative);

/// Objective value: mean per-triplet loss plus lambda * sum of |W|^2 over the
/// decaying parameters. Each triplet's gradient enters the objective with
/// weight 1/N; the penalty gradient is applied by the optimizer.
struct BatchObjective {
  double value = 0.0;
  double data_term = 0.0;
  double penalty = 0.0;
  double triplet_weight = 0.0;
};

BatchObjective batch_objective(std::span<const LossValue> losses, const std::vector<Parameter*>& params,
                               double lambda);

}  // namespace mcr
