#include "mcr/losses.hpp"

#include "mcr/error.hpp"

#include <cmath>
#include <sstream>

namespace mcr {

namespace {

void require_unit(const Vector& v, const char* role) {
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << role << " embedding must be unit-norm, got |x| = " << norm;
    fail(ErrorKind::Contract, os.str());
  }
}

void require_same_dim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorKind::Dimension, "loss inputs differ in dimension");
}

// One hinge term [D(a,p) - D(a,n) + m]_+; the subgradient at the hinge is 0.
struct Hinge {
  double pre = 0.0;
  double value = 0.0;
  Vector grad_anchor;
  Vector grad_positive;
  Vector grad_negative;
};

Hinge hinge_term(const Vector& a, const Vector& p, const Vector& n, double margin) {
  Hinge h;
  h.pre = euclidean_distance(a, p) - euclidean_distance(a, n) + margin;
  if (h.pre > 0.0) {
    h.value = h.pre;
    const Vector u_ap = distance_gradient(a, p);
    const Vector u_an = distance_gradient(a, n);
    h.grad_anchor = u_ap - u_an;
    h.grad_positive = -u_ap;
    h.grad_negative = u_an;
  } else {
    h.grad_anchor = h.grad_positive = h.grad_negative = Vector::Zero(a.size());
  }
  return h;
}

LossValue from_hinge(Hinge h) {
  LossValue out;
  out.value = h.value;
  out.pre_clamp = h.pre;
  out.grads = {std::move(h.grad_anchor), std::move(h.grad_positive), std::move(h.grad_negative)};
  return out;
}

}  // namespace

LossValue triplet_regression(const Vector& anchor, const Vector& positive, const Vector& negative,
                             double margin) {
  if (margin < 0.0) fail(ErrorKind::Parameter, "triplet margin must be nonnegative");
  require_same_dim(anchor, positive);
  require_same_dim(anchor, negative);
  require_unit(anchor, "anchor");
  require_unit(positive, "positive");
  require_unit(negative, "negative");
  return from_hinge(hinge_term(anchor, positive, negative, margin));
}

LossValue ktuplet_loss(std::span<const Vector> tuple, double margin) {
  if (tuple.size() < 3) {
    fail(ErrorKind::Arity, "k-tuplet loss needs k >= 3 elements, got " + std::to_string(tuple.size()));
  }
  if (margin < 0.0) fail(ErrorKind::Parameter, "k-tuplet margin must be nonnegative");
  const Vector& anchor = tuple[0];
  for (std::size_t j = 0; j < tuple.size(); ++j) {
    require_same_dim(anchor, tuple[j]);
    require_unit(tuple[j], j == 0 ? "anchor" : "tuple");
  }

  constexpr double kTieTolerance = 1e-9;
  const double nearest = euclidean_distance(anchor, tuple[1]);
  const double farthest = euclidean_distance(anchor, tuple.back());
  for (std::size_t j = 2; j + 1 < tuple.size(); ++j) {
    const double dj = euclidean_distance(anchor, tuple[j]);
    if (dj < nearest - kTieTolerance || dj > farthest + kTieTolerance) {
      std::ostringstream os;
      os << "k-tuplet element " << j << " at distance " << dj << " lies outside [" << nearest << ", " << farthest
         << "]";
      fail(ErrorKind::Contract, os.str());
    }
  }

  if (tuple.size() == 3) return from_hinge(hinge_term(tuple[0], tuple[1], tuple[2], margin));

  LossValue out;
  out.grads.assign(tuple.size(), Vector::Zero(anchor.size()));
  for (std::size_t j = 1; j + 1 < tuple.size(); ++j) {
    Hinge h = hinge_term(anchor, tuple[j], tuple[j + 1], margin);
    out.value += h.value;
    out.pre_clamp += h.pre;
    out.grads[0] += h.grad_anchor;
    out.grads[j] += h.grad_positive;
    out.grads[j + 1] += h.grad_negative;
  }
  return out;
}

LossValue softmargin_triplet(const Vector& anchor, const Vector& positive, const Vector& negative) {
  require_same_dim(anchor, positive);
  require_same_dim(anchor, negative);
  return from_hinge(hinge_term(anchor, positive, negative, 0.0));
}

BatchObjective batch_objective(std::span<const LossValue> losses, const std::vector<Parameter*>& params,
                               double lambda) {
  if (losses.empty()) fail(ErrorKind::Arity, "batch objective over an empty triplet set");
  BatchObjective obj;
  for (const LossValue& l : losses) obj.data_term += l.value;
  obj.triplet_weight = 1.0 / static_cast<double>(losses.size());
  obj.data_term *= obj.triplet_weight;
  for (const Parameter* p : params) {
    if (p->decay) obj.penalty += p->value.squaredNorm();
  }
  obj.penalty *= lambda;
  obj.value = obj.data_term + obj.penalty;
  return obj;
}

}  // namespace mcr
